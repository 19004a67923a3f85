#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "catchphrase/error.hpp"

namespace catchphrase {

/// A finite float32 vector living in one embedding space. Values are stored
/// in single precision (the archive format) and widened to double for every
/// arithmetic operation.
///
/// A default-constructed vector is "absent" (dim 0); it marks a record whose
/// embedding has not been computed yet, e.g. a staged prompt. Any constructed
/// vector has dim >= 1 and only finite values.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  explicit EmbeddingVector(std::vector<float> values) : values_(std::move(values)) {
    validate();
  }

  EmbeddingVector(std::initializer_list<float> values) : values_(values) { validate(); }

  template <std::floating_point T>
  static EmbeddingVector from(std::span<const T> values) {
    std::vector<float> narrowed(values.size());
    std::transform(values.begin(), values.end(), narrowed.begin(),
                   [](T v) { return static_cast<float>(v); });
    return EmbeddingVector(std::move(narrowed));
  }

  std::size_t dim() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  std::span<const float> values() const noexcept { return values_; }
  float operator[](std::size_t i) const { return values_[i]; }

  std::vector<double> widened() const { return {values_.begin(), values_.end()}; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  void validate() const {
    if (values_.empty()) fail(ErrorCode::kDimensionMismatch, "embedding must have dim >= 1");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        fail(ErrorCode::kNonFiniteValue, "embedding value " + std::to_string(i) + " is not finite");
      }
    }
  }

  std::vector<float> values_;
};

template <typename T>
concept Real = std::floating_point<T>;

/// Index-ascending single-accumulator dot product in double precision.
template <Real A, Real B>
double dot(std::span<const A> u, std::span<const B> v) {
  if (u.size() != v.size()) {
    fail(ErrorCode::kDimensionMismatch,
         "dot: dims " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  }
  return acc;
}

template <Real A>
double l2_norm(std::span<const A> u) {
  return std::sqrt(dot(u, u));
}

/// Cosine similarity clamped to [-1, 1].
template <Real A, Real B>
double cosine_sim(std::span<const A> u, std::span<const B> v) {
  if (u.size() != v.size()) {
    fail(ErrorCode::kDimensionMismatch,
         "cosine_sim: dims " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  }
  if (u.empty()) fail(ErrorCode::kDimensionMismatch, "cosine_sim: empty vector");
  double nu = l2_norm(u);
  double nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) fail(ErrorCode::kZeroVector, "cosine_sim: all-zero vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

inline double cosine_sim(const EmbeddingVector& u, const EmbeddingVector& v) {
  return cosine_sim(u.values(), v.values());
}

inline double cosine_sim(const std::vector<double>& u, const std::vector<double>& v) {
  return cosine_sim(std::span<const double>(u), std::span<const double>(v));
}

template <Real A>
std::vector<double> l2_normalize(std::span<const A> v) {
  double n = l2_norm(v);
  if (n == 0.0) fail(ErrorCode::kZeroVector, "l2_normalize: all-zero vector");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(v[i]) / n;
  return out;
}

/// Unit vector in double precision; narrowing back to float32 would cost
/// the 1e-9 norm guarantee.
inline std::vector<double> l2_normalize(const EmbeddingVector& v) {
  return l2_normalize(v.values());
}

}  // namespace catchphrase
