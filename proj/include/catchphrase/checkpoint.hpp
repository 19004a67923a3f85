#pragma once

// Checkpoint file layout, all integers little-endian:
//   8 bytes   magic "CPHCKPT\0"
//   u32       format version
//   u64       header length L
//   L bytes   JSON header: net configs, seed, step, parameter counts
//   rest      float32 LE parameters: mapper, decoder, discriminator, each
//             layer by layer, weights (row-major) then biases

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "catchphrase/archive.hpp"
#include "catchphrase/error.hpp"
#include "catchphrase/mapnet.hpp"
#include "catchphrase/objectives.hpp"

namespace catchphrase {

inline constexpr std::array<char, 8> kCheckpointMagic = {'C', 'P', 'H', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

namespace ckpt_detail {

inline nlohmann::json net_json(const NetConfig& c) {
  return {{"in_dim", c.in_dim},
          {"out_dim", c.out_dim},
          {"hidden", c.hidden},
          {"hidden_activation", std::string(to_string(c.hidden_activation))},
          {"output_activation", std::string(to_string(c.output_activation))}};
}

inline NetConfig net_from_json(const nlohmann::json& j) {
  try {
    NetConfig c;
    c.in_dim = j.at("in_dim").get<std::size_t>();
    c.out_dim = j.at("out_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.hidden_activation = parse_activation(j.at("hidden_activation").get<std::string>());
    c.output_activation = parse_activation(j.at("output_activation").get<std::string>());
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorruptManifest, std::string("checkpoint net config: ") + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::kCorruptManifest, std::string("checkpoint net config: ") + e.what());
  }
}

template <typename T>
void append_le(std::vector<char>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T read_le(const char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace ckpt_detail

inline std::vector<char> encode_checkpoint(const Model& model, const CheckpointInfo& info) {
  nlohmann::json header{{"mapper", ckpt_detail::net_json(model.mapper_config)},
                        {"decoder", ckpt_detail::net_json(model.decoder_config)},
                        {"discriminator", ckpt_detail::net_json(model.disc_config)},
                        {"seed", info.seed},
                        {"step", info.step},
                        {"param_counts", {model.mapper.size(), model.decoder.size(), model.disc.size()}}};
  auto text = header.dump();
  std::vector<char> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  ckpt_detail::append_le<std::uint32_t>(out, kCheckpointVersion);
  ckpt_detail::append_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto* p : {&model.mapper, &model.decoder, &model.disc}) {
    p->for_each([&](double v) { archive_detail::append_f32_le(out, static_cast<float>(v)); });
  }
  return out;
}

inline void save_checkpoint(const std::filesystem::path& path, const Model& model, const CheckpointInfo& info) {
  archive_detail::write_bytes(path, encode_checkpoint(model, info));
}

inline Model decode_checkpoint(const std::vector<char>& bytes, CheckpointInfo* info = nullptr) {
  constexpr std::size_t kPrefix = 8 + 4 + 8;
  if (bytes.size() < kPrefix || std::memcmp(bytes.data(), kCheckpointMagic.data(), 8) != 0) {
    fail(ErrorCode::kCorruptManifest, "not a checkpoint file");
  }
  auto version = ckpt_detail::read_le<std::uint32_t>(bytes.data() + 8);
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kCorruptManifest, "unsupported checkpoint version " + std::to_string(version));
  }
  auto header_len = ckpt_detail::read_le<std::uint64_t>(bytes.data() + 12);
  if (header_len > bytes.size() - kPrefix) fail(ErrorCode::kTruncatedVectorFile, "checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + kPrefix, bytes.begin() + kPrefix + static_cast<long>(header_len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorruptManifest, std::string("checkpoint header: ") + e.what());
  }
  Model m;
  m.mapper_config = ckpt_detail::net_from_json(header.at("mapper"));
  m.decoder_config = ckpt_detail::net_from_json(header.at("decoder"));
  m.disc_config = ckpt_detail::net_from_json(header.at("discriminator"));
  m.mapper = zero_params(m.mapper_config);
  m.decoder = zero_params(m.decoder_config);
  m.disc = zero_params(m.disc_config);
  std::size_t need = 4 * (m.mapper.size() + m.decoder.size() + m.disc.size());
  std::size_t offset = kPrefix + header_len;
  if (bytes.size() - offset < need) fail(ErrorCode::kTruncatedVectorFile, "checkpoint parameter blob truncated");
  for (auto* p : {&m.mapper, &m.decoder, &m.disc}) {
    p->for_each([&](double& v) {
      v = archive_detail::read_f32_le(bytes.data() + offset);
      offset += 4;
    });
  }
  if (info != nullptr) {
    info->seed = header.value("seed", std::uint64_t{0});
    info->step = header.value("step", std::uint64_t{0});
  }
  return m;
}

inline Model load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr) {
  return decode_checkpoint(archive_detail::read_bytes(path), info);
}

}  // namespace catchphrase
