#pragma once

// Embedding archive I/O.
//
// Binary archive: a directory holding
//   manifest.json          dims, encoder names, declared classes, ordered records
//   vectors.selector.f32   selector-space rows, float32 LE, row i at i*dim_selector*4
//   vectors.encoder.f32    encoder-space rows: the audio block (dim_encoder_audio)
//                          first, one row per audio record, then the text block
//                          (dim_encoder_text). Row i < A starts at i*dA*4, row
//                          i >= A at A*dA*4 + (i-A)*dT*4. With dA == dT this is
//                          plain i*dim*4.
//
// Fixture: a single .json file with the same manifest fields and the vectors
// inline in each record ("selector", "encoder").

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "catchphrase/dataset.hpp"
#include "catchphrase/error.hpp"

namespace catchphrase {

namespace archive_detail {

using nlohmann::json;

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kSelectorFile = "vectors.selector.f32";
inline constexpr const char* kEncoderFile = "vectors.encoder.f32";

inline std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

inline void append_f32_le(std::vector<char>& out, float value) {
  auto bits = std::bit_cast<std::uint32_t>(value);
  if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
  char raw[4];
  std::memcpy(raw, &bits, 4);
  out.insert(out.end(), raw, raw + 4);
}

inline float read_f32_le(const char* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
  return std::bit_cast<float>(bits);
}

inline std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "short write to " + path.string());
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kCorruptManifest, path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    fail(ErrorCode::kCorruptManifest, where + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kCorruptManifest, where + ": bad field '" + key + "': " + e.what());
  }
}

inline Manifest parse_manifest(const json& j) {
  Manifest m;
  m.version = field<int>(j, "version", "manifest");
  auto dim = [&](const char* key) {
    auto v = field<long long>(j, key, "manifest");
    if (v <= 0) fail(ErrorCode::kCorruptManifest, std::string("manifest: ") + key + " must be >= 1");
    return static_cast<std::size_t>(v);
  };
  m.dim_selector = dim("dim_selector");
  m.dim_encoder_audio = dim("dim_encoder_audio");
  m.dim_encoder_text = dim("dim_encoder_text");
  if (j.contains("encoder_names")) {
    const auto& names = j["encoder_names"];
    m.encoder_names.selector = names.value("selector", "");
    m.encoder_names.audio = names.value("audio", "");
    m.encoder_names.text = names.value("text", "");
  }
  if (j.contains("classes")) m.classes = field<std::vector<std::string>>(j, "classes", "manifest");
  check_dims(m);
  return m;
}

inline json manifest_json(const Manifest& m) {
  return json{{"version", m.version},
              {"dim_selector", m.dim_selector},
              {"dim_encoder_audio", m.dim_encoder_audio},
              {"dim_encoder_text", m.dim_encoder_text},
              {"encoder_names",
               {{"selector", m.encoder_names.selector},
                {"audio", m.encoder_names.audio},
                {"text", m.encoder_names.text}}},
              {"classes", m.classes}};
}

inline json record_header(const AudioRecord& a) {
  json r{{"id", a.id}, {"kind", "audio"}, {"class", a.class_label}};
  if (a.truth_prompt_id) r["truth"] = *a.truth_prompt_id;
  return r;
}

inline json record_header(const PromptRecord& p) {
  return json{{"id", p.id}, {"kind", "prompt"}, {"class", p.class_label},
              {"source", std::string(to_string(p.source))}, {"text", p.text}};
}

inline json vector_json(const EmbeddingVector& v) {
  json arr = json::array();
  for (float x : v.values()) arr.push_back(x);
  return arr;
}

inline EmbeddingVector vector_from_json(const json& j, std::size_t dim, const std::string& where) {
  if (!j.is_array()) fail(ErrorCode::kCorruptManifest, where + ": vector must be an array");
  if (j.size() != dim) {
    fail(ErrorCode::kDimMismatch, where + ": " + std::to_string(j.size()) +
                                      " values, manifest says " + std::to_string(dim));
  }
  std::vector<float> values;
  values.reserve(dim);
  for (const auto& x : j) {
    if (!x.is_number()) fail(ErrorCode::kCorruptManifest, where + ": non-numeric vector entry");
    values.push_back(x.get<float>());
  }
  try {
    return EmbeddingVector(std::move(values));
  } catch (const Error& e) {
    fail(ErrorCode::kCorruptManifest, where + ": " + e.what());
  }
}

struct RecordHeader {
  std::string id;
  bool is_audio = true;
  std::string class_label;
  PromptSource source = PromptSource::kLlmVisual;
  std::string text;
  std::optional<std::string> truth;
};

inline RecordHeader parse_record_header(const json& r, std::size_t index) {
  std::string where = "record " + std::to_string(index);
  RecordHeader h;
  h.id = field<std::string>(r, "id", where);
  auto kind = field<std::string>(r, "kind", where);
  if (kind != "audio" && kind != "prompt") {
    fail(ErrorCode::kCorruptManifest, where + ": kind must be audio or prompt");
  }
  h.is_audio = kind == "audio";
  h.class_label = field<std::string>(r, "class", where);
  if (!h.is_audio) {
    h.source = parse_prompt_source(field<std::string>(r, "source", where));
    h.text = r.value("text", "");
  } else if (r.contains("truth")) {
    h.truth = field<std::string>(r, "truth", where);
  }
  return h;
}

inline Dataset load_fixture(const std::filesystem::path& path) {
  auto j = read_json(path);
  Dataset ds;
  ds.manifest = parse_manifest(j);
  if (!j.contains("records") || !j["records"].is_array()) {
    fail(ErrorCode::kCorruptManifest, "fixture: missing records array");
  }
  std::size_t index = 0;
  for (const auto& r : j["records"]) {
    auto h = parse_record_header(r, index);
    std::string where = "record '" + h.id + "'";
    if (h.is_audio) {
      AudioRecord a{h.id, h.class_label,
                    vector_from_json(r.value("selector", json()), ds.manifest.dim_selector, where),
                    vector_from_json(r.value("encoder", json()), ds.manifest.dim_encoder_audio, where),
                    h.truth};
      ds.audio.push_back(std::move(a));
    } else {
      PromptRecord p{h.id, h.class_label, h.source, h.text,
                     vector_from_json(r.value("selector", json()), ds.manifest.dim_selector, where),
                     vector_from_json(r.value("encoder", json()), ds.manifest.dim_encoder_text, where)};
      ds.prompts.push_back(std::move(p));
    }
    ++index;
  }
  validate(ds);
  return ds;
}

inline Dataset load_directory(const std::filesystem::path& dir) {
  auto j = read_json(dir / kManifestFile);
  Dataset ds;
  ds.manifest = parse_manifest(j);
  const auto& m = ds.manifest;
  if (!j.contains("records") || !j["records"].is_array()) {
    fail(ErrorCode::kCorruptManifest, "manifest: missing records array");
  }
  auto sel_bytes = read_bytes(dir / kSelectorFile);
  auto enc_bytes = read_bytes(dir / kEncoderFile);

  std::size_t n_audio = 0;
  for (const auto& r : j["records"]) {
    if (r.is_object() && r.value("kind", "") == "audio") ++n_audio;
  }

  auto read_row = [](const std::vector<char>& bytes, std::size_t offset, std::size_t dim,
                     const std::string& file, const std::string& where) {
    if (offset + dim * 4 > bytes.size()) {
      fail(ErrorCode::kTruncatedVectorFile, file + " holds " + std::to_string(bytes.size()) +
                                                " bytes, " + where + " needs " +
                                                std::to_string(offset + dim * 4));
    }
    std::vector<float> values(dim);
    for (std::size_t k = 0; k < dim; ++k) values[k] = read_f32_le(bytes.data() + offset + 4 * k);
    try {
      return EmbeddingVector(std::move(values));
    } catch (const Error& e) {
      fail(ErrorCode::kCorruptManifest, where + ": " + e.what());
    }
  };

  std::size_t index = 0;
  for (const auto& r : j["records"]) {
    auto h = parse_record_header(r, index);
    std::string where = "record '" + h.id + "'";
    auto sel_index = field<std::size_t>(r, "vec_index_selector", where);
    auto enc_index = field<std::size_t>(r, "vec_index_encoder", where);
    auto selector = read_row(sel_bytes, sel_index * m.dim_selector * 4, m.dim_selector,
                             kSelectorFile, where);
    if (h.is_audio) {
      if (enc_index >= n_audio) {
        fail(ErrorCode::kCorruptManifest, where + ": audio encoder row outside the audio block");
      }
      auto encoder = read_row(enc_bytes, enc_index * m.dim_encoder_audio * 4, m.dim_encoder_audio,
                              kEncoderFile, where);
      ds.audio.push_back({h.id, h.class_label, std::move(selector), std::move(encoder), h.truth});
    } else {
      if (enc_index < n_audio) {
        fail(ErrorCode::kCorruptManifest, where + ": text encoder row inside the audio block");
      }
      std::size_t offset = n_audio * m.dim_encoder_audio * 4 + (enc_index - n_audio) * m.dim_encoder_text * 4;
      auto target = read_row(enc_bytes, offset, m.dim_encoder_text, kEncoderFile, where);
      ds.prompts.push_back(
          {h.id, h.class_label, h.source, h.text, std::move(selector), std::move(target)});
    }
    ++index;
  }
  validate(ds);
  return ds;
}

}  // namespace archive_detail

/// Loads an archive directory, or a pure-JSON fixture when `path` is a file.
inline Dataset load_archive(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorCode::kIo, "archive not found: " + path.string());
  if (std::filesystem::is_directory(path)) return archive_detail::load_directory(path);
  return archive_detail::load_fixture(path);
}

/// Writes the binary archive directory (created if needed). Record order is
/// audio in dataset order, then prompts.
inline void save_archive(const Dataset& ds, const std::filesystem::path& dir) {
  using archive_detail::json;
  validate(ds);
  std::filesystem::create_directories(dir);
  std::vector<char> sel;
  std::vector<char> enc;
  json records = json::array();
  std::size_t row = 0;
  for (const auto& a : ds.audio) {
    auto r = archive_detail::record_header(a);
    r["vec_index_selector"] = row;
    r["vec_index_encoder"] = row;
    records.push_back(std::move(r));
    for (float x : a.selector_emb.values()) archive_detail::append_f32_le(sel, x);
    for (float x : a.encoder_emb.values()) archive_detail::append_f32_le(enc, x);
    ++row;
  }
  for (const auto& p : ds.prompts) {
    auto r = archive_detail::record_header(p);
    r["vec_index_selector"] = row;
    r["vec_index_encoder"] = row;
    records.push_back(std::move(r));
    for (float x : p.selector_emb.values()) archive_detail::append_f32_le(sel, x);
    for (float x : p.target_emb.values()) archive_detail::append_f32_le(enc, x);
    ++row;
  }
  auto manifest = archive_detail::manifest_json(ds.manifest);
  manifest["records"] = std::move(records);
  archive_detail::write_json(dir / archive_detail::kManifestFile, manifest);
  archive_detail::write_bytes(dir / archive_detail::kSelectorFile, sel);
  archive_detail::write_bytes(dir / archive_detail::kEncoderFile, enc);
}

/// Writes the inline-vector JSON fixture form.
inline void save_fixture(const Dataset& ds, const std::filesystem::path& file) {
  using archive_detail::json;
  validate(ds);
  auto j = archive_detail::manifest_json(ds.manifest);
  json records = json::array();
  for (const auto& a : ds.audio) {
    auto r = archive_detail::record_header(a);
    r["selector"] = archive_detail::vector_json(a.selector_emb);
    r["encoder"] = archive_detail::vector_json(a.encoder_emb);
    records.push_back(std::move(r));
  }
  for (const auto& p : ds.prompts) {
    auto r = archive_detail::record_header(p);
    r["selector"] = archive_detail::vector_json(p.selector_emb);
    r["encoder"] = archive_detail::vector_json(p.target_emb);
    records.push_back(std::move(r));
  }
  j["records"] = std::move(records);
  archive_detail::write_json(file, j);
}

/// Staged prompts: {"prompts": [{id?, class, source, text, selector?, target?}]}.
/// Embeddings may be missing; missing ids are generated as "<class>/<source>/<n>".
inline std::vector<PromptRecord> load_staged_prompts(const std::filesystem::path& file,
                                                     const Manifest& manifest) {
  using archive_detail::field;
  using archive_detail::json;
  auto j = archive_detail::read_json(file);
  if (!j.contains("prompts") || !j["prompts"].is_array()) {
    fail(ErrorCode::kCorruptManifest, file.string() + ": missing prompts array");
  }
  std::vector<PromptRecord> out;
  std::size_t n = 0;
  for (const auto& r : j["prompts"]) {
    std::string where = "staged prompt " + std::to_string(n);
    PromptRecord p;
    p.class_label = field<std::string>(r, "class", where);
    p.source = parse_prompt_source(field<std::string>(r, "source", where));
    p.text = field<std::string>(r, "text", where);
    p.id = r.value("id", p.class_label + "/" + std::string(to_string(p.source)) + "/" + std::to_string(n));
    if (r.contains("selector") && !r["selector"].is_null()) {
      p.selector_emb = archive_detail::vector_from_json(r["selector"], manifest.dim_selector, where);
    }
    if (r.contains("target") && !r["target"].is_null()) {
      p.target_emb = archive_detail::vector_from_json(r["target"], manifest.dim_encoder_text, where);
    }
    out.push_back(std::move(p));
    ++n;
  }
  return out;
}

}  // namespace catchphrase
