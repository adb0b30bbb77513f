/* Copyright 2026 The T3 Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


// Byte-level IO: digests, little-endian packing, and the weights file format.
//
// model.bin layout:
//   u64 LE   header length H
//   H bytes  JSON header {"format","config","arrays":[{"name","shape","offset","bytes"}]}
//   blob     little-endian float32, row-major, arrays concatenated in header order
// Offsets are relative to the start of the blob.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>

#include "t3/error.hpp"
#include "t3/model.hpp"

namespace t3 {

namespace fs = std::filesystem;

inline std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    fail(ErrorKind::kIntegrity, "sha256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kNotFound, "cannot read '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kState, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  require(!out.fail(), ErrorKind::kState, "short write to '" + path.string() + "'");
}

/// Pretty JSON with a trailing newline, the on-disk form of every JSON artifact.
inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline nlohmann::json parse_json(std::string_view text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kIntegrity, what + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Little-endian packing

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::string& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

inline std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

inline std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

inline double get_f32(std::string_view in, std::size_t at) {
  return static_cast<double>(std::bit_cast<float>(get_u32(in, at)));
}

// ---------------------------------------------------------------------------
// Model config JSON

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"d_model", c.d_model},         {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},       {"d_ff", c.d_ff},               {"max_seq_len", c.max_seq_len},
          {"n_classes", c.n_classes},   {"seed", c.seed}};
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& into, ErrorKind kind, bool required) {
  if (!j.contains(key)) {
    require(!required, kind, std::string("missing field '") + key + "'");
    return;
  }
  try {
    into = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(kind, std::string("field '") + key + "' has the wrong type");
  }
}

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                                ErrorKind kind, const std::string& where) {
  require(j.is_object(), kind, where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    require(ok, kind, "unknown field '" + key + "' in " + where);
  }
}

inline ModelConfig model_config_from_json(const nlohmann::json& j, ErrorKind kind = ErrorKind::kIntegrity,
                                          bool require_all = true) {
  reject_unknown_keys(j, {"vocab_size", "d_model", "n_layers", "n_heads", "d_ff", "max_seq_len", "n_classes", "seed"},
                      kind, "model config");
  ModelConfig c;
  read_field(j, "vocab_size", c.vocab_size, kind, require_all);
  read_field(j, "d_model", c.d_model, kind, true);
  read_field(j, "n_layers", c.n_layers, kind, true);
  read_field(j, "n_heads", c.n_heads, kind, true);
  read_field(j, "d_ff", c.d_ff, kind, true);
  read_field(j, "max_seq_len", c.max_seq_len, kind, true);
  read_field(j, "n_classes", c.n_classes, kind, require_all);
  read_field(j, "seed", c.seed, kind, require_all);
  return c;
}

// ---------------------------------------------------------------------------
// Weights file

inline constexpr const char* kWeightsFormat = "t3-weights-v1";

inline std::string save_weights(const TransformerParameters& p) {
  nlohmann::json arrays = nlohmann::json::array();
  std::string blob;
  TransformerParameters::visit(p, [&](const std::string& name, const auto& a) {
    const std::size_t offset = blob.size();
    const auto* data = a.data();
    for (Eigen::Index i = 0; i < a.size(); ++i) put_f32(blob, data[i]);
    nlohmann::json shape = nlohmann::json::array({a.rows(), a.cols()});
    if constexpr (std::decay_t<decltype(a)>::IsVectorAtCompileTime) shape = nlohmann::json::array({a.size()});
    arrays.push_back({{"name", name}, {"shape", shape}, {"offset", offset}, {"bytes", blob.size() - offset}});
  });
  const nlohmann::json header{{"format", kWeightsFormat}, {"config", to_json(p.config)}, {"arrays", arrays}};
  const std::string h = header.dump();
  std::string out;
  out.reserve(8 + h.size() + blob.size());
  put_u64(out, h.size());
  out += h;
  out += blob;
  return out;
}

inline TransformerParameters load_weights(std::string_view bytes) {
  auto corrupt = [](const std::string& why) { fail(ErrorKind::kIntegrity, "weights file: " + why); };
  if (bytes.size() < 8) corrupt("truncated header length");
  const std::uint64_t hlen = get_u64(bytes, 0);
  if (hlen > bytes.size() - 8) corrupt("header length exceeds file size");
  const nlohmann::json header = parse_json(bytes.substr(8, hlen), "weights header");
  if (header.value("format", "") != kWeightsFormat) corrupt("unrecognized format tag");
  const ModelConfig cfg = model_config_from_json(header.at("config"));
  try {
    cfg.validate();
  } catch (const Error& e) {
    corrupt(e.what());
  }
  const std::string_view blob = bytes.substr(8 + hlen);

  TransformerParameters p = init_model(cfg);
  const auto& arrays = header.at("arrays");
  if (!arrays.is_array()) corrupt("'arrays' is not a list");
  std::size_t index = 0;
  std::size_t expected_offset = 0;
  TransformerParameters::visit(p, [&](const std::string& name, auto& a) {
    if (index >= arrays.size()) corrupt("missing array '" + name + "'");
    const auto& entry = arrays[index++];
    if (entry.value("name", "") != name) corrupt("expected array '" + name + "' at position " + std::to_string(index - 1));
    std::size_t elements = 1;
    for (const auto& d : entry.at("shape")) elements *= d.get<std::size_t>();
    if (elements != static_cast<std::size_t>(a.size())) corrupt("shape mismatch for '" + name + "'");
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto nbytes = entry.at("bytes").get<std::size_t>();
    if (offset != expected_offset || nbytes != 4 * elements) corrupt("bad offset or size for '" + name + "'");
    if (offset + nbytes > blob.size()) corrupt("blob too short for '" + name + "'");
    auto* data = a.data();
    for (std::size_t i = 0; i < elements; ++i) data[i] = get_f32(blob, offset + 4 * i);
    expected_offset = offset + nbytes;
  });
  if (index != arrays.size()) corrupt("unexpected extra arrays");
  if (expected_offset != blob.size()) corrupt("trailing bytes after blob");
  return p;
}

/// Rounds every parameter to float32, the precision stored on disk.
inline TransformerParameters round_to_storage(TransformerParameters p) {
  TransformerParameters::visit(p, [](const std::string&, auto& a) {
    auto* data = a.data();
    for (Eigen::Index i = 0; i < a.size(); ++i) data[i] = static_cast<double>(static_cast<float>(data[i]));
  });
  return p;
}

}  // namespace t3
