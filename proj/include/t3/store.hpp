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


// Run directories: training output, per-checkpoint artifacts, and verified
// loading.
//
//   <runs>/<run-id>/config.json       resolved RunConfig
//                   vocab.txt
//                   corpus.jsonl
//                   metrics.json      per-checkpoint training metrics
//                   datamap.json
//                   checkpoints/<epoch>/manifest.json
//                                       model.bin
//                                       example_stats.json
//                                       head_importance.json
//                                       agg_attention.bin
//                                       projection_layer<k>.json
//
// A checkpoint directory holding a ".incomplete" file is being written (or a
// write failed) and is never read.

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "t3/attribution.hpp"
#include "t3/dynamics.hpp"
#include "t3/error.hpp"
#include "t3/io.hpp"
#include "t3/model.hpp"
#include "t3/projection.hpp"
#include "t3/text.hpp"
#include "t3/train.hpp"

namespace t3 {

inline constexpr const char* kIncompleteMarker = ".incomplete";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kWeightsFile = "model.bin";
inline constexpr const char* kExampleStatsFile = "example_stats.json";
inline constexpr const char* kHeadImportanceFile = "head_importance.json";
inline constexpr const char* kAggAttentionFile = "agg_attention.bin";

inline std::string projection_file(std::size_t layer) {
  return "projection_layer" + std::to_string(layer) + ".json";
}

// ---------------------------------------------------------------------------
// Run configuration

struct ProjectionSettings {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  std::optional<std::uint64_t> seed;  // defaults to the model seed
  std::vector<std::size_t> layers;    // 1-based; empty means every layer
};

/// Everything that determines a run. vocab_size and n_classes in `model` are
/// derived from the corpus when zero.
struct RunConfig {
  ModelConfig model;
  TrainHyperparams train;
  std::size_t vocab_min_count = 1;
  std::size_t vocab_max_size = 30000;
  std::vector<std::string> labels;
  ProjectionSettings projection;
  std::size_t attention_size = kAggregateAttentionSize;

  std::vector<std::size_t> projection_layers() const {
    if (!projection.layers.empty()) return projection.layers;
    std::vector<std::size_t> all;
    for (std::size_t k = 1; k <= model.n_layers; ++k) all.push_back(k);
    return all;
  }

  TsneOptions tsne_options() const {
    TsneOptions o;
    o.perplexity = projection.perplexity;
    o.iterations = projection.iterations;
    o.seed = projection.seed.value_or(model.seed);
    return o;
  }

  std::size_t attention_window() const { return std::min(attention_size, model.max_seq_len); }
};

inline nlohmann::json to_json(const RunConfig& rc) {
  nlohmann::json proj{{"perplexity", rc.projection.perplexity},
                      {"iterations", rc.projection.iterations},
                      {"seed", rc.projection.seed.value_or(rc.model.seed)},
                      {"layers", rc.projection_layers()}};
  return {{"model", to_json(rc.model)},
          {"train",
           {{"epochs", rc.train.epochs},
            {"batch_size", rc.train.batch_size},
            {"learning_rate", rc.train.learning_rate},
            {"seed", rc.train.seed}}},
          {"vocab", {{"min_count", rc.vocab_min_count}, {"max_size", rc.vocab_max_size}}},
          {"labels", rc.labels},
          {"projection", proj},
          {"attention_size", rc.attention_size}};
}

/// Parses a run config. Unknown keys are rejected; `kind` selects the error
/// category (config errors for user files, integrity errors for stored runs).
inline RunConfig run_config_from_json(const nlohmann::json& j, ErrorKind kind = ErrorKind::kConfig) {
  reject_unknown_keys(j, {"model", "train", "vocab", "labels", "projection", "attention_size"}, kind, "run config");
  require(j.contains("model"), kind, "run config needs a 'model' section");
  RunConfig rc;
  rc.model = model_config_from_json(j.at("model"), kind, false);
  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown_keys(t, {"epochs", "batch_size", "learning_rate", "seed"}, kind, "train section");
    read_field(t, "epochs", rc.train.epochs, kind, false);
    read_field(t, "batch_size", rc.train.batch_size, kind, false);
    read_field(t, "learning_rate", rc.train.learning_rate, kind, false);
    read_field(t, "seed", rc.train.seed, kind, false);
  }
  if (j.contains("vocab")) {
    const auto& v = j.at("vocab");
    reject_unknown_keys(v, {"min_count", "max_size"}, kind, "vocab section");
    read_field(v, "min_count", rc.vocab_min_count, kind, false);
    read_field(v, "max_size", rc.vocab_max_size, kind, false);
  }
  read_field(j, "labels", rc.labels, kind, false);
  if (j.contains("projection")) {
    const auto& p = j.at("projection");
    reject_unknown_keys(p, {"perplexity", "iterations", "seed", "layers"}, kind, "projection section");
    read_field(p, "perplexity", rc.projection.perplexity, kind, false);
    read_field(p, "iterations", rc.projection.iterations, kind, false);
    if (p.contains("seed")) {
      std::uint64_t s = 0;
      read_field(p, "seed", s, kind, true);
      rc.projection.seed = s;
    }
    read_field(p, "layers", rc.projection.layers, kind, false);
  }
  read_field(j, "attention_size", rc.attention_size, kind, false);

  require(rc.vocab_max_size >= 3, kind, "vocab.max_size must be >= 3");
  require(rc.attention_size >= 1, kind, "attention_size must be >= 1");
  require(rc.projection.perplexity > 0, kind, "projection.perplexity must be positive");
  for (auto k : rc.projection.layers)
    require(k >= 1 && k <= rc.model.n_layers, kind,
            "projection layer " + std::to_string(k) + " outside [1, " + std::to_string(rc.model.n_layers) + "]");
  return rc;
}

inline RunConfig load_run_config_file(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error&) {
    fail(ErrorKind::kConfig, "cannot read config file '" + path.string() + "'");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kConfig, "config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, ErrorKind::kConfig);
}

/// Fills the corpus-derived fields and validates the result.
inline RunConfig resolve_run_config(RunConfig rc, const Corpus& corpus, const Vocabulary& vocab) {
  if (rc.labels.empty()) rc.labels = corpus.label_names;
  require(rc.labels.size() >= 1, ErrorKind::kConfig, "no class labels: corpus is empty and config lists none");
  if (rc.model.n_classes == 0) rc.model.n_classes = rc.labels.size();
  require(rc.model.n_classes == rc.labels.size(), ErrorKind::kConfig,
          "model.n_classes (" + std::to_string(rc.model.n_classes) + ") disagrees with " +
              std::to_string(rc.labels.size()) + " labels");
  if (rc.model.vocab_size == 0) rc.model.vocab_size = vocab.size();
  require(rc.model.vocab_size == vocab.size(), ErrorKind::kConfig,
          "model.vocab_size (" + std::to_string(rc.model.vocab_size) + ") disagrees with built vocabulary (" +
              std::to_string(vocab.size()) + ")");
  rc.model.validate();
  for (auto k : rc.projection.layers)
    require(k >= 1 && k <= rc.model.n_layers, ErrorKind::kConfig,
            "projection layer " + std::to_string(k) + " outside [1, " + std::to_string(rc.model.n_layers) + "]");
  return rc;
}

inline std::vector<IdentifiedExample> encode_corpus(const Corpus& corpus, const Vocabulary& vocab,
                                                    std::size_t max_seq_len) {
  std::vector<IdentifiedExample> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus.examples)
    out.push_back({ex.id, {vocab.encode(ex.text, max_seq_len), ex.label}});
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestFile {
  std::string name;
  std::size_t bytes = 0;
  std::string sha256;
};

struct Manifest {
  ModelConfig config;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::vector<ManifestFile> files;

  bool lists(const std::string& name) const {
    return std::any_of(files.begin(), files.end(), [&](const auto& f) { return f.name == name; });
  }
  /// True once precompute has written the analysis artifacts.
  bool precomputed() const { return lists(kHeadImportanceFile); }
  std::vector<std::size_t> projection_layers() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 1; k <= config.n_layers; ++k)
      if (lists(projection_file(k))) out.push_back(k);
    return out;
  }
};

inline nlohmann::json to_json(const Manifest& m) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& f : m.files) files.push_back({{"name", f.name}, {"bytes", f.bytes}, {"sha256", f.sha256}});
  return {{"config", to_json(m.config)}, {"seed", m.seed}, {"epoch", m.epoch}, {"files", files}};
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  const auto kind = ErrorKind::kIntegrity;
  reject_unknown_keys(j, {"config", "seed", "epoch", "files"}, kind, "manifest");
  Manifest m;
  require(j.contains("config"), kind, "manifest lacks 'config'");
  m.config = model_config_from_json(j.at("config"));
  read_field(j, "seed", m.seed, kind, true);
  read_field(j, "epoch", m.epoch, kind, true);
  require(j.contains("files") && j.at("files").is_array(), kind, "manifest lacks 'files'");
  for (const auto& f : j.at("files")) {
    ManifestFile mf;
    read_field(f, "name", mf.name, kind, true);
    read_field(f, "bytes", mf.bytes, kind, true);
    read_field(f, "sha256", mf.sha256, kind, true);
    m.files.push_back(std::move(mf));
  }
  return m;
}

/// Reads the manifest and every listed file, verifying sizes and digests.
/// Returns file contents keyed by name.
inline std::pair<Manifest, std::map<std::string, std::string>> read_verified(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorKind::kNotFound, "checkpoint directory '" + dir.string() + "' does not exist");
  require(!fs::exists(dir / kIncompleteMarker), ErrorKind::kState,
          "checkpoint '" + dir.string() + "' is incomplete (a write is in progress or failed)");
  require(fs::exists(dir / kManifestFile), ErrorKind::kState, "checkpoint '" + dir.string() + "' has no manifest");
  Manifest m = manifest_from_json(parse_json(read_file(dir / kManifestFile), "manifest.json"));
  std::map<std::string, std::string> contents;
  for (const auto& f : m.files) {
    require(f.name.find('/') == std::string::npos && f.name != "..", ErrorKind::kIntegrity,
            "manifest lists an invalid file name '" + f.name + "'");
    require(fs::exists(dir / f.name), ErrorKind::kIntegrity, "manifest lists missing file '" + f.name + "'");
    std::string bytes = read_file(dir / f.name);
    require(bytes.size() == f.bytes, ErrorKind::kIntegrity,
            "size mismatch for '" + f.name + "': manifest says " + std::to_string(f.bytes) + ", found " +
                std::to_string(bytes.size()));
    require(sha256_hex(bytes) == f.sha256, ErrorKind::kIntegrity, "digest mismatch for '" + f.name + "'");
    contents.emplace(f.name, std::move(bytes));
  }
  return {std::move(m), std::move(contents)};
}

/// Writes `files` and a manifest listing them, bracketed by the marker.
inline void write_checkpoint_dir(const fs::path& dir, const ModelConfig& config, std::uint64_t seed, std::size_t epoch,
                                 const std::vector<std::pair<std::string, std::string>>& files) {
  fs::create_directories(dir);
  write_file(dir / kIncompleteMarker, "");
  Manifest m{config, seed, epoch, {}};
  for (const auto& [name, bytes] : files) {
    write_file(dir / name, bytes);
    m.files.push_back({name, bytes.size(), sha256_hex(bytes)});
  }
  write_file(dir / kManifestFile, dump_json(to_json(m)));
  fs::remove(dir / kIncompleteMarker);
}

// ---------------------------------------------------------------------------
// Artifact encodings

inline nlohmann::json example_stats_json(std::size_t epoch, const std::vector<IdentifiedExample>& corpus,
                                         const std::vector<ExampleStats>& stats) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const auto& s = stats[i];
    rows.push_back({{"id", s.id},
                    {"label", corpus[i].example.label},
                    {"prediction", s.predicted},
                    {"loss", s.loss},
                    {"p_gold", s.p_gold},
                    {"confidence", s.confidence},
                    {"correct", s.correct}});
  }
  return {{"epoch", epoch}, {"examples", rows}};
}

inline std::vector<ExampleStats> example_stats_from_json(const nlohmann::json& j) {
  std::vector<ExampleStats> out;
  for (const auto& r : j.at("examples")) {
    ExampleStats s;
    s.id = r.at("id").get<std::string>();
    s.loss = r.at("loss").get<double>();
    s.p_gold = r.at("p_gold").get<double>();
    s.predicted = r.at("prediction").get<std::size_t>();
    s.confidence = r.at("confidence").get<double>();
    s.correct = r.at("correct").get<bool>();
    out.push_back(std::move(s));
  }
  return out;
}

inline nlohmann::json matrix_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Mat matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j[0].size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    require(static_cast<Eigen::Index>(j[r].size()) == cols, ErrorKind::kIntegrity, "ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline nlohmann::json head_importance_json(std::size_t epoch, const HeadImportanceGrid& g, const std::string& split) {
  return {{"epoch", epoch},
          {"scope", g.scope == ImportanceScope::kAggregate ? "aggregate" : "instance"},
          {"split", split},
          {"example_count", g.example_count},
          {"raw", matrix_json(g.raw)},
          {"normalized", matrix_json(g.normalized)}};
}

inline constexpr char kAggAttentionMagic[4] = {'T', '3', 'A', 'A'};

/// "T3AA", u32 version, u32 n_layers, n_heads, size, float32 means, u32 counts.
inline std::string encode_agg_attention(const AggregateAttentionGrid& g) {
  std::string out(kAggAttentionMagic, 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(g.n_layers));
  put_u32(out, static_cast<std::uint32_t>(g.n_heads));
  put_u32(out, static_cast<std::uint32_t>(g.size));
  for (double v : g.means) put_f32(out, v);
  for (auto c : g.counts) put_u32(out, c);
  return out;
}

inline AggregateAttentionGrid decode_agg_attention(std::string_view in) {
  auto corrupt = [](const std::string& why) { fail(ErrorKind::kIntegrity, "agg_attention.bin: " + why); };
  if (in.size() < 20 || in.substr(0, 4) != std::string_view(kAggAttentionMagic, 4)) corrupt("bad magic");
  if (get_u32(in, 4) != 1) corrupt("unsupported version");
  AggregateAttentionGrid g;
  g.n_layers = get_u32(in, 8);
  g.n_heads = get_u32(in, 12);
  g.size = get_u32(in, 16);
  const std::size_t cells = g.size * g.size;
  const std::size_t values = g.n_layers * g.n_heads * cells;
  if (in.size() != 20 + 4 * values + 4 * cells) corrupt("size does not match header");
  g.means.resize(values);
  g.counts.resize(cells);
  for (std::size_t i = 0; i < values; ++i) g.means[i] = get_f32(in, 20 + 4 * i);
  for (std::size_t i = 0; i < cells; ++i) g.counts[i] = get_u32(in, 20 + 4 * values + 4 * i);
  return g;
}

struct LayerProjection {
  std::size_t layer = 0;
  ProjectionCoords coords;
  std::vector<std::string> ids;
};

inline nlohmann::json projection_json(std::size_t epoch, const LayerProjection& lp) {
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < lp.ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    points.push_back({{"id", lp.ids[i]}, {"x", lp.coords.coords(r, 0)}, {"y", lp.coords.coords(r, 1)}});
  }
  return {{"epoch", epoch},
          {"layer", lp.layer},
          {"method", "tsne"},
          {"perplexity", lp.coords.perplexity},
          {"iterations", lp.coords.iterations},
          {"seed", lp.coords.seed},
          {"kl_initial", lp.coords.kl_initial},
          {"kl_final", lp.coords.kl_final},
          {"points", points}};
}

inline LayerProjection projection_from_json(const nlohmann::json& j) {
  LayerProjection lp;
  lp.layer = j.at("layer").get<std::size_t>();
  lp.coords.perplexity = j.at("perplexity").get<double>();
  lp.coords.iterations = j.at("iterations").get<std::size_t>();
  lp.coords.seed = j.at("seed").get<std::uint64_t>();
  lp.coords.kl_initial = j.at("kl_initial").get<double>();
  lp.coords.kl_final = j.at("kl_final").get<double>();
  const auto& pts = j.at("points");
  lp.coords.coords.resize(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    lp.ids.push_back(pts[i].at("id").get<std::string>());
    lp.coords.coords(static_cast<Eigen::Index>(i), 0) = pts[i].at("x").get<double>();
    lp.coords.coords(static_cast<Eigen::Index>(i), 1) = pts[i].at("y").get<double>();
  }
  return lp;
}

inline nlohmann::json datamap_json(const std::vector<std::size_t>& epochs, const std::vector<DataMapRecord>& records) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : records)
    rows.push_back({{"id", r.id},
                    {"confidence", r.confidence},
                    {"variability", r.variability},
                    {"correctness", r.correctness}});
  return {{"epochs", epochs}, {"records", rows}};
}

inline std::vector<DataMapRecord> datamap_from_json(const nlohmann::json& j) {
  std::vector<DataMapRecord> out;
  for (const auto& r : j.at("records"))
    out.push_back({r.at("id").get<std::string>(), r.at("confidence").get<double>(),
                   r.at("variability").get<double>(), r.at("correctness").get<double>()});
  return out;
}

// ---------------------------------------------------------------------------
// Precompute

/// Examples scored for aggregate head importance: the validation split when
/// the corpus has one, otherwise every example.
inline std::pair<std::vector<LabeledSequence>, std::string> importance_examples(
    const Corpus& corpus, const std::vector<IdentifiedExample>& encoded) {
  std::vector<LabeledSequence> val, all;
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    all.push_back(encoded[i].example);
    if (corpus.examples[i].split == "validation") val.push_back(encoded[i].example);
  }
  if (!val.empty()) return {std::move(val), "validation"};
  return {std::move(all), "all"};
}

struct CheckpointArtifacts {
  std::size_t epoch = 0;
  std::vector<ExampleStats> stats;
  HeadImportanceGrid importance;
  std::string importance_split;
  AggregateAttentionGrid attention;
  std::vector<LayerProjection> projections;
};

/// Computes every analysis artifact for one checkpoint's parameters.
inline CheckpointArtifacts compute_checkpoint_artifacts(const TransformerParameters& p, std::size_t epoch,
                                                        const Corpus& corpus,
                                                        const std::vector<IdentifiedExample>& encoded,
                                                        const RunConfig& rc) {
  require(!encoded.empty(), ErrorKind::kInput, "cannot precompute artifacts for an empty corpus");
  CheckpointArtifacts a;
  a.epoch = epoch;
  a.stats = checkpoint_example_stats(p, encoded);
  auto [examples, split] = importance_examples(corpus, encoded);
  a.importance = head_importance(p, examples, ImportanceScope::kAggregate);
  a.importance_split = split;

  const auto& c = p.config;
  const HeadMask mask = HeadMask::all_active(c);
  AttentionAccumulator acc(c.n_layers, c.n_heads, rc.attention_window());
  const auto layers = rc.projection_layers();
  std::vector<Mat> hidden(layers.size(), Mat(static_cast<Eigen::Index>(encoded.size()), c.d_model));
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    const ForwardTrace t = forward(p, encoded[i].example.tokens, mask, false);
    acc.add(t);
    for (std::size_t k = 0; k < layers.size(); ++k)
      hidden[k].row(static_cast<Eigen::Index>(i)) = t.pooled_per_layer[layers[k] - 1];
  }
  a.attention = acc.finish();

  std::vector<std::string> ids;
  for (const auto& ex : encoded) ids.push_back(ex.id);
  for (std::size_t k = 0; k < layers.size(); ++k)
    a.projections.push_back({layers[k], tsne(hidden[k], rc.tsne_options()), ids});
  return a;
}

struct RunPaths {
  fs::path root;

  fs::path config() const { return root / "config.json"; }
  fs::path vocab() const { return root / "vocab.txt"; }
  fs::path corpus() const { return root / "corpus.jsonl"; }
  fs::path metrics() const { return root / "metrics.json"; }
  fs::path datamap() const { return root / "datamap.json"; }
  fs::path checkpoints() const { return root / "checkpoints"; }
  fs::path checkpoint(std::size_t epoch) const { return checkpoints() / std::to_string(epoch); }
};

/// Epochs with a checkpoint directory, ascending.
inline std::vector<std::size_t> checkpoint_epochs(const RunPaths& run) {
  std::vector<std::size_t> out;
  if (!fs::is_directory(run.checkpoints())) return out;
  for (const auto& e : fs::directory_iterator(run.checkpoints())) {
    if (!e.is_directory()) continue;
    const auto name = e.path().filename().string();
    if (name.empty() || !std::all_of(name.begin(), name.end(), [](char ch) { return ch >= '0' && ch <= '9'; }))
      continue;
    out.push_back(std::stoull(name));
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Everything stored at the run level.
struct RunData {
  std::string id;
  RunPaths paths;
  RunConfig config;
  Vocabulary vocab;
  Corpus corpus;
  std::vector<IdentifiedExample> encoded;
  std::vector<DataMapRecord> datamap;
  nlohmann::json metrics;
};

inline RunData load_run(const fs::path& runs_root, const std::string& run_id) {
  require(!run_id.empty() && run_id.find('/') == std::string::npos && run_id != "." && run_id != "..",
          ErrorKind::kInput, "invalid run id '" + run_id + "'");
  RunData r;
  r.id = run_id;
  r.paths = RunPaths{runs_root / run_id};
  require(fs::exists(r.paths.config()), ErrorKind::kNotFound, "unknown run '" + run_id + "'");
  r.config = run_config_from_json(parse_json(read_file(r.paths.config()), "config.json"), ErrorKind::kIntegrity);
  r.vocab = Vocabulary::parse(read_file(r.paths.vocab()));
  std::istringstream corpus_in(read_file(r.paths.corpus()));
  r.corpus = parse_corpus(corpus_in, r.config.labels);
  r.encoded = encode_corpus(r.corpus, r.vocab, r.config.model.max_seq_len);
  if (fs::exists(r.paths.datamap())) r.datamap = datamap_from_json(parse_json(read_file(r.paths.datamap()), "datamap.json"));
  if (fs::exists(r.paths.metrics())) r.metrics = parse_json(read_file(r.paths.metrics()), "metrics.json");
  return r;
}

struct PrecomputeOptions {
  bool force = false;
  std::vector<std::size_t> layers;  // overrides the run config when nonempty
};

enum class PrecomputeOutcome { kWritten, kSkipped };

/// Writes the analysis artifacts of one checkpoint. A checkpoint that is
/// already complete is left untouched unless `force` is set; a rerun writes
/// byte-identical files.
inline PrecomputeOutcome precompute_checkpoint(const RunData& run, std::size_t epoch,
                                               const PrecomputeOptions& opts = {}) {
  const fs::path dir = run.paths.checkpoint(epoch);
  require(fs::exists(dir / kWeightsFile), ErrorKind::kState,
          "checkpoint " + std::to_string(epoch) + " of run '" + run.id + "' has no weights");
  const bool interrupted = fs::exists(dir / kIncompleteMarker);
  require(interrupted || fs::exists(dir / kManifestFile), ErrorKind::kState,
          "checkpoint " + std::to_string(epoch) + " has weights but no manifest");

  RunConfig rc = run.config;
  if (!opts.layers.empty()) rc.projection.layers = opts.layers;
  for (auto k : rc.projection.layers)
    require(k >= 1 && k <= rc.model.n_layers, ErrorKind::kInput,
            "projection layer " + std::to_string(k) + " outside [1, " + std::to_string(rc.model.n_layers) + "]");

  std::string weights;
  if (!interrupted) {
    auto [manifest, files] = read_verified(dir);
    if (manifest.precomputed() && !opts.force) return PrecomputeOutcome::kSkipped;
    weights = files.at(kWeightsFile);
  } else {
    // A failed write leaves no trustworthy manifest; fall back to the raw file.
    weights = read_file(dir / kWeightsFile);
  }
  const TransformerParameters p = load_weights(weights);
  require(p.config == rc.model, ErrorKind::kIntegrity,
          "checkpoint " + std::to_string(epoch) + " weights do not match the run config");

  write_file(dir / kIncompleteMarker, "");
  const CheckpointArtifacts a = compute_checkpoint_artifacts(p, epoch, run.corpus, run.encoded, rc);
  std::vector<std::pair<std::string, std::string>> files{
      {kWeightsFile, weights},
      {kExampleStatsFile, dump_json(example_stats_json(epoch, run.encoded, a.stats))},
      {kHeadImportanceFile, dump_json(head_importance_json(epoch, a.importance, a.importance_split))},
      {kAggAttentionFile, encode_agg_attention(a.attention)}};
  for (const auto& lp : a.projections) files.emplace_back(projection_file(lp.layer), dump_json(projection_json(epoch, lp)));
  // Stale projections of layers no longer requested would otherwise linger.
  for (std::size_t k = 1; k <= rc.model.n_layers; ++k) {
    const bool requested = std::any_of(a.projections.begin(), a.projections.end(), [&](const auto& lp) { return lp.layer == k; });
    if (!requested) fs::remove(dir / projection_file(k));
  }
  write_checkpoint_dir(dir, p.config, p.config.seed, epoch, files);
  return PrecomputeOutcome::kWritten;
}

// ---------------------------------------------------------------------------
// Training into a run directory

struct TrainSummary {
  std::string run_id;
  fs::path dir;
  RunConfig config;
  std::vector<std::size_t> epochs;
  double final_train_accuracy = 0.0;
};

/// Builds the vocabulary, trains, and writes the run directory with one
/// weights-only checkpoint per epoch (plus the initial parameters).
inline TrainSummary train_to_run(const RunConfig& raw_config, const Corpus& corpus, const fs::path& runs_root,
                                 const std::string& run_id, bool overwrite = false) {
  require(!run_id.empty() && run_id.find('/') == std::string::npos && run_id != "." && run_id != "..",
          ErrorKind::kInput, "invalid run id '" + run_id + "'");
  require(!corpus.examples.empty(), ErrorKind::kInput, "training corpus is empty");
  const Vocabulary vocab = build_vocab(corpus, raw_config.vocab_min_count, raw_config.vocab_max_size);
  const RunConfig rc = resolve_run_config(raw_config, corpus, vocab);
  for (const auto& ex : corpus.examples)
    require(ex.label < rc.model.n_classes, ErrorKind::kInput,
            "example '" + ex.id + "' has label " + std::to_string(ex.label) + " >= n_classes");

  RunPaths paths{runs_root / run_id};
  if (fs::exists(paths.root)) {
    require(overwrite, ErrorKind::kState, "run directory '" + paths.root.string() + "' already exists");
    fs::remove_all(paths.root);
  }
  fs::create_directories(paths.checkpoints());
  write_file(paths.config(), dump_json(to_json(rc)));
  write_file(paths.vocab(), vocab.serialize());
  write_file(paths.corpus(), serialize_corpus(corpus));

  const auto encoded = encode_corpus(corpus, vocab, rc.model.max_seq_len);
  std::vector<IdentifiedExample> train_set, held_out;
  std::vector<bool> is_train;
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    const bool t = corpus.examples[i].split == "train";
    is_train.push_back(t);
    (t ? train_set : held_out).push_back(encoded[i]);
  }
  require(!train_set.empty(), ErrorKind::kInput, "corpus has no training-split examples");

  TrainSummary summary{run_id, paths.root, rc, {}, 0.0};
  std::vector<EpochRecord> records;
  nlohmann::json metrics = nlohmann::json::array();
  train_run(rc.model, train_set, rc.train, [&](const CheckpointEvent& ev) {
    write_checkpoint_dir(paths.checkpoint(ev.epoch), rc.model, rc.model.seed, ev.epoch,
                         {{kWeightsFile, save_weights(ev.params)}});
    // Data Map statistics cover every example, in corpus order.
    const auto held = checkpoint_example_stats(ev.params, held_out);
    EpochRecord rec{ev.epoch, {}};
    std::size_t ti = 0, hi = 0;
    for (std::size_t i = 0; i < encoded.size(); ++i) rec.examples.push_back(is_train[i] ? ev.stats[ti++] : held[hi++]);
    if (ev.epoch > 0 || rc.train.epochs == 0) records.push_back(std::move(rec));
    metrics.push_back({{"epoch", ev.epoch}, {"train_accuracy", ev.accuracy()}, {"mean_train_loss", ev.mean_train_loss}});
    summary.epochs.push_back(ev.epoch);
    summary.final_train_accuracy = ev.accuracy();
  });

  std::vector<std::size_t> epochs;
  for (const auto& r : records) epochs.push_back(r.epoch);
  write_file(paths.datamap(), dump_json(datamap_json(epochs, compute_datamap(records))));
  write_file(paths.metrics(), dump_json(nlohmann::json{{"checkpoints", metrics}}));
  return summary;
}

// ---------------------------------------------------------------------------
// Loading precomputed checkpoints

struct LoadedCheckpoint {
  Manifest manifest;
  TransformerParameters params;
  std::vector<ExampleStats> stats;
  nlohmann::json head_importance;
  AggregateAttentionGrid attention;
  std::map<std::size_t, LayerProjection> projections;
};

inline LoadedCheckpoint load_checkpoint(const RunData& run, std::size_t epoch) {
  const fs::path dir = run.paths.checkpoint(epoch);
  require(fs::is_directory(dir), ErrorKind::kNotFound,
          "run '" + run.id + "' has no checkpoint for epoch " + std::to_string(epoch));
  auto [manifest, files] = read_verified(dir);
  require(manifest.precomputed(), ErrorKind::kState,
          "checkpoint " + std::to_string(epoch) + " of run '" + run.id + "' has not been precomputed");
  LoadedCheckpoint c{manifest, load_weights(files.at(kWeightsFile)), {}, {}, {}, {}};
  require(c.params.config == run.config.model, ErrorKind::kIntegrity, "checkpoint config does not match the run");
  c.stats = example_stats_from_json(parse_json(files.at(kExampleStatsFile), kExampleStatsFile));
  require(c.stats.size() == run.encoded.size(), ErrorKind::kIntegrity, "example_stats.json does not cover the corpus");
  c.head_importance = parse_json(files.at(kHeadImportanceFile), kHeadImportanceFile);
  c.attention = decode_agg_attention(files.at(kAggAttentionFile));
  for (auto k : manifest.projection_layers())
    c.projections.emplace(k, projection_from_json(parse_json(files.at(projection_file(k)), projection_file(k))));
  return c;
}

/// Name -> sha256 for every file of every checkpoint plus the run-level
/// files, for comparing reruns.
inline std::map<std::string, std::string> run_digests(const fs::path& run_dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(run_dir)) {
    if (!e.is_regular_file()) continue;
    out.emplace(fs::relative(e.path(), run_dir).generic_string(), sha256_hex(read_file(e.path())));
  }
  return out;
}

}  // namespace t3
