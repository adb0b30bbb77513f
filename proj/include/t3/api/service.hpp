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


// Transport-independent API handlers. Each handler returns the JSON body of
// a successful response or throws t3::Error; error_response() maps errors to
// HTTP status codes.

#pragma once

#include <charconv>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "t3/api/filter.hpp"
#include "t3/api/sessions.hpp"
#include "t3/attribution.hpp"
#include "t3/store.hpp"

namespace t3::api {

using json = nlohmann::json;
using Query = std::multimap<std::string, std::string>;

struct ServiceOptions {
  fs::path runs_root;
  std::chrono::seconds session_idle{30 * 60};
  std::size_t max_sessions = 256;
  std::size_t live_slots = 2;
  // Estimated floating-point operations allowed for one live request.
  double compute_budget = 5e9;
};

struct ErrorResponse {
  int status = 500;
  json body;
  bool retriable = false;
};

inline int http_status(ErrorKind k) {
  switch (k) {
    case ErrorKind::kConfig:
    case ErrorKind::kInput:
    case ErrorKind::kIngest: return 400;
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kState: return 409;
    case ErrorKind::kGone: return 410;
    case ErrorKind::kBudget: return 503;
    case ErrorKind::kTraining:
    case ErrorKind::kIntegrity: return 500;
  }
  return 500;
}

inline ErrorResponse error_response(const Error& e) {
  const bool retriable = e.kind() == ErrorKind::kBudget;
  return {http_status(e.kind()),
          {{"error", {{"code", e.code()}, {"message", e.what()}, {"retriable", retriable}}}},
          retriable};
}

// ---------------------------------------------------------------------------
// Query helpers

inline std::optional<std::string> query_value(const Query& q, const std::string& key) {
  const auto it = q.find(key);
  if (it == q.end()) return std::nullopt;
  return it->second;
}

inline std::size_t parse_index(const std::string& text, const std::string& name) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  require(!text.empty() && ec == std::errc() && ptr == end, ErrorKind::kInput,
          "parameter '" + name + "' must be a non-negative integer, got '" + text + "'");
  return v;
}

inline std::optional<std::size_t> query_index(const Query& q, const std::string& key) {
  const auto v = query_value(q, key);
  if (!v) return std::nullopt;
  return parse_index(*v, key);
}

inline std::string query_choice(const Query& q, const std::string& key, const std::vector<std::string>& options) {
  const auto v = query_value(q, key).value_or(options.front());
  if (std::find(options.begin(), options.end(), v) == options.end()) {
    std::string list;
    for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
    fail(ErrorKind::kInput, "parameter '" + key + "' must be one of: " + list + " (got '" + v + "')");
  }
  return v;
}

inline json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    json j = json::parse(body);
    require(j.is_object(), ErrorKind::kInput, "request body must be a JSON object");
    return j;
  } catch (const json::exception&) {
    fail(ErrorKind::kInput, "request body is not valid JSON");
  }
}

template <typename T>
T body_field(const json& body, const std::string& key) {
  require(body.contains(key), ErrorKind::kInput, "request body lacks '" + key + "'");
  try {
    return body.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorKind::kInput, "request field '" + key + "' has the wrong type");
  }
}

// ---------------------------------------------------------------------------

struct RunEntry {
  RunData data;
  std::unordered_map<std::string, std::size_t> index;  // example id -> corpus position
};

struct CheckpointEntry {
  LoadedCheckpoint ck;
  std::vector<ExampleAttributes> attributes;  // corpus order
};

class Service {
 public:
  explicit Service(ServiceOptions opts, SessionStore::Now now = Clock::now)
      : opts_(std::move(opts)),
        sessions_(opts_.session_idle, opts_.max_sessions, std::move(now)),
        slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(opts_.live_slots, 1))) {
    require(opts_.live_slots >= 1 && opts_.live_slots <= 64, ErrorKind::kConfig, "live_slots must be in [1, 64]");
  }

  const ServiceOptions& options() const { return opts_; }
  SessionStore& sessions() { return sessions_; }

  // --- runs and checkpoints -------------------------------------------------

  json list_runs() {
    json runs = json::array();
    if (!fs::is_directory(opts_.runs_root)) return {{"runs", runs}};
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(opts_.runs_root))
      if (e.is_directory() && fs::exists(e.path() / "config.json")) ids.push_back(e.path().filename().string());
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) {
      const auto r = run(id);
      const auto& d = r->data;
      runs.push_back({{"run_id", id},
                      {"labels", d.config.labels},
                      {"n_classes", d.config.model.n_classes},
                      {"corpus_size", d.corpus.size()},
                      {"epochs", checkpoint_epochs(d.paths)},
                      {"config", to_json(d.config)}});
    }
    return {{"runs", runs}};
  }

  json list_checkpoints(const std::string& run_id) {
    const auto r = run(run_id);
    std::map<std::size_t, json> metrics;
    if (r->data.metrics.contains("checkpoints"))
      for (const auto& m : r->data.metrics["checkpoints"]) metrics[m.at("epoch").get<std::size_t>()] = m;
    json out = json::array();
    for (auto epoch : checkpoint_epochs(r->data.paths)) {
      const fs::path dir = r->data.paths.checkpoint(epoch);
      std::string status = "incomplete";
      json layers = json::array();
      if (!fs::exists(dir / kIncompleteMarker) && fs::exists(dir / kManifestFile)) {
        const Manifest m = manifest_from_json(parse_json(read_file(dir / kManifestFile), "manifest.json"));
        status = m.precomputed() ? "precomputed" : "weights_only";
        layers = m.projection_layers();
      }
      const auto mi = metrics.find(epoch);
      out.push_back({{"epoch", epoch},
                     {"status", status},
                     {"train_accuracy", mi == metrics.end() ? json() : mi->second.at("train_accuracy")},
                     {"mean_train_loss", mi == metrics.end() ? json() : mi->second.at("mean_train_loss")},
                     {"projection_layers", layers}});
    }
    return {{"run_id", run_id}, {"checkpoints", out}};
  }

  // --- dataset views ----------------------------------------------------------

  json projection(const std::string& run_id, std::size_t epoch, const Query& q) {
    const auto r = run(run_id);
    const auto c = checkpoint(run_id, epoch);
    const std::string mode = query_choice(q, "mode", {"tsne", "datamap"});
    const FilterSpec filter = parse_filter(query_value(q, "filter").value_or(""), r->data.config.labels);

    const LayerProjection* proj = nullptr;
    json layer = nullptr;
    if (mode == "tsne") {
      require(!c->ck.projections.empty(), ErrorKind::kNotFound, "checkpoint has no projections");
      const std::size_t k = query_index(q, "layer").value_or(c->ck.projections.rbegin()->first);
      const auto it = c->ck.projections.find(k);
      if (it == c->ck.projections.end()) {
        std::string avail;
        for (const auto& [l, _] : c->ck.projections) avail += (avail.empty() ? "" : ", ") + std::to_string(l);
        fail(ErrorKind::kNotFound, "no projection for layer " + std::to_string(k) + "; available layers: " + avail);
      }
      proj = &it->second;
      layer = k;
    }

    json points = json::array();
    const auto& attrs = c->attributes;
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      const auto& a = attrs[i];
      if (!filter.matches(a)) continue;
      const double x = proj ? proj->coords.coords(static_cast<Eigen::Index>(i), 0) : a.variability;
      const double y = proj ? proj->coords.coords(static_cast<Eigen::Index>(i), 1) : a.confidence;
      points.push_back({{"id", r->data.encoded[i].id}, {"x", x}, {"y", y}, {"attributes", attributes_json(*r, a)}});
    }
    return {{"run_id", run_id},
            {"epoch", epoch},
            {"mode", mode},
            {"layer", layer},
            {"x_axis", mode == "tsne" ? "tsne_1" : "variability"},
            {"y_axis", mode == "tsne" ? "tsne_2" : "confidence"},
            {"total", attrs.size()},
            {"count", points.size()},
            {"points", points}};
  }

  json examples(const std::string& run_id, std::size_t epoch, const Query& q) {
    const auto r = run(run_id);
    const auto c = checkpoint(run_id, epoch);
    const FilterSpec filter = parse_filter(query_value(q, "filter").value_or(""), r->data.config.labels);
    const std::size_t page = query_index(q, "page").value_or(0);
    const std::size_t page_size = query_index(q, "page_size").value_or(50);
    require(page_size >= 1 && page_size <= 1000, ErrorKind::kInput, "page_size must be in [1, 1000]");

    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < c->attributes.size(); ++i)
      if (filter.matches(c->attributes[i])) hits.push_back(i);
    json rows = json::array();
    const std::size_t begin = page * page_size;
    for (std::size_t k = begin; k < hits.size() && k < begin + page_size; ++k) {
      const auto i = hits[k];
      const auto& ex = r->data.corpus.examples[i];
      rows.push_back({{"id", ex.id},
                      {"text", ex.text},
                      {"label", ex.label},
                      {"prediction", c->attributes[i].prediction},
                      {"loss", c->attributes[i].loss}});
    }
    return {{"run_id", run_id}, {"epoch", epoch}, {"page", page}, {"page_size", page_size},
            {"total", hits.size()}, {"rows", rows}};
  }

  json heads(const std::string& run_id, std::size_t epoch, const Query& q) {
    const auto r = run(run_id);
    const auto c = checkpoint(run_id, epoch);
    const std::string view = query_choice(q, "view", {"importance", "pattern"});
    const std::string scale = query_choice(q, "scale", {"aggregate", "instance"});
    const auto& cfg = c->ck.params.config;
    json out{{"run_id", run_id}, {"epoch", epoch}, {"view", view}, {"scale", scale},
             {"n_layers", cfg.n_layers}, {"n_heads", cfg.n_heads}, {"example_id", nullptr}, {"session_id", nullptr}};

    if (scale == "aggregate") {
      if (view == "importance") {
        out["importance"] = c->ck.head_importance;
      } else {
        out["pattern"] = aggregate_pattern_json(c->ck.attention);
      }
      return out;
    }

    const auto example_id = query_value(q, "example");
    require(example_id.has_value(), ErrorKind::kInput, "scale=instance requires an 'example' parameter");
    const std::size_t i = example_index(*r, *example_id);
    HeadMask mask = HeadMask::all_active(cfg);
    if (const auto sid = query_value(q, "session")) {
      const SessionState s = sessions_.get(*sid)->snapshot();
      require(s.run_id == run_id && s.epoch == epoch, ErrorKind::kInput,
              "session '" + *sid + "' belongs to run '" + s.run_id + "' epoch " + std::to_string(s.epoch));
      mask = s.mask;
      out["session_id"] = *sid;
    }
    out["example_id"] = *example_id;
    const auto& ex = r->data.encoded[i].example;
    if (view == "importance") {
      const auto slot = acquire(cfg, ex.tokens.valid_len, 3.0);
      const HeadImportanceGrid g = head_importance(c->ck.params, {ex}, ImportanceScope::kInstance, mask);
      out["importance"] = {{"epoch", epoch},
                           {"scope", "instance"},
                           {"example_id", *example_id},
                           {"example_count", g.example_count},
                           {"raw", matrix_json(g.raw)},
                           {"normalized", matrix_json(g.normalized)}};
    } else {
      const auto slot = acquire(cfg, ex.tokens.valid_len, 1.0);
      const ForwardTrace t = forward(c->ck.params, ex.tokens, mask, false);
      json hs = json::array();
      for (std::size_t l = 0; l < cfg.n_layers; ++l)
        for (std::size_t h = 0; h < cfg.n_heads; ++h) {
          json weights = nullptr;
          if (mask.active(l, h)) weights = matrix_json(t.layers[l].probs[h]);
          hs.push_back({{"layer", l}, {"head", h}, {"pruned", !mask.active(l, h)}, {"weights", weights}});
        }
      out["pattern"] = {{"tokens", r->data.vocab.decode(ex.tokens)}, {"heads", hs}};
    }
    return out;
  }

  // --- sessions -------------------------------------------------------------

  json create_session(const std::string& body_text) {
    const json body = parse_body(body_text);
    const auto run_id = body_field<std::string>(body, "run_id");
    const auto epoch = body_field<std::size_t>(body, "epoch");
    const auto c = checkpoint(run_id, epoch);
    const auto s = sessions_.create(run_id, epoch, c->ck.params.config);
    return session_json(s->snapshot());
  }

  json get_session(const std::string& sid) { return session_json(sessions_.get(sid)->snapshot()); }

  json delete_session(const std::string& sid) {
    sessions_.remove(sid);
    return {{"session_id", sid}, {"deleted", true}};
  }

  json prune(const std::string& sid, const std::string& body_text) { return edit_head(sid, body_text, true); }
  json restore(const std::string& sid, const std::string& body_text) { return edit_head(sid, body_text, false); }

  json reset(const std::string& sid) {
    return session_json(sessions_.get(sid)->mutate([](HeadMask& m) { m.reset(); }));
  }

  // --- instance analysis ----------------------------------------------------

  json prediction(const std::string& sid, const std::string& example_id) {
    const auto [s, r, c, i] = resolve_instance(sid, example_id);
    const auto& ex = r->data.encoded[i].example;
    const auto slot = acquire(c->ck.params.config, ex.tokens.valid_len, 1.0);
    const Prediction p = predict(c->ck.params, ex.tokens, s.mask);
    return {{"session_id", sid},
            {"example_id", example_id},
            {"tokens", r->data.vocab.decode(ex.tokens)},
            {"label", ex.label},
            {"label_names", r->data.config.labels},
            {"predicted_class", p.predicted_class},
            {"probs", vec_json(p.probs)},
            {"logits", vec_json(p.logits)},
            {"pruned_count", s.mask.pruned_count()}};
  }

  json attention(const std::string& sid, const std::string& example_id, const Query& q) {
    const auto [s, r, c, i] = resolve_instance(sid, example_id);
    const auto layer = query_index(q, "layer");
    const auto head = query_index(q, "head");
    require(layer && head, ErrorKind::kInput, "attention requires 'layer' and 'head' parameters");
    const std::size_t token = query_index(q, "token").value_or(0);
    const auto& ex = r->data.encoded[i].example;
    const auto slot = acquire(c->ck.params.config, ex.tokens.valid_len, 1.0);
    const auto row = instance_attention(c->ck.params, ex.tokens, *layer, *head, token, s.mask);
    return {{"session_id", sid},
            {"example_id", example_id},
            {"layer", *layer},
            {"head", *head},
            {"token", token},
            {"tokens", r->data.vocab.decode(ex.tokens)},
            {"pruned", !row.has_value()},
            {"weights", row ? json(*row) : json(nullptr)}};
  }

  json saliency(const std::string& sid, const std::string& example_id, const Query& q) {
    const auto [s, r, c, i] = resolve_instance(sid, example_id);
    const std::string method = query_choice(q, "method", {"input_gradient", "lrp"});
    const auto& p = c->ck.params;
    const auto& ex = r->data.encoded[i].example;
    const auto slot = acquire(p.config, ex.tokens.valid_len, 3.0);

    const ForwardTrace t = forward(p, ex.tokens, s.mask, true);
    const Prediction pred = prediction_from_logits(t.logits);
    std::size_t target = pred.predicted_class;
    if (const auto tv = query_value(q, "target")) target = parse_target(r->data.config.labels, *tv);

    SaliencyMap m;
    json lrp_info = nullptr;
    if (method == "lrp") {
      require_content(ex.tokens);
      const LrpResult lr = lrp(p, t, target);
      m = lrp_saliency(p, t, target);
      double sum = 0.0;
      for (double v : lr.token_relevance) sum += v;
      lrp_info = {{"output_relevance", lr.output_relevance}, {"token_relevance_sum", sum}};
    } else {
      m = input_gradient_saliency(p, ex.tokens, target, s.mask);
    }
    return {{"session_id", sid},
            {"example_id", example_id},
            {"method", method},
            {"target_class", target},
            {"tokens", r->data.vocab.decode(ex.tokens)},
            {"signed_scores", m.signed_scores},
            {"display_scores", m.display_scores},
            {"predicted_class", pred.predicted_class},
            {"probs", vec_json(pred.probs)},
            {"lrp", lrp_info}};
  }

  // --- cached loads -----------------------------------------------------------

  std::shared_ptr<const RunEntry> run(const std::string& run_id) {
    std::lock_guard lock(cache_mu_);
    if (const auto it = runs_.find(run_id); it != runs_.end()) return it->second;
    auto e = std::make_shared<RunEntry>();
    e->data = load_run(opts_.runs_root, run_id);
    for (std::size_t i = 0; i < e->data.encoded.size(); ++i) e->index.emplace(e->data.encoded[i].id, i);
    runs_.emplace(run_id, e);
    return e;
  }

  std::shared_ptr<const CheckpointEntry> checkpoint(const std::string& run_id, std::size_t epoch) {
    const auto r = run(run_id);
    std::lock_guard lock(cache_mu_);
    const auto key = std::make_pair(run_id, epoch);
    if (const auto it = checkpoints_.find(key); it != checkpoints_.end()) return it->second;
    auto e = std::make_shared<CheckpointEntry>();
    e->ck = load_checkpoint(r->data, epoch);
    const auto& dm = r->data.datamap;
    require(dm.size() == r->data.encoded.size(), ErrorKind::kIntegrity, "datamap.json does not cover the corpus");
    for (std::size_t i = 0; i < e->ck.stats.size(); ++i) {
      const auto& s = e->ck.stats[i];
      require(s.id == r->data.encoded[i].id && dm[i].id == s.id, ErrorKind::kIntegrity,
              "artifact example order does not match the corpus at '" + s.id + "'");
      e->attributes.push_back({r->data.encoded[i].example.label, s.predicted, s.loss, dm[i].confidence,
                               dm[i].variability, s.correct, s.confidence});
    }
    for (const auto& [k, lp] : e->ck.projections)
      require(lp.ids.size() == e->ck.stats.size(), ErrorKind::kIntegrity,
              "projection for layer " + std::to_string(k) + " does not cover the corpus");
    checkpoints_.emplace(key, e);
    return e;
  }

 private:
  struct Instance {
    SessionState session;
    std::shared_ptr<const RunEntry> run;
    std::shared_ptr<const CheckpointEntry> ck;
    std::size_t index;
  };

  class SlotGuard {
   public:
    explicit SlotGuard(std::counting_semaphore<64>& s) : s_(&s) {}
    SlotGuard(SlotGuard&& o) noexcept : s_(std::exchange(o.s_, nullptr)) {}
    SlotGuard(const SlotGuard&) = delete;
    ~SlotGuard() {
      if (s_) s_->release();
    }

   private:
    std::counting_semaphore<64>* s_;
  };

  /// Rough operation count of `passes` forward-equivalents over n tokens.
  static double estimated_cost(const ModelConfig& c, std::size_t n, double passes) {
    const double d = static_cast<double>(c.d_model), len = static_cast<double>(n);
    const double per_layer = 8.0 * len * d * d + 4.0 * len * len * d + 4.0 * len * d * static_cast<double>(c.d_ff);
    return passes * static_cast<double>(c.n_layers) * per_layer;
  }

  SlotGuard acquire(const ModelConfig& c, std::size_t n, double passes) {
    const double cost = estimated_cost(c, n, passes);
    require(cost <= opts_.compute_budget, ErrorKind::kBudget,
            "estimated cost " + std::to_string(static_cast<long long>(cost)) + " exceeds the per-request budget " +
                std::to_string(static_cast<long long>(opts_.compute_budget)));
    require(slots_.try_acquire(), ErrorKind::kBudget,
            "all " + std::to_string(opts_.live_slots) + " compute slots are busy; retry shortly");
    return SlotGuard(slots_);
  }

  static json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

  static std::size_t example_index(const RunEntry& r, const std::string& id) {
    const auto it = r.index.find(id);
    require(it != r.index.end(), ErrorKind::kNotFound, "unknown example '" + id + "'");
    return it->second;
  }

  static std::size_t parse_target(const std::vector<std::string>& labels, const std::string& v) {
    std::size_t k = labels.size();
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), k);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      const auto it = std::find(labels.begin(), labels.end(), v);
      k = it == labels.end() ? labels.size() : static_cast<std::size_t>(it - labels.begin());
    }
    if (k >= labels.size()) {
      std::string list;
      for (std::size_t i = 0; i < labels.size(); ++i)
        list += (i ? ", " : "") + std::to_string(i) + " (" + labels[i] + ")";
      fail(ErrorKind::kInput, "invalid target '" + v + "'; valid targets: " + list);
    }
    return k;
  }

  Instance resolve_instance(const std::string& sid, const std::string& example_id) {
    const SessionState s = sessions_.get(sid)->snapshot();
    const auto r = run(s.run_id);
    const auto c = checkpoint(s.run_id, s.epoch);
    return {s, r, c, example_index(*r, example_id)};
  }

  json edit_head(const std::string& sid, const std::string& body_text, bool prune) {
    const json body = parse_body(body_text);
    const auto layer = body_field<std::size_t>(body, "layer");
    const auto head = body_field<std::size_t>(body, "head");
    return session_json(sessions_.get(sid)->mutate([&](HeadMask& m) {
      if (prune) m.prune(layer, head);
      else m.restore(layer, head);
    }));
  }

  static json session_json(const SessionState& s) {
    json mask = json::array(), pruned = json::array();
    for (std::size_t l = 0; l < s.mask.n_layers(); ++l) {
      json row = json::array();
      for (std::size_t h = 0; h < s.mask.n_heads(); ++h) {
        row.push_back(s.mask.active(l, h));
        if (!s.mask.active(l, h)) pruned.push_back({l, h});
      }
      mask.push_back(row);
    }
    return {{"session_id", s.id}, {"run_id", s.run_id}, {"epoch", s.epoch}, {"n_layers", s.mask.n_layers()},
            {"n_heads", s.mask.n_heads()}, {"mask", mask}, {"pruned", pruned}};
  }

  static json attributes_json(const RunEntry& r, const ExampleAttributes& a) {
    return {{"label", a.label},
            {"label_name", r.data.config.labels.at(a.label)},
            {"prediction", a.prediction},
            {"loss", a.loss},
            {"confidence", a.confidence},
            {"variability", a.variability},
            {"correct", a.correct},
            {"prediction_confidence", a.prediction_confidence}};
  }

  static json aggregate_pattern_json(const AggregateAttentionGrid& g) {
    json counts = json::array();
    for (std::size_t p = 0; p < g.size; ++p) {
      json row = json::array();
      for (std::size_t q = 0; q < g.size; ++q) row.push_back(g.counts[p * g.size + q]);
      counts.push_back(row);
    }
    json hs = json::array();
    for (std::size_t l = 0; l < g.n_layers; ++l)
      for (std::size_t h = 0; h < g.n_heads; ++h) {
        json grid = json::array();
        for (std::size_t p = 0; p < g.size; ++p) {
          json row = json::array();
          for (std::size_t q = 0; q < g.size; ++q) {
            const auto v = g.value(l, h, p, q);
            row.push_back(v ? json(*v) : json(nullptr));
          }
          grid.push_back(row);
        }
        hs.push_back({{"layer", l}, {"head", h}, {"weights", grid}});
      }
    return {{"size", g.size}, {"counts", counts}, {"heads", hs}};
  }

  ServiceOptions opts_;
  SessionStore sessions_;
  std::counting_semaphore<64> slots_;
  std::mutex cache_mu_;
  std::map<std::string, std::shared_ptr<const RunEntry>> runs_;
  std::map<std::pair<std::string, std::size_t>, std::shared_ptr<const CheckpointEntry>> checkpoints_;
};

}  // namespace t3::api
