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


// Example filters shared by the projection and data-table endpoints.

#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "t3/error.hpp"

namespace t3::api {

/// Attributes of one example at one checkpoint. confidence and variability
/// are the run-level Data Map coordinates; the rest are per checkpoint.
struct ExampleAttributes {
  std::size_t label = 0;
  std::size_t prediction = 0;
  double loss = 0.0;
  double confidence = 0.0;
  double variability = 0.0;
  bool correct = false;
  double prediction_confidence = 0.0;
};

using Range = std::pair<double, double>;  // inclusive

struct FilterSpec {
  std::optional<std::set<std::size_t>> labels;
  std::optional<std::set<std::size_t>> predictions;
  std::optional<Range> loss;
  std::optional<Range> confidence;
  std::optional<Range> variability;

  bool empty() const { return !labels && !predictions && !loss && !confidence && !variability; }

  bool matches(const ExampleAttributes& a) const {
    auto in = [](const std::optional<Range>& r, double v) { return !r || (r->first <= v && v <= r->second); };
    if (labels && !labels->count(a.label)) return false;
    if (predictions && !predictions->count(a.prediction)) return false;
    return in(loss, a.loss) && in(confidence, a.confidence) && in(variability, a.variability);
  }
};

/// Parses the JSON filter object. Class sets accept indices or label names.
inline FilterSpec filter_from_json(const nlohmann::json& j, const std::vector<std::string>& label_names) {
  auto bad = [](const std::string& why) { fail(ErrorKind::kInput, "invalid filter: " + why); };
  if (j.is_null()) return {};
  if (!j.is_object()) bad("must be a JSON object");
  FilterSpec f;
  auto classes = [&](const nlohmann::json& v, const std::string& key) {
    if (!v.is_array()) bad("'" + key + "' must be a list of classes");
    std::set<std::size_t> out;
    for (const auto& e : v) {
      if (e.is_number_unsigned() || (e.is_number_integer() && e.get<long long>() >= 0)) {
        const auto k = e.get<std::size_t>();
        if (k >= label_names.size())
          bad("class " + std::to_string(k) + " in '" + key + "' is outside [0, " + std::to_string(label_names.size()) + ")");
        out.insert(k);
      } else if (e.is_string()) {
        const auto it = std::find(label_names.begin(), label_names.end(), e.get<std::string>());
        if (it == label_names.end()) bad("unknown label '" + e.get<std::string>() + "' in '" + key + "'");
        out.insert(static_cast<std::size_t>(it - label_names.begin()));
      } else {
        bad("'" + key + "' entries must be class indices or label names");
      }
    }
    return out;
  };
  auto range = [&](const nlohmann::json& v, const std::string& key) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      bad("'" + key + "' must be [lo, hi]");
    const Range r{v[0].get<double>(), v[1].get<double>()};
    if (!(r.first <= r.second)) bad("'" + key + "' range is not ordered (lo > hi)");
    return r;
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "labels") f.labels = classes(v, key);
    else if (key == "predictions") f.predictions = classes(v, key);
    else if (key == "loss") f.loss = range(v, key);
    else if (key == "confidence") f.confidence = range(v, key);
    else if (key == "variability") f.variability = range(v, key);
    else bad("unknown key '" + key + "' (expected labels, predictions, loss, confidence, variability)");
  }
  return f;
}

inline FilterSpec parse_filter(const std::string& text, const std::vector<std::string>& label_names) {
  if (text.empty()) return {};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::kInput, "invalid filter: not valid JSON");
  }
  return filter_from_json(j, label_names);
}

}  // namespace t3::api
