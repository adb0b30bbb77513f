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


#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "t3/error.hpp"
#include "t3/model.hpp"

namespace t3 {

/// Inference-mode outcome of one example at one checkpoint.
struct ExampleStats {
  std::string id;
  double loss = 0.0;
  double p_gold = 0.0;
  std::size_t predicted = 0;
  double confidence = 0.0;  // probability of the predicted class
  bool correct = false;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::vector<ExampleStats> examples;
};

struct DataMapRecord {
  std::string id;
  double confidence = 0.0;   // mean p_gold over epochs
  double variability = 0.0;  // population std of p_gold over epochs
  double correctness = 0.0;  // fraction of epochs predicted correctly
};

struct IdentifiedExample {
  std::string id;
  LabeledSequence example;
};

inline ExampleStats evaluate_example(const TransformerParameters& p, const IdentifiedExample& ex,
                                     const HeadMask& mask) {
  const Prediction pr = predict(p, ex.example.tokens, mask);
  const auto gold = static_cast<Eigen::Index>(ex.example.label);
  ExampleStats s;
  s.id = ex.id;
  s.loss = cross_entropy(pr.logits, ex.example.label);
  s.p_gold = pr.probs[gold];
  s.predicted = pr.predicted_class;
  s.confidence = pr.probs[static_cast<Eigen::Index>(pr.predicted_class)];
  s.correct = pr.predicted_class == ex.example.label;
  return s;
}

inline std::vector<ExampleStats> checkpoint_example_stats(const TransformerParameters& p,
                                                          const std::vector<IdentifiedExample>& corpus,
                                                          const HeadMask& mask) {
  std::vector<ExampleStats> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus) out.push_back(evaluate_example(p, ex, mask));
  return out;
}

inline std::vector<ExampleStats> checkpoint_example_stats(const TransformerParameters& p,
                                                          const std::vector<IdentifiedExample>& corpus) {
  return checkpoint_example_stats(p, corpus, HeadMask::all_active(p.config));
}

/// Confidence, variability and correctness per example, in the example order
/// of the first record. Sums run in epoch order.
inline std::vector<DataMapRecord> compute_datamap(const std::vector<EpochRecord>& records) {
  require(!records.empty(), ErrorKind::kInput, "data map needs at least one epoch");
  const auto& first = records.front().examples;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < first.size(); ++i) {
    require(index.emplace(first[i].id, i).second, ErrorKind::kInput, "duplicate example id '" + first[i].id + "'");
  }
  const std::size_t n = first.size();
  const std::size_t epochs = records.size();
  std::vector<std::vector<double>> p_gold(n, std::vector<double>(epochs));
  std::vector<std::size_t> correct(n, 0);
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto& ex = records[e].examples;
    require(ex.size() == n, ErrorKind::kInput,
            "epoch " + std::to_string(records[e].epoch) + " has " + std::to_string(ex.size()) +
                " examples, expected " + std::to_string(n));
    std::vector<bool> seen(n, false);
    for (const auto& s : ex) {
      const auto it = index.find(s.id);
      require(it != index.end() && !seen[it->second], ErrorKind::kInput,
              "epoch " + std::to_string(records[e].epoch) + " has an inconsistent example set at id '" + s.id + "'");
      seen[it->second] = true;
      p_gold[it->second][e] = s.p_gold;
      if (s.correct) ++correct[it->second];
    }
  }

  std::vector<DataMapRecord> out(n);
  const auto count = static_cast<double>(epochs);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (double v : p_gold[i]) sum += v;
    const double mean = sum / count;
    double sq = 0.0;
    for (double v : p_gold[i]) sq += (v - mean) * (v - mean);
    out[i] = {first[i].id, mean, std::sqrt(sq / count), static_cast<double>(correct[i]) / count};
  }
  return out;
}

}  // namespace t3
