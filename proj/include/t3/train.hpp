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
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "t3/dynamics.hpp"
#include "t3/error.hpp"
#include "t3/model.hpp"

namespace t3 {

struct TrainHyperparams {
  std::size_t epochs = 5;
  std::size_t batch_size = 16;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
};

/// Emitted once for the initial parameters (epoch 0) and after every epoch.
struct CheckpointEvent {
  std::size_t epoch = 0;
  const TransformerParameters& params;
  std::vector<ExampleStats> stats;  // inference-mode, every training example
  double mean_train_loss = 0.0;     // mean minibatch loss during the epoch; 0 for epoch 0

  double accuracy() const {
    if (stats.empty()) return 0.0;
    std::size_t ok = 0;
    for (const auto& s : stats) ok += s.correct ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(stats.size());
  }
};

using CheckpointSink = std::function<void(const CheckpointEvent&)>;

/// Plain minibatch SGD on cross-entropy with seeded shuffling. Returns the
/// final parameters; every checkpoint is streamed through `sink`.
inline TransformerParameters train_run(const ModelConfig& config, const std::vector<IdentifiedExample>& corpus,
                                       const TrainHyperparams& hp, const CheckpointSink& sink) {
  config.validate();
  require(!corpus.empty(), ErrorKind::kInput, "training corpus is empty");
  require(hp.batch_size >= 1, ErrorKind::kConfig, "batch_size must be >= 1");
  require(std::isfinite(hp.learning_rate) && hp.learning_rate > 0, ErrorKind::kConfig,
          "learning_rate must be positive");
  for (const auto& ex : corpus) {
    require(ex.example.label < config.n_classes, ErrorKind::kInput,
            "example '" + ex.id + "' has label " + std::to_string(ex.example.label) + " >= n_classes " +
                std::to_string(config.n_classes));
  }

  TransformerParameters params = init_model(config);
  const HeadMask mask = HeadMask::all_active(config);
  sink(CheckpointEvent{0, params, checkpoint_example_stats(params, corpus, mask), 0.0});

  Rng rng(hp.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const std::size_t end = std::min(order.size(), start + hp.batch_size);
      TransformerParameters grad = zeros_like(params);
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = corpus[order[k]].example;
        LossAndGrad lg = loss_and_grad(params, ex.tokens, ex.label, mask);
        if (!std::isfinite(lg.loss)) fail(ErrorKind::kTraining, "training diverged in epoch " + std::to_string(epoch));
        loss_sum += lg.loss;
        add_scaled(grad, lg.grads.params, 1.0);
      }
      add_scaled(params, grad, -hp.learning_rate / static_cast<double>(end - start));
      if (!params.all_finite())
        fail(ErrorKind::kTraining, "training diverged in epoch " + std::to_string(epoch) + ": non-finite parameters");
    }
    sink(CheckpointEvent{epoch, params, checkpoint_example_stats(params, corpus, mask),
                         loss_sum / static_cast<double>(corpus.size())});
  }
  return params;
}

}  // namespace t3
