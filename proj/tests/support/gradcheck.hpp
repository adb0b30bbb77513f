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

#include <string>

#include "support/oracles.hpp"

namespace t3::testing {

struct GradCheckReport {
  double worst_relative = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
};

/// Compares backward() against central differences of <logits, output_grad>
/// for every parameter entry and every input-embedding entry.
inline GradCheckReport check_gradients(const TransformerParameters& params, const TokenSequence& tokens,
                                       const HeadMask& mask, const Vec& output_grad, double step = 1e-4) {
  const ForwardTrace trace = forward(params, tokens, mask, true);
  const Gradients g = backward(params, trace, output_grad);

  GradCheckReport report;
  auto note = [&](const std::string& name, double analytic, double numeric) {
    const double e = relative_error(analytic, numeric);
    ++report.checked;
    if (e > report.worst_relative) {
      report.worst_relative = e;
      report.worst_name = name;
    }
  };

  TransformerParameters probe = params;
  std::vector<const double*> analytic;
  g.params.for_each_array([&](const std::string&, const auto& a) { analytic.push_back(a.data()); });
  std::size_t k = 0;
  probe.for_each_array([&](const std::string& name, auto& a) {
    const double* ga = analytic[k++];
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double orig = a.data()[i];
      auto f = [&](double v) {
        a.data()[i] = v;
        const double out = forward(probe, tokens, mask, false).logits.dot(output_grad);
        a.data()[i] = orig;
        return out;
      };
      note(name + "[" + std::to_string(i) + "]", ga[i], central_difference(f, orig, step));
    }
  });

  Mat x = embed(params, tokens);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    auto f = [&](double v) {
      x.data()[i] = v;
      const double out = forward_embedded(params, x, tokens.valid_len, mask, false).logits.dot(output_grad);
      x.data()[i] = orig;
      return out;
    };
    note("input[" + std::to_string(i) + "]", g.input_embeddings.data()[i], central_difference(f, orig, step));
  }
  return report;
}

}  // namespace t3::testing
