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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "t3/error.hpp"
#include "t3/model.hpp"

namespace t3 {

// ---------------------------------------------------------------------------
// Head importance
//
// First-order Taylor estimate of the loss change from removing a head: the
// gradient-times-parameter products summed over every parameter the head
// owns (its query/key/value columns and its output-projection rows).

enum class ImportanceScope { kAggregate, kInstance };

struct HeadImportanceGrid {
  Mat raw;         // n_layers x n_heads, >= 0
  Mat normalized;  // raw / max(raw), all zero when raw is all zero
  ImportanceScope scope = ImportanceScope::kAggregate;
  std::size_t example_count = 0;
};

inline Mat normalize_by_max(const Mat& raw) {
  const double m = raw.size() == 0 ? 0.0 : raw.maxCoeff();
  if (m <= 0.0) return Mat::Zero(raw.rows(), raw.cols());
  return raw / m;
}

/// Signed per-head sum of grad * param for a single gradient bundle.
inline Mat head_taylor_terms(const TransformerParameters& p, const TransformerParameters& grad) {
  const auto& c = p.config;
  const auto dh = static_cast<Eigen::Index>(c.d_head());
  Mat out(static_cast<Eigen::Index>(c.n_layers), static_cast<Eigen::Index>(c.n_heads));
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const auto& L = p.layers[l];
    const auto& G = grad.layers[l];
    for (std::size_t h = 0; h < c.n_heads; ++h) {
      const Eigen::Index off = static_cast<Eigen::Index>(h) * dh;
      double s = 0.0;
      s += (G.wq.middleCols(off, dh).array() * L.wq.middleCols(off, dh).array()).sum();
      s += (G.wk.middleCols(off, dh).array() * L.wk.middleCols(off, dh).array()).sum();
      s += (G.wv.middleCols(off, dh).array() * L.wv.middleCols(off, dh).array()).sum();
      s += (G.wo.middleRows(off, dh).array() * L.wo.middleRows(off, dh).array()).sum();
      out(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(h)) = s;
    }
  }
  return out;
}

/// Mean over examples of |sum of grad * param| per head, using each example's
/// cross-entropy loss under `mask`.
inline HeadImportanceGrid head_importance(const TransformerParameters& p, const std::vector<LabeledSequence>& examples,
                                          ImportanceScope scope, const HeadMask& mask) {
  require(!examples.empty(), ErrorKind::kInput, "head importance needs at least one example");
  require(scope == ImportanceScope::kAggregate || examples.size() == 1, ErrorKind::kInput,
          "instance-scale head importance takes exactly one example");
  const auto& c = p.config;
  HeadImportanceGrid grid;
  grid.scope = scope;
  grid.example_count = examples.size();
  grid.raw = Mat::Zero(static_cast<Eigen::Index>(c.n_layers), static_cast<Eigen::Index>(c.n_heads));
  for (const auto& ex : examples) {
    const LossAndGrad lg = loss_and_grad(p, ex.tokens, ex.label, mask);
    grid.raw += head_taylor_terms(p, lg.grads.params).cwiseAbs();
  }
  grid.raw /= static_cast<double>(examples.size());
  grid.normalized = normalize_by_max(grid.raw);
  return grid;
}

inline HeadImportanceGrid head_importance(const TransformerParameters& p, const std::vector<LabeledSequence>& examples,
                                          ImportanceScope scope) {
  return head_importance(p, examples, scope, HeadMask::all_active(p.config));
}

// ---------------------------------------------------------------------------
// Saliency

enum class SaliencyMethod { kInputGradient, kLrp };

inline const char* to_string(SaliencyMethod m) {
  return m == SaliencyMethod::kInputGradient ? "input_gradient" : "lrp";
}

struct SaliencyMap {
  std::size_t target_class = 0;
  SaliencyMethod method = SaliencyMethod::kInputGradient;
  std::vector<double> signed_scores;   // one per non-padding token
  std::vector<double> display_scores;  // |signed| / max |signed|
};

inline std::vector<double> display_scores(const std::vector<double>& signed_scores) {
  double m = 0.0;
  for (double s : signed_scores) m = std::max(m, std::abs(s));
  std::vector<double> out(signed_scores.size(), 0.0);
  if (m == 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(signed_scores[i]) / m;
  return out;
}

/// score_i = <d y_c / d x_i, x_i>, summed over embedding dimensions.
inline std::vector<double> gradient_times_input(const Mat& embeddings, const Mat& grad, std::size_t valid_len) {
  std::vector<double> out(valid_len);
  for (std::size_t i = 0; i < valid_len; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out[i] = grad.row(r).dot(embeddings.row(r));
  }
  return out;
}

inline void require_content(const TokenSequence& tokens) {
  const bool any = std::any_of(tokens.ids.begin(), tokens.ids.begin() + static_cast<std::ptrdiff_t>(
                                                                               std::min(tokens.valid_len, tokens.ids.size())),
                               [](std::int32_t id) { return id != kPadId; });
  require(tokens.valid_len >= 1 && any, ErrorKind::kInput, "sequence contains only padding");
}

inline Vec one_hot(std::size_t n, std::size_t k) {
  Vec v = Vec::Zero(static_cast<Eigen::Index>(n));
  v[static_cast<Eigen::Index>(k)] = 1.0;
  return v;
}

inline SaliencyMap input_gradient_saliency(const TransformerParameters& p, const TokenSequence& tokens,
                                           std::size_t target_class, const HeadMask& mask) {
  require(target_class < p.config.n_classes, ErrorKind::kInput,
          "target class " + std::to_string(target_class) + " >= n_classes " + std::to_string(p.config.n_classes));
  require_content(tokens);
  const ForwardTrace trace = forward(p, tokens, mask, true);
  const Gradients g = backward(p, trace, one_hot(p.config.n_classes, target_class));
  SaliencyMap s;
  s.target_class = target_class;
  s.method = SaliencyMethod::kInputGradient;
  s.signed_scores = gradient_times_input(trace.input_embeddings, g.input_embeddings, tokens.valid_len);
  s.display_scores = display_scores(s.signed_scores);
  return s;
}

// ---------------------------------------------------------------------------
// Layer-wise relevance propagation
//
// Linear maps use R_i = sum_j a_i w_ij / (z_j + eps sign z_j) R_j with
// z_j = sum_i a_i w_ij (bias excluded, so biases absorb nothing). Residual
// additions split relevance in proportion to each branch's contribution.
// GELU and layer norm pass relevance through unchanged. Attention is treated
// as a fixed mixing matrix over the value path.

inline constexpr double kLrpEpsilon = 1e-9;

namespace detail {
inline double stabilize(double z) { return z + (z >= 0.0 ? kLrpEpsilon : -kLrpEpsilon); }
}  // namespace detail

/// Relevance of the rows of `a` (n x in) given relevance R (n x out) of a * W.
inline Mat lrp_linear(const Mat& a, const Mat& W, const Mat& R) {
  const Mat z = a * W;
  const Mat s = R.array() / z.unaryExpr([](double v) { return detail::stabilize(v); }).array();
  return a.array() * (s * W.transpose()).array();
}

struct ResidualSplit {
  Mat first, second;
};

/// Splits relevance of (a + b) elementwise between a and b in proportion to
/// each branch's share of the sum. The split is unstabilized, so it is
/// conservative up to rounding; an exactly zero sum splits evenly.
inline ResidualSplit lrp_residual(const Mat& a, const Mat& b, const Mat& R) {
  ResidualSplit out{Mat(a.rows(), a.cols()), Mat(a.rows(), a.cols())};
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double z = a.data()[i] + b.data()[i];
    const double r = R.data()[i];
    if (z == 0.0) {
      out.first.data()[i] = 0.5 * r;
      out.second.data()[i] = 0.5 * r;
    } else {
      out.first.data()[i] = a.data()[i] * (r / z);
      out.second.data()[i] = b.data()[i] * (r / z);
    }
  }
  return out;
}

/// Relevance of the values V (n x dh) given relevance of context = P * V.
inline Mat lrp_attention_values(const Mat& P, const Mat& V, const Mat& R) {
  const Mat ctx = P * V;
  const Mat s = R.array() / ctx.unaryExpr([](double v) { return detail::stabilize(v); }).array();
  return V.array() * (P.transpose() * s).array();
}

struct LrpStep {
  std::string rule;
  double relevance_in = 0.0;   // total on the upper side of the rule
  double relevance_out = 0.0;  // total on the lower side
};

struct LrpResult {
  double output_relevance = 0.0;
  Mat input_relevance;                  // n x d_model
  std::vector<double> token_relevance;  // one per non-padding token
  std::vector<LrpStep> steps;
};

inline LrpResult lrp(const TransformerParameters& p, const ForwardTrace& t, std::size_t target_class) {
  require(t.captured, ErrorKind::kState, "relevance propagation requires a captured forward trace");
  const auto& c = p.config;
  require(target_class < c.n_classes, ErrorKind::kInput,
          "target class " + std::to_string(target_class) + " >= n_classes " + std::to_string(c.n_classes));
  const auto tc = static_cast<Eigen::Index>(target_class);
  const auto dh = static_cast<Eigen::Index>(c.d_head());

  LrpResult res;
  auto record = [&](const std::string& rule, double in, const Mat& out) {
    res.steps.push_back({rule, in, out.sum()});
  };

  res.output_relevance = t.logits[tc];
  Mat pooled = t.pooled;
  Mat R_pooled = lrp_linear(pooled, p.classifier_weight.col(tc), Mat::Constant(1, 1, res.output_relevance));
  record("classifier", res.output_relevance, R_pooled);

  Mat R = Mat::Zero(static_cast<Eigen::Index>(t.length()), static_cast<Eigen::Index>(c.d_model));
  R.row(0) = R_pooled.row(0);

  for (std::size_t l = c.n_layers; l-- > 0;) {
    const LayerTrace& lt = t.layers[l];
    const LayerParams& L = p.layers[l];
    const std::string pre = "layer" + std::to_string(l) + ".";

    record(pre + "ffn_norm", R.sum(), R);
    const double r2 = R.sum();
    auto split2 = lrp_residual(lt.hidden1, lt.ffn_out, R);
    record(pre + "ffn_residual", r2, split2.first + split2.second);

    const double rf = split2.second.sum();
    Mat R_act = lrp_linear(lt.ffn_act, L.w2, split2.second);
    record(pre + "ffn.w2", rf, R_act);
    record(pre + "gelu", R_act.sum(), R_act);
    Mat R_h1 = lrp_linear(lt.hidden1, L.w1, R_act);
    record(pre + "ffn.w1", R_act.sum(), R_h1);
    R_h1 += split2.first;

    record(pre + "attention_norm", R_h1.sum(), R_h1);
    auto split1 = lrp_residual(lt.input, lt.attention_out, R_h1);
    record(pre + "attention_residual", R_h1.sum(), split1.first + split1.second);

    const double ra = split1.second.sum();
    Mat R_merged = lrp_linear(lt.merged, L.wo, split1.second);
    record(pre + "attention.output", ra, R_merged);

    Mat R_value = Mat::Zero(R_merged.rows(), R_merged.cols());
    for (std::size_t h = 0; h < c.n_heads; ++h) {
      const Eigen::Index off = static_cast<Eigen::Index>(h) * dh;
      R_value.middleCols(off, dh) =
          lrp_attention_values(lt.probs[h], lt.value.middleCols(off, dh), R_merged.middleCols(off, dh));
    }
    record(pre + "attention.mix", R_merged.sum(), R_value);
    Mat R_x = lrp_linear(lt.input, L.wv, R_value);
    record(pre + "attention.value", R_value.sum(), R_x);
    R = R_x + split1.first;
  }

  res.input_relevance = R;
  res.token_relevance.resize(t.valid_len);
  for (std::size_t i = 0; i < t.valid_len; ++i) res.token_relevance[i] = R.row(static_cast<Eigen::Index>(i)).sum();
  return res;
}

inline SaliencyMap lrp_saliency(const TransformerParameters& p, const ForwardTrace& t, std::size_t target_class) {
  const LrpResult r = lrp(p, t, target_class);
  SaliencyMap s;
  s.target_class = target_class;
  s.method = SaliencyMethod::kLrp;
  s.signed_scores = r.token_relevance;
  s.display_scores = display_scores(s.signed_scores);
  return s;
}

// ---------------------------------------------------------------------------
// Attention patterns

/// Dataset-mean attention per head over a fixed S x S window. Counts are the
/// same for every head, so a single count matrix is kept.
struct AggregateAttentionGrid {
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::size_t size = 0;
  std::vector<double> means;          // n_layers * n_heads * size * size
  std::vector<std::uint32_t> counts;  // size * size

  std::size_t offset(std::size_t l, std::size_t h, std::size_t p, std::size_t q) const {
    return ((l * n_heads + h) * size + p) * size + q;
  }
  std::optional<double> value(std::size_t l, std::size_t h, std::size_t p, std::size_t q) const {
    if (counts[p * size + q] == 0) return std::nullopt;
    return means[offset(l, h, p, q)];
  }
};

/// Running (sum, count) pairs; merge() is associative and order independent
/// up to floating-point summation order.
class AttentionAccumulator {
 public:
  AttentionAccumulator(std::size_t n_layers, std::size_t n_heads, std::size_t size)
      : n_layers_(n_layers), n_heads_(n_heads), size_(size),
        sums_(n_layers * n_heads * size * size, 0.0), counts_(size * size, 0) {}

  void add(const ForwardTrace& t) {
    const std::size_t m = std::min(t.valid_len, size_);
    for (std::size_t l = 0; l < n_layers_; ++l)
      for (std::size_t h = 0; h < n_heads_; ++h) {
        const Mat& P = t.layers[l].probs[h];
        for (std::size_t p = 0; p < m; ++p)
          for (std::size_t q = 0; q < m; ++q)
            sums_[((l * n_heads_ + h) * size_ + p) * size_ + q] +=
                P(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
      }
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t q = 0; q < m; ++q) ++counts_[p * size_ + q];
  }

  void merge(const AttentionAccumulator& o) {
    for (std::size_t i = 0; i < sums_.size(); ++i) sums_[i] += o.sums_[i];
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
  }

  AggregateAttentionGrid finish() const {
    AggregateAttentionGrid g{n_layers_, n_heads_, size_, std::vector<double>(sums_.size(), 0.0), counts_};
    const std::size_t cells = size_ * size_;
    for (std::size_t i = 0; i < sums_.size(); ++i) {
      const auto n = counts_[i % cells];
      if (n > 0) g.means[i] = sums_[i] / static_cast<double>(n);
    }
    return g;
  }

 private:
  std::size_t n_layers_, n_heads_, size_;
  std::vector<double> sums_;
  std::vector<std::uint32_t> counts_;
};

inline constexpr std::size_t kAggregateAttentionSize = 48;

inline AggregateAttentionGrid aggregate_attention(const TransformerParameters& p,
                                                  const std::vector<TokenSequence>& corpus, std::size_t size) {
  const auto& c = p.config;
  require(!corpus.empty(), ErrorKind::kInput, "aggregate attention needs a nonempty corpus");
  require(size >= 1 && size <= c.max_seq_len, ErrorKind::kInput,
          "display size " + std::to_string(size) + " must be in [1, max_seq_len]");
  AttentionAccumulator acc(c.n_layers, c.n_heads, size);
  const HeadMask mask = HeadMask::all_active(c);
  for (const auto& t : corpus) acc.add(forward(p, t, mask, false));
  return acc.finish();
}

/// Attention distribution of one query token for one head over the valid
/// positions; nullopt when the head is pruned in `mask`.
inline std::optional<std::vector<double>> instance_attention(const TransformerParameters& p, const TokenSequence& tokens,
                                                             std::size_t layer, std::size_t head,
                                                             std::size_t query_token, const HeadMask& mask) {
  const auto& c = p.config;
  require(layer < c.n_layers, ErrorKind::kInput,
          "layer " + std::to_string(layer) + " out of range [0, " + std::to_string(c.n_layers) + ")");
  require(head < c.n_heads, ErrorKind::kInput,
          "head " + std::to_string(head) + " out of range [0, " + std::to_string(c.n_heads) + ")");
  require(query_token < tokens.valid_len, ErrorKind::kInput,
          "token " + std::to_string(query_token) + " out of range [0, " + std::to_string(tokens.valid_len) + ")");
  if (!mask.active(layer, head)) return std::nullopt;
  const ForwardTrace t = forward(p, tokens, mask, false);
  const Mat& P = t.layers[layer].probs[head];
  std::vector<double> row(tokens.valid_len);
  for (std::size_t q = 0; q < tokens.valid_len; ++q)
    row[q] = P(static_cast<Eigen::Index>(query_token), static_cast<Eigen::Index>(q));
  return row;
}

}  // namespace t3
