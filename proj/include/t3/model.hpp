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
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "t3/error.hpp"
#include "t3/tensor.hpp"

namespace t3 {

// Reserved vocabulary ids shared by the tokenizer and the model.
inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnkId = 1;
inline constexpr std::int32_t kClsId = 2;

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 0;
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::size_t d_ff = 0;
  std::size_t max_seq_len = 0;
  std::size_t n_classes = 0;
  std::uint64_t seed = 0;

  std::size_t d_head() const { return n_heads == 0 ? 0 : d_model / n_heads; }

  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      require(ok, ErrorKind::kConfig, "invalid model config: " + what);
    };
    need(vocab_size >= 1, "vocab_size must be >= 1");
    need(d_model >= 1, "d_model must be >= 1");
    need(n_layers >= 1, "n_layers must be >= 1");
    need(n_heads >= 1, "n_heads must be >= 1");
    need(d_ff >= 1, "d_ff must be >= 1");
    need(n_classes >= 1, "n_classes must be >= 1");
    need(max_seq_len >= 2, "max_seq_len must be >= 2");
    need(d_model % n_heads == 0, "d_model (" + std::to_string(d_model) +
                                     ") is not divisible by n_heads (" +
                                     std::to_string(n_heads) + ")");
  }

  bool operator==(const ModelConfig&) const = default;
};

struct LayerParams {
  Mat wq, wk, wv, wo;  // d_model x d_model, head h owns columns [h*dh, (h+1)*dh) of wq/wk/wv and rows of wo
  Vec ln1_gain, ln1_bias;
  Mat w1;  // d_model x d_ff
  Vec b1;
  Mat w2;  // d_ff x d_model
  Vec b2;
  Vec ln2_gain, ln2_bias;
};

struct TransformerParameters {
  ModelConfig config;
  Mat token_embedding;     // vocab_size x d_model
  Mat position_embedding;  // max_seq_len x d_model
  std::vector<LayerParams> layers;
  Mat classifier_weight;  // d_model x n_classes
  Vec classifier_bias;

  /// Visits every learnable array in a fixed order with its canonical name.
  /// The order is the on-disk order of the weights file.
  template <typename Self, typename F>
  static void visit(Self& p, F&& f) {
    f(std::string("embeddings.token"), p.token_embedding);
    f(std::string("embeddings.position"), p.position_embedding);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto& L = p.layers[l];
      const std::string pre = "layers." + std::to_string(l) + ".";
      f(pre + "attention.query", L.wq);
      f(pre + "attention.key", L.wk);
      f(pre + "attention.value", L.wv);
      f(pre + "attention.output", L.wo);
      f(pre + "attention_norm.gain", L.ln1_gain);
      f(pre + "attention_norm.bias", L.ln1_bias);
      f(pre + "ffn.w1", L.w1);
      f(pre + "ffn.b1", L.b1);
      f(pre + "ffn.w2", L.w2);
      f(pre + "ffn.b2", L.b2);
      f(pre + "ffn_norm.gain", L.ln2_gain);
      f(pre + "ffn_norm.bias", L.ln2_bias);
    }
    f(std::string("classifier.weight"), p.classifier_weight);
    f(std::string("classifier.bias"), p.classifier_bias);
  }

  template <typename F>
  void for_each_array(F&& f) { visit(*this, f); }
  template <typename F>
  void for_each_array(F&& f) const { visit(*this, f); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_array([&](const std::string&, const auto& a) { n += static_cast<std::size_t>(a.size()); });
    return n;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_array([&](const std::string&, const auto& a) { ok = ok && a.allFinite(); });
    return ok;
  }
};

/// Parameters of the same shapes as `like`, all zero.
inline TransformerParameters zeros_like(const TransformerParameters& like) {
  TransformerParameters z = like;
  z.for_each_array([](const std::string&, auto& a) { a.setZero(); });
  return z;
}

/// into += scale * other, array by array.
inline void add_scaled(TransformerParameters& into, const TransformerParameters& other, double scale) {
  std::vector<const double*> src;
  other.for_each_array([&](const std::string&, const auto& a) { src.push_back(a.data()); });
  std::size_t k = 0;
  into.for_each_array([&](const std::string&, auto& a) {
    const double* s = src[k++];
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] += scale * s[i];
  });
}

/// Binary l x h gate matrix; 1 keeps a head, 0 prunes it.
class HeadMask {
 public:
  HeadMask() = default;
  HeadMask(std::size_t n_layers, std::size_t n_heads)
      : n_layers_(n_layers), n_heads_(n_heads), gates_(n_layers * n_heads, 1) {}

  static HeadMask all_active(const ModelConfig& c) { return HeadMask(c.n_layers, c.n_heads); }

  std::size_t n_layers() const { return n_layers_; }
  std::size_t n_heads() const { return n_heads_; }

  bool active(std::size_t layer, std::size_t head) const { return gates_[index(layer, head)] != 0; }
  double gate(std::size_t layer, std::size_t head) const { return active(layer, head) ? 1.0 : 0.0; }
  void prune(std::size_t layer, std::size_t head) { gates_[index(layer, head)] = 0; }
  void restore(std::size_t layer, std::size_t head) { gates_[index(layer, head)] = 1; }
  void reset() { std::fill(gates_.begin(), gates_.end(), std::uint8_t{1}); }

  std::size_t pruned_count() const {
    return static_cast<std::size_t>(std::count(gates_.begin(), gates_.end(), std::uint8_t{0}));
  }

  bool matches(const ModelConfig& c) const { return n_layers_ == c.n_layers && n_heads_ == c.n_heads; }

  bool operator==(const HeadMask&) const = default;

 private:
  std::size_t index(std::size_t layer, std::size_t head) const {
    require(layer < n_layers_ && head < n_heads_, ErrorKind::kInput,
            "head (" + std::to_string(layer) + ", " + std::to_string(head) + ") out of range for " +
                std::to_string(n_layers_) + "x" + std::to_string(n_heads_) + " mask");
    return layer * n_heads_ + head;
  }

  std::size_t n_layers_ = 0;
  std::size_t n_heads_ = 0;
  std::vector<std::uint8_t> gates_;
};

/// Token ids with position 0 holding the classification token. Positions at or
/// beyond `valid_len` are padding and never influence the outputs.
struct TokenSequence {
  std::vector<std::int32_t> ids;
  std::size_t valid_len = 0;

  static TokenSequence unpadded(std::vector<std::int32_t> ids) {
    const std::size_t n = ids.size();
    return {std::move(ids), n};
  }
};

struct LabeledSequence {
  TokenSequence tokens;
  std::size_t label = 0;
};

struct LayerTrace {
  Mat input;
  Mat query, key, value;
  std::vector<Mat> scores;  // per head, n x n, -inf on padded keys
  std::vector<Mat> probs;   // per head, n x n
  Mat context;              // per-head contexts side by side, before gating
  Mat merged;               // gated contexts, the input to wo
  Mat attention_out;
  Mat residual1;
  Mat norm1_hat;
  Eigen::VectorXd norm1_rstd;
  Mat hidden1;
  Mat ffn_pre, ffn_act, ffn_out;
  Mat residual2;
  Mat norm2_hat;
  Eigen::VectorXd norm2_rstd;
  Mat output;
};

struct ForwardTrace {
  bool captured = false;
  std::size_t valid_len = 0;
  std::vector<std::int32_t> ids;  // empty when run from raw embeddings
  HeadMask mask;
  Mat input_embeddings;           // n x d_model
  std::vector<LayerTrace> layers; // probs always kept; the rest only when captured
  std::vector<Vec> pooled_per_layer;  // position-0 hidden state after each layer
  Vec pooled;
  Vec logits;

  std::size_t length() const { return static_cast<std::size_t>(input_embeddings.rows()); }
};

struct Gradients {
  TransformerParameters params;
  Mat input_embeddings;
};

// ---------------------------------------------------------------------------
// Initialisation

inline TransformerParameters init_model(const ModelConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto ff = static_cast<Eigen::Index>(config.d_ff);
  auto normal = [&](Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.truncated_normal(0.02);
    return m;
  };

  TransformerParameters p;
  p.config = config;
  p.token_embedding = normal(static_cast<Eigen::Index>(config.vocab_size), d);
  p.position_embedding = normal(static_cast<Eigen::Index>(config.max_seq_len), d);
  p.layers.resize(config.n_layers);
  for (auto& L : p.layers) {
    L.wq = normal(d, d);
    L.wk = normal(d, d);
    L.wv = normal(d, d);
    L.wo = normal(d, d);
    L.ln1_gain = Vec::Ones(d);
    L.ln1_bias = Vec::Zero(d);
    L.w1 = normal(d, ff);
    L.b1 = Vec::Zero(ff);
    L.w2 = normal(ff, d);
    L.b2 = Vec::Zero(d);
    L.ln2_gain = Vec::Ones(d);
    L.ln2_bias = Vec::Zero(d);
  }
  p.classifier_weight = normal(d, static_cast<Eigen::Index>(config.n_classes));
  p.classifier_bias = Vec::Zero(static_cast<Eigen::Index>(config.n_classes));
  return p;
}

// ---------------------------------------------------------------------------
// Building blocks. Exposed so that reference forwards in tests can reuse the
// exact same arithmetic.

inline constexpr double kLayerNormEps = 1e-12;

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2))); }

inline double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2)));
  const double pdf = std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi * (1.0 / std::numbers::sqrt2));
  return cdf + x * pdf;
}

struct LayerNormResult {
  Mat out;
  Mat hat;
  Eigen::VectorXd rstd;
};

inline LayerNormResult layer_norm(const Mat& x, const Vec& gain, const Vec& bias) {
  LayerNormResult r;
  r.hat.resize(x.rows(), x.cols());
  r.out.resize(x.rows(), x.cols());
  r.rstd.resize(x.rows());
  const double inv_d = 1.0 / static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).sum() * inv_d;
    const double var = (x.row(i).array() - mean).square().sum() * inv_d;
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    r.rstd[i] = rstd;
    r.hat.row(i) = (x.row(i).array() - mean) * rstd;
    r.out.row(i) = r.hat.row(i).array() * gain.array() + bias.array();
  }
  return r;
}

struct FeedForwardResult {
  Mat pre, act, out;
};

inline FeedForwardResult feed_forward(const LayerParams& L, const Mat& h) {
  FeedForwardResult r;
  r.pre = h * L.w1;
  r.pre.rowwise() += L.b1;
  r.act = r.pre.unaryExpr([](double v) { return gelu(v); });
  r.out = r.act * L.w2;
  r.out.rowwise() += L.b2;
  return r;
}

inline Mat embed(const TransformerParameters& p, const TokenSequence& tokens) {
  const auto& c = p.config;
  require(!tokens.ids.empty(), ErrorKind::kInput, "empty token sequence");
  require(tokens.ids.size() <= c.max_seq_len, ErrorKind::kInput,
          "sequence length " + std::to_string(tokens.ids.size()) + " exceeds max_seq_len " +
              std::to_string(c.max_seq_len));
  require(tokens.valid_len >= 1 && tokens.valid_len <= tokens.ids.size(), ErrorKind::kInput,
          "valid_len must be in [1, sequence length]");
  const auto n = static_cast<Eigen::Index>(tokens.ids.size());
  Mat x(n, static_cast<Eigen::Index>(c.d_model));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto id = tokens.ids[static_cast<std::size_t>(i)];
    require(id >= 0 && static_cast<std::size_t>(id) < c.vocab_size, ErrorKind::kInput,
            "token id " + std::to_string(id) + " at position " + std::to_string(i) +
                " is outside the vocabulary of size " + std::to_string(c.vocab_size));
    x.row(i) = p.token_embedding.row(id) + p.position_embedding.row(i);
  }
  return x;
}

struct AttentionResult {
  Mat query, key, value;
  std::vector<Mat> scores, probs;
  Mat context;
};

/// Multi-head scaled dot-product self-attention, keys at or beyond valid_len
/// masked with -inf.
inline AttentionResult self_attention(const LayerParams& L, const ModelConfig& c, const Mat& x,
                                      std::size_t valid_len) {
  AttentionResult r;
  const Eigen::Index n = x.rows();
  const auto dh = static_cast<Eigen::Index>(c.d_head());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double neg_inf = -std::numeric_limits<double>::infinity();
  r.query = x * L.wq;
  r.key = x * L.wk;
  r.value = x * L.wv;
  r.context = Mat::Zero(n, x.cols());
  r.scores.resize(c.n_heads);
  r.probs.resize(c.n_heads);
  for (std::size_t h = 0; h < c.n_heads; ++h) {
    const Eigen::Index off = static_cast<Eigen::Index>(h) * dh;
    Mat s = (r.query.middleCols(off, dh) * r.key.middleCols(off, dh).transpose()) * scale;
    for (Eigen::Index q = 0; q < n; ++q)
      for (Eigen::Index k = static_cast<Eigen::Index>(valid_len); k < n; ++k) s(q, k) = neg_inf;
    Mat pr(n, n);
    for (Eigen::Index q = 0; q < n; ++q) pr.row(q) = softmax(s.row(q));
    r.context.middleCols(off, dh) = pr * r.value.middleCols(off, dh);
    r.scores[h] = std::move(s);
    r.probs[h] = std::move(pr);
  }
  return r;
}

/// Multiplies each head's context block by its gate.
inline Mat apply_gates(const Mat& context, const HeadMask& mask, std::size_t layer, std::size_t d_head) {
  Mat merged = context;
  const auto dh = static_cast<Eigen::Index>(d_head);
  for (std::size_t h = 0; h < mask.n_heads(); ++h) {
    merged.middleCols(static_cast<Eigen::Index>(h) * dh, dh) *= mask.gate(layer, h);
  }
  return merged;
}

/// Everything after the per-head contexts: output projection, residual + norm,
/// feed-forward, residual + norm.
inline void finish_layer(const LayerParams& L, const Mat& x, const Mat& merged, LayerTrace& t) {
  t.merged = merged;
  t.attention_out = merged * L.wo;
  t.residual1 = x + t.attention_out;
  auto n1 = layer_norm(t.residual1, L.ln1_gain, L.ln1_bias);
  t.hidden1 = std::move(n1.out);
  t.norm1_hat = std::move(n1.hat);
  t.norm1_rstd = std::move(n1.rstd);
  auto ff = feed_forward(L, t.hidden1);
  t.ffn_pre = std::move(ff.pre);
  t.ffn_act = std::move(ff.act);
  t.ffn_out = std::move(ff.out);
  t.residual2 = t.hidden1 + t.ffn_out;
  auto n2 = layer_norm(t.residual2, L.ln2_gain, L.ln2_bias);
  t.output = std::move(n2.out);
  t.norm2_hat = std::move(n2.hat);
  t.norm2_rstd = std::move(n2.rstd);
}

inline Vec classify(const TransformerParameters& p, const Vec& pooled) {
  return pooled * p.classifier_weight + p.classifier_bias;
}

// ---------------------------------------------------------------------------
// Forward

/// Forward pass from precomputed input embeddings (token + position sums).
inline ForwardTrace forward_embedded(const TransformerParameters& p, const Mat& input_embeddings,
                                     std::size_t valid_len, const HeadMask& mask, bool capture) {
  const auto& c = p.config;
  require(mask.matches(c), ErrorKind::kInput, "head mask shape does not match the model");
  require(input_embeddings.cols() == static_cast<Eigen::Index>(c.d_model), ErrorKind::kInput,
          "input embeddings have the wrong width");
  require(input_embeddings.rows() >= 1 &&
              static_cast<std::size_t>(input_embeddings.rows()) <= c.max_seq_len,
          ErrorKind::kInput, "sequence length outside [1, max_seq_len]");
  require(valid_len >= 1 && valid_len <= static_cast<std::size_t>(input_embeddings.rows()),
          ErrorKind::kInput, "valid_len must be in [1, sequence length]");

  ForwardTrace t;
  t.captured = capture;
  t.valid_len = valid_len;
  t.mask = mask;
  t.input_embeddings = input_embeddings;
  t.layers.resize(c.n_layers);
  const Mat* x = &t.input_embeddings;
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    LayerTrace& lt = t.layers[l];
    AttentionResult att = self_attention(p.layers[l], c, *x, valid_len);
    lt.input = *x;
    lt.query = std::move(att.query);
    lt.key = std::move(att.key);
    lt.value = std::move(att.value);
    lt.scores = std::move(att.scores);
    lt.probs = std::move(att.probs);
    lt.context = std::move(att.context);
    finish_layer(p.layers[l], lt.input, apply_gates(lt.context, mask, l, c.d_head()), lt);
    t.pooled_per_layer.push_back(lt.output.row(0));
    x = &lt.output;
  }
  t.pooled = t.pooled_per_layer.back();
  t.logits = classify(p, t.pooled);

  if (!capture) {
    for (auto& lt : t.layers) {
      LayerTrace slim;
      slim.probs = std::move(lt.probs);
      lt = std::move(slim);
    }
  }
  return t;
}

inline ForwardTrace forward(const TransformerParameters& p, const TokenSequence& tokens,
                            const HeadMask& mask, bool capture) {
  ForwardTrace t = forward_embedded(p, embed(p, tokens), tokens.valid_len, mask, capture);
  t.ids = tokens.ids;
  return t;
}

// ---------------------------------------------------------------------------
// Backward

namespace detail {

inline Mat layer_norm_backward(const Mat& dy, const Mat& hat, const Eigen::VectorXd& rstd,
                               const Vec& gain, Vec& dgain, Vec& dbias) {
  dgain += (dy.array() * hat.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  Mat dhat = dy.array().rowwise() * gain.array();
  Mat dx(dy.rows(), dy.cols());
  const double inv_d = 1.0 / static_cast<double>(dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_dhat = dhat.row(i).sum() * inv_d;
    const double mean_dhat_hat = dhat.row(i).dot(hat.row(i)) * inv_d;
    dx.row(i) = rstd[i] * (dhat.row(i).array() - mean_dhat - hat.row(i).array() * mean_dhat_hat);
  }
  return dx;
}

inline Mat layer_backward(const LayerParams& L, const ModelConfig& c, const LayerTrace& t,
                          const HeadMask& mask, std::size_t layer, const Mat& dout, LayerParams& g) {
  // second sublayer
  Mat dres2 = layer_norm_backward(dout, t.norm2_hat, t.norm2_rstd, L.ln2_gain, g.ln2_gain, g.ln2_bias);
  Mat dh1 = dres2;
  g.w2 += t.ffn_act.transpose() * dres2;
  g.b2 += dres2.colwise().sum();
  Mat dact = dres2 * L.w2.transpose();
  Mat dpre = dact.array() * t.ffn_pre.unaryExpr([](double v) { return gelu_derivative(v); }).array();
  g.w1 += t.hidden1.transpose() * dpre;
  g.b1 += dpre.colwise().sum();
  dh1 += dpre * L.w1.transpose();

  // first sublayer
  Mat dres1 = layer_norm_backward(dh1, t.norm1_hat, t.norm1_rstd, L.ln1_gain, g.ln1_gain, g.ln1_bias);
  Mat dx = dres1;
  g.wo += t.merged.transpose() * dres1;
  Mat dmerged = dres1 * L.wo.transpose();

  const Eigen::Index n = t.input.rows();
  const auto dh = static_cast<Eigen::Index>(c.d_head());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat dq = Mat::Zero(n, t.input.cols());
  Mat dk = Mat::Zero(n, t.input.cols());
  Mat dv = Mat::Zero(n, t.input.cols());
  for (std::size_t h = 0; h < c.n_heads; ++h) {
    const Eigen::Index off = static_cast<Eigen::Index>(h) * dh;
    const Mat& P = t.probs[h];
    Mat dctx = dmerged.middleCols(off, dh) * mask.gate(layer, h);
    Mat dP = dctx * t.value.middleCols(off, dh).transpose();
    dv.middleCols(off, dh) = P.transpose() * dctx;
    Mat dS(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const double dot = dP.row(r).dot(P.row(r));
      dS.row(r) = P.row(r).array() * (dP.row(r).array() - dot);
    }
    dS *= scale;
    dq.middleCols(off, dh) = dS * t.key.middleCols(off, dh);
    dk.middleCols(off, dh) = dS.transpose() * t.query.middleCols(off, dh);
  }
  g.wq += t.input.transpose() * dq;
  g.wk += t.input.transpose() * dk;
  g.wv += t.input.transpose() * dv;
  dx += dq * L.wq.transpose() + dk * L.wk.transpose() + dv * L.wv.transpose();
  return dx;
}

}  // namespace detail

/// Reverse-mode gradients of <logits, output_grad> with respect to every
/// parameter and to the input embeddings.
inline Gradients backward(const TransformerParameters& p, const ForwardTrace& t, const Vec& output_grad) {
  require(t.captured, ErrorKind::kState, "backward requires a forward trace captured with intermediates");
  const auto& c = p.config;
  require(output_grad.size() == static_cast<Eigen::Index>(c.n_classes), ErrorKind::kInput,
          "output gradient has the wrong length");

  Gradients g{zeros_like(p), Mat()};
  g.params.classifier_weight = t.pooled.transpose() * output_grad;
  g.params.classifier_bias = output_grad;

  Mat dh = Mat::Zero(static_cast<Eigen::Index>(t.length()), static_cast<Eigen::Index>(c.d_model));
  dh.row(0) = output_grad * p.classifier_weight.transpose();
  for (std::size_t l = c.n_layers; l-- > 0;) {
    dh = detail::layer_backward(p.layers[l], c, t.layers[l], t.mask, l, dh, g.params.layers[l]);
  }
  if (!t.ids.empty()) {
    for (std::size_t i = 0; i < t.ids.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      g.params.token_embedding.row(t.ids[i]) += dh.row(r);
      g.params.position_embedding.row(r) += dh.row(r);
    }
  }
  g.input_embeddings = std::move(dh);
  return g;
}

struct LossAndGrad {
  double loss = 0.0;
  Vec probs;
  Gradients grads;
};

inline double cross_entropy(const Vec& logits, std::size_t label) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits[static_cast<Eigen::Index>(label)];
}

inline LossAndGrad loss_and_grad(const TransformerParameters& p, const TokenSequence& tokens,
                                 std::size_t label, const HeadMask& mask) {
  require(label < p.config.n_classes, ErrorKind::kInput,
          "label " + std::to_string(label) + " >= n_classes " + std::to_string(p.config.n_classes));
  ForwardTrace t = forward(p, tokens, mask, true);
  LossAndGrad r;
  r.loss = cross_entropy(t.logits, label);
  r.probs = softmax(t.logits);
  Vec dlogits = r.probs;
  dlogits[static_cast<Eigen::Index>(label)] -= 1.0;
  r.grads = backward(p, t, dlogits);
  return r;
}

struct Prediction {
  std::size_t predicted_class = 0;
  Vec probs;
  Vec logits;
};

inline Prediction prediction_from_logits(const Vec& logits) {
  Prediction r;
  r.logits = logits;
  r.predicted_class = argmax(logits);
  r.probs = softmax(logits);
  return r;
}

inline Prediction predict(const TransformerParameters& p, const TokenSequence& tokens, const HeadMask& mask) {
  return prediction_from_logits(forward(p, tokens, mask, false).logits);
}

}  // namespace t3
