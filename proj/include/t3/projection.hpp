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
#include <iostream>
#include <numeric>
#include <vector>

#include "t3/error.hpp"
#include "t3/tensor.hpp"

namespace t3 {

struct TsneOptions {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
};

struct ProjectionCoords {
  Mat coords;  // N x 2, centred
  double perplexity = 0.0;  // after clamping
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  double kl_initial = 0.0;  // KL(P || Q) of the initial layout, no exaggeration
  double kl_final = 0.0;
};

inline Mat squared_distances(const Mat& x) {
  const Eigen::Index n = x.rows();
  Mat d = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (x.row(i) - x.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

/// Largest perplexity admitted for n points.
inline double max_perplexity(std::size_t n) { return static_cast<double>(n - 1) / 3.0; }

/// Row-stochastic P_{j|i} whose rows have entropy log2(perplexity) bits,
/// found by bisection on the Gaussian precision.
inline Mat conditional_affinities(const Mat& sqdist, double perplexity) {
  const Eigen::Index n = sqdist.rows();
  require(n >= 2 && sqdist.cols() == n, ErrorKind::kInput, "distance matrix must be square with at least 2 rows");
  require(perplexity > 0.0, ErrorKind::kInput, "perplexity must be positive");
  const double target = std::log2(perplexity);
  Mat P = Mat::Zero(n, n);
  std::vector<double> d(static_cast<std::size_t>(n - 1));
  std::vector<double> w(d.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t k = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) d[k++] = sqdist(i, j);
    const double dmin = *std::min_element(d.begin(), d.end());
    double mean_shift = 0.0;
    for (double& v : d) {
      v -= dmin;
      mean_shift += v;
    }
    mean_shift /= static_cast<double>(d.size());

    double beta = mean_shift > 0.0 ? 1.0 / mean_shift : 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 64; ++it) {
      double sum = 0.0, dot = 0.0;
      for (std::size_t j = 0; j < d.size(); ++j) {
        w[j] = std::exp(-beta * d[j]);
        sum += w[j];
        dot += w[j] * d[j];
      }
      const double entropy = (std::log(sum) + beta * dot / sum) / std::numbers::ln2;
      if (std::abs(entropy - target) < 1e-5) break;
      if (entropy > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) {
      w[j] = std::exp(-beta * d[j]);
      sum += w[j];
    }
    k = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) P(i, j) = w[k++] / sum;
  }
  return P;
}

/// Joint p_ij = (P_{j|i} + P_{i|j}) / 2N.
inline Mat joint_affinities(const Mat& conditional) {
  const double n = static_cast<double>(conditional.rows());
  return (conditional + conditional.transpose()) / (2.0 * n);
}

/// KL(P || Q) for a layout y under the Student-t kernel.
inline double tsne_kl(const Mat& P, const Mat& y) {
  const Eigen::Index n = y.rows();
  double z = 0.0;
  Mat num = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      num(i, j) = v;
      num(j, i) = v;
      z += 2.0 * v;
    }
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || P(i, j) <= 0.0) continue;
      const double q = std::max(num(i, j) / z, 1e-300);
      kl += P(i, j) * std::log(P(i, j) / q);
    }
  return kl;
}

namespace detail {

/// Row order sorted lexicographically by content, so that the layout does
/// not depend on how the caller ordered its rows.
inline std::vector<Eigen::Index> canonical_order(const Mat& x) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      if (x(a, k) != x(b, k)) return x(a, k) < x(b, k);
    }
    return false;
  });
  return order;
}

inline void recenter(Mat& y) {
  const Vec mean = y.colwise().mean();
  y.rowwise() -= mean;
}

}  // namespace detail

/// Exact (O(N^2)) t-SNE to two dimensions.
inline ProjectionCoords tsne(const Mat& input, const TsneOptions& opts) {
  const Eigen::Index n = input.rows();
  require(n >= 4, ErrorKind::kInput, "t-SNE needs at least 4 points, got " + std::to_string(n));
  require(input.allFinite(), ErrorKind::kInput, "t-SNE input contains non-finite values");

  ProjectionCoords out;
  out.seed = opts.seed;
  out.iterations = opts.iterations;
  out.perplexity = opts.perplexity;
  if (out.perplexity > max_perplexity(static_cast<std::size_t>(n))) {
    out.perplexity = max_perplexity(static_cast<std::size_t>(n));
    std::clog << "[t3] warning: perplexity " << opts.perplexity << " clamped to " << out.perplexity << " for "
              << n << " points\n";
  }

  const auto order = detail::canonical_order(input);
  Mat x(n, input.cols());
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = input.row(order[static_cast<std::size_t>(i)]);

  const Mat P = joint_affinities(conditional_affinities(squared_distances(x), out.perplexity));

  Rng rng(opts.seed);
  Mat y(n, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 1e-4 * rng.normal();
  out.kl_initial = tsne_kl(P, y);

  Mat velocity = Mat::Zero(n, 2);
  Mat gains = Mat::Ones(n, 2);
  Mat num(n, n);
  Mat grad(n, 2);
  for (std::size_t it = 0; it < opts.iterations; ++it) {
    const double exaggeration = it < opts.exaggeration_iterations ? opts.early_exaggeration : 1.0;
    const double momentum = it < opts.momentum_switch ? opts.initial_momentum : opts.final_momentum;

    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double dx = y(i, 0) - y(j, 0);
        const double dy = y(i, 1) - y(j, 1);
        const double v = 1.0 / (1.0 + dx * dx + dy * dy);
        num(i, j) = v;
        num(j, i) = v;
        z += 2.0 * v;
      }
    }
    const double inv_z = 1.0 / z;
    for (Eigen::Index i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const double v = num(i, j);
        const double mult = (exaggeration * P(i, j) - v * inv_z) * v;
        gx += mult * (y(i, 0) - y(j, 0));
        gy += mult * (y(i, 1) - y(j, 1));
      }
      grad(i, 0) = 4.0 * gx;
      grad(i, 1) = 4.0 * gy;
    }

    for (Eigen::Index k = 0; k < y.size(); ++k) {
      double& g = gains.data()[k];
      double& v = velocity.data()[k];
      const double gr = grad.data()[k];
      g = ((gr > 0.0) != (v > 0.0)) ? g + 0.2 : g * 0.8;
      g = std::max(g, 0.01);
      v = momentum * v - opts.learning_rate * g * gr;
      y.data()[k] += v;
    }
    detail::recenter(y);
    if (!y.allFinite()) fail(ErrorKind::kState, "t-SNE produced non-finite coordinates at iteration " + std::to_string(it));
  }
  detail::recenter(y);
  out.kl_final = tsne_kl(P, y);

  out.coords.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) out.coords.row(order[static_cast<std::size_t>(i)]) = y.row(i);
  return out;
}

}  // namespace t3
