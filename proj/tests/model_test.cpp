#include <gtest/gtest.h>

#include <cstring>

#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "t3/model.hpp"

namespace t3 {
namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 11;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_seq_len = 6;
  c.n_classes = 3;
  c.seed = 7;
  return c;
}

ModelConfig small_config() {
  ModelConfig c;
  c.vocab_size = 20;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 4;
  c.d_ff = 32;
  c.max_seq_len = 10;
  c.n_classes = 3;
  c.seed = 11;
  return c;
}

std::vector<double> flatten(const TransformerParameters& p) {
  std::vector<double> out;
  p.for_each_array([&](const std::string&, const auto& a) { out.insert(out.end(), a.data(), a.data() + a.size()); });
  return out;
}

TEST(InitModel, SameSeedIsBitIdentical) {
  const auto a = flatten(init_model(small_config()));
  const auto b = flatten(init_model(small_config()));
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(0, std::memcmp(a.data(), b.data(), a.size() * sizeof(double)));
}

TEST(InitModel, DifferentSeedDiffers) {
  auto c = small_config();
  const auto a = flatten(init_model(c));
  c.seed = 12;
  EXPECT_NE(a, flatten(init_model(c)));
}

TEST(InitModel, NormGainsOnesBiasesZeroValuesTruncated) {
  const auto p = init_model(small_config());
  p.for_each_array([&](const std::string& name, const auto& a) {
    if (name.find(".gain") != std::string::npos) {
      EXPECT_TRUE((a.array() == 1.0).all()) << name;
    } else if (name.find("bias") != std::string::npos || name.find(".b1") != std::string::npos ||
               name.find(".b2") != std::string::npos) {
      EXPECT_TRUE((a.array() == 0.0).all()) << name;
    } else {
      EXPECT_LE(a.cwiseAbs().maxCoeff(), 0.04) << name;
    }
  });
  EXPECT_TRUE(p.all_finite());
}

TEST(InitModel, RejectsIndivisibleHeads) {
  auto c = small_config();
  c.d_model = 64;
  c.n_heads = 3;
  try {
    init_model(c);
    FAIL() << "expected a configuration error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(InitModel, RejectsShortSequences) {
  auto c = small_config();
  c.max_seq_len = 1;
  EXPECT_THROW(init_model(c), Error);
}

TEST(Forward, AttentionRowsAreStochastic) {
  const auto c = small_config();
  const auto p = testing::random_model(c, 3);
  TokenSequence t = testing::random_tokens(c, 9, 5);
  t.valid_len = 6;
  const auto trace = forward(p, t, HeadMask::all_active(c), true);
  for (const auto& lt : trace.layers) {
    for (const auto& P : lt.probs) {
      for (Eigen::Index q = 0; q < P.rows(); ++q) {
        EXPECT_NEAR(P.row(q).sum(), 1.0, 1e-6);
        EXPECT_GE(P.row(q).minCoeff(), 0.0);
        for (Eigen::Index k = 6; k < P.cols(); ++k) EXPECT_EQ(P(q, k), 0.0);
      }
    }
  }
}

TEST(Forward, RejectsOverLengthAndOutOfVocab) {
  const auto c = small_config();
  const auto p = init_model(c);
  const auto mask = HeadMask::all_active(c);
  auto too_long = testing::random_tokens(c, c.max_seq_len + 1, 1);
  EXPECT_THROW(forward(p, too_long, mask, false), Error);
  auto oov = TokenSequence::unpadded({kClsId, static_cast<std::int32_t>(c.vocab_size)});
  try {
    forward(p, oov, mask, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInput);
  }
}

TEST(Forward, WithoutCaptureKeepsOnlyLogitsAndAttention) {
  const auto c = small_config();
  const auto p = init_model(c);
  const auto t = forward(p, testing::random_tokens(c, 5, 2), HeadMask::all_active(c), false);
  EXPECT_FALSE(t.captured);
  EXPECT_EQ(t.layers[0].probs.size(), c.n_heads);
  EXPECT_EQ(t.layers[0].query.size(), 0);
  EXPECT_THROW(backward(p, t, Vec::Ones(3)), Error);
}

TEST(Forward, PaddingContentIsInert) {
  const auto c = small_config();
  const auto p = testing::random_model(c, 8);
  const auto mask = HeadMask::all_active(c);
  TokenSequence t = testing::random_tokens(c, 10, 4);
  t.valid_len = 5;
  const Vec base = forward(p, t, mask, false).logits;
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    TokenSequence u = t;
    for (std::size_t i = u.valid_len; i < u.ids.size(); ++i)
      u.ids[i] = static_cast<std::int32_t>(rng.below(c.vocab_size));
    EXPECT_EQ(forward(p, u, mask, false).logits, base);
  }
}

TEST(Forward, GateZeroEqualsZeroedContext) {
  const auto c = small_config();
  const auto p = testing::random_model(c, 21);
  const auto t = testing::random_tokens(c, 8, 6);
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    for (std::size_t h = 0; h < c.n_heads; ++h) {
      HeadMask m = HeadMask::all_active(c);
      m.prune(l, h);
      EXPECT_EQ(forward(p, t, m, false).logits, testing::zeroed_context_logits(p, t, l, h));
    }
  }
}

TEST(Forward, AllGatesZeroEqualsResidualOnly) {
  const auto c = small_config();
  const auto p = testing::random_model(c, 22);
  const auto t = testing::random_tokens(c, 7, 6);
  HeadMask m = HeadMask::all_active(c);
  for (std::size_t l = 0; l < c.n_layers; ++l)
    for (std::size_t h = 0; h < c.n_heads; ++h) m.prune(l, h);
  EXPECT_EQ(forward(p, t, m, false).logits, testing::residual_only_logits(p, t));
}

TEST(HeadMask, PruneRestoreAndRange) {
  HeadMask m(2, 3);
  m.prune(1, 2);
  m.prune(1, 2);
  EXPECT_EQ(m.pruned_count(), 1u);
  m.restore(1, 2);
  EXPECT_EQ(m, HeadMask(2, 3));
  EXPECT_THROW(m.prune(2, 0), Error);
}

TEST(Backward, ZeroOutputGradGivesZeroGradients) {
  const auto c = small_config();
  const auto p = testing::random_model(c, 5);
  const auto trace = forward(p, testing::random_tokens(c, 6, 1), HeadMask::all_active(c), true);
  const auto g = backward(p, trace, Vec::Zero(3));
  g.params.for_each_array([](const std::string& name, const auto& a) { EXPECT_TRUE((a.array() == 0.0).all()) << name; });
  EXPECT_TRUE((g.input_embeddings.array() == 0.0).all());
}

TEST(Backward, MatchesFiniteDifferences) {
  const auto c = tiny_config();
  const auto p = testing::random_model(c, 42);
  const auto t = testing::random_tokens(c, 4, 3);
  Vec og(3);
  og << 0.7, -1.3, 0.4;
  const auto r = testing::check_gradients(p, t, HeadMask::all_active(c), og);
  EXPECT_LT(r.worst_relative, 1e-4) << r.worst_name;
  EXPECT_EQ(r.checked, p.parameter_count() + 4 * c.d_model);
}

TEST(Backward, MatchesFiniteDifferencesWithPaddingAndPrunedHead) {
  auto c = tiny_config();
  c.n_layers = 2;
  const auto p = testing::random_model(c, 43);
  auto t = testing::random_tokens(c, 6, 9);
  t.valid_len = 4;
  HeadMask m = HeadMask::all_active(c);
  m.prune(0, 1);
  Vec og(3);
  og << -0.2, 1.1, 0.5;
  const auto r = testing::check_gradients(p, t, m, og);
  EXPECT_LT(r.worst_relative, 1e-4) << r.worst_name;
}

TEST(Backward, PaddingPositionRowsHaveZeroGradient) {
  const auto c = small_config();
  const auto p = testing::random_model(c, 5);
  auto t = testing::random_tokens(c, 9, 2);
  t.valid_len = 4;
  const auto trace = forward(p, t, HeadMask::all_active(c), true);
  const auto g = backward(p, trace, Vec::Ones(3));
  for (Eigen::Index r = 4; r < static_cast<Eigen::Index>(c.max_seq_len); ++r)
    EXPECT_TRUE((g.params.position_embedding.row(r).array() == 0.0).all()) << r;
}

TEST(LossAndGrad, UniformLogitsGiveLogC) {
  auto c = small_config();
  auto p = init_model(c);
  p.classifier_weight.setZero();
  const auto r = loss_and_grad(p, testing::random_tokens(c, 5, 1), 1, HeadMask::all_active(c));
  EXPECT_NEAR(r.loss, std::log(3.0), 1e-12);
}

TEST(LossAndGrad, LargeMarginGivesNearZeroLoss) {
  Vec logits(3);
  logits << 0.0, 60.0, -5.0;
  EXPECT_LT(cross_entropy(logits, 1), 1e-25);
  EXPECT_GE(cross_entropy(logits, 1), 0.0);
}

TEST(LossAndGrad, MatchesFiniteDifferences) {
  const auto c = tiny_config();
  auto p = testing::random_model(c, 77);
  const auto t = testing::random_tokens(c, 4, 5);
  const auto mask = HeadMask::all_active(c);
  const auto r = loss_and_grad(p, t, 2, mask);
  double worst = 0;
  std::vector<double*> grads;
  auto g = r.grads.params;
  g.for_each_array([&](const std::string&, auto& a) { grads.push_back(a.data()); });
  std::size_t k = 0;
  p.for_each_array([&](const std::string&, auto& a) {
    double* ga = grads[k++];
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double orig = a.data()[i];
      auto f = [&](double v) {
        a.data()[i] = v;
        const double out = cross_entropy(forward(p, t, mask, false).logits, 2);
        a.data()[i] = orig;
        return out;
      };
      worst = std::max(worst, testing::relative_error(ga[i], testing::central_difference(f, orig, 1e-4)));
    }
  });
  EXPECT_LT(worst, 1e-4);
}

TEST(Predict, TiesBreakToLowestIndex) {
  Vec logits(2);
  logits << 2.0, 2.0;
  EXPECT_EQ(prediction_from_logits(logits).predicted_class, 0u);
}

TEST(Predict, ProbabilitiesSumToOne) {
  const auto c = small_config();
  const auto p = testing::random_model(c, 1);
  const auto pr = predict(p, testing::random_tokens(c, 6, 3), HeadMask::all_active(c));
  EXPECT_NEAR(pr.probs.sum(), 1.0, 1e-9);
}

TEST(Predict, PruningHeadWithZeroOutputRowsIsNoOp) {
  const auto c = small_config();
  auto p = testing::random_model(c, 2);
  const auto dh = static_cast<Eigen::Index>(c.d_head());
  p.layers[1].wo.middleRows(2 * dh, dh).setZero();
  const auto t = testing::random_tokens(c, 8, 3);
  HeadMask m = HeadMask::all_active(c);
  const auto before = predict(p, t, m);
  m.prune(1, 2);
  const auto after = predict(p, t, m);
  EXPECT_EQ(before.predicted_class, after.predicted_class);
  EXPECT_EQ(before.logits, after.logits);
}

}  // namespace
}  // namespace t3
