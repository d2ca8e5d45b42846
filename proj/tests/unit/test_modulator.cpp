// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "ckplug/errors.hpp"
#include "ckplug/modulator.hpp"
#include "support.hpp"

namespace ckplug {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sum(const TokenDistribution& d) {
  double s = 0.0;
  for (double p : d.probs) s += p;
  return s;
}

TEST(ContextualStream, IdenticalStreamsCancel) {
  const LogitVector x{{1.0, -2.0, 0.5, 4.0}};
  for (double v : contextual_stream(x, x).values) EXPECT_EQ(v, 0.0);
}

TEST(ContextualStream, DifferenceOfLogSoftmaxes) {
  // 50-digit reference: log_softmax([1,0]) - log_softmax([0,1]) = [1, -1].
  const ContrastVector c = contextual_stream({{1.0, 0.0}}, {{0.0, 1.0}});
  EXPECT_NEAR(c.values[0], 1.0, 1e-12);
  EXPECT_NEAR(c.values[1], -1.0, 1e-12);
}

TEST(ContextualStream, ConstantOnContextLogitsIsAbsorbed) {
  std::mt19937_64 rng(1);
  const LogitVector rq = testing::random_logits(rng, 30), q = testing::random_logits(rng, 30);
  LogitVector shifted = rq;
  for (double& v : shifted.values) v += 17.25;
  const ContrastVector a = contextual_stream(rq, q), b = contextual_stream(shifted, q);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-9);
}

TEST(ContextualStream, ShapeMismatch) {
  EXPECT_THROW(contextual_stream({{1.0, 2.0}}, {{1.0}}), ShapeError);
}

TEST(ParametricStream, MatchesReference) {
  const LogProbVector lp = parametric_stream({{0.0, 0.0}});
  EXPECT_NEAR(lp.values[0], -std::log(2.0), 1e-12);
}

TEST(HeadSet, UnionSemantics) {
  // q_para top-2 {0,1}; q_cont top-2 {1,2}.
  const LogProbVector para{{-0.1, -0.5, -5.0, -6.0}};
  const ContrastVector cont{{-3.0, 2.0, 1.0, -1.0}};
  EXPECT_EQ(head_set(para, cont, 2).ids, (std::vector<TokenId>{0, 1, 2}));
}

TEST(HeadSet, IdenticalOrderings) {
  const LogProbVector para{{-1.0, -2.0, -3.0, -4.0, -5.0}};
  const ContrastVector cont{{5.0, 4.0, 3.0, 2.0, 1.0}};
  EXPECT_EQ(head_set(para, cont, 3).ids, (std::vector<TokenId>{0, 1, 2}));
}

TEST(HeadSet, BoundaryTiesIncluded) {
  const LogProbVector para{{-1.0, -2.0, -2.0, -3.0}};
  const ContrastVector cont{{0.0, 0.0, 0.0, 5.0}};
  EXPECT_EQ(head_set(para, cont, 2).ids, (std::vector<TokenId>{0, 1, 2, 3}));
}

TEST(HeadSet, MatchesBruteForceUnionOfSorts) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 200; ++t) {
    const LogitVector rq = testing::random_logits(rng, 100), q = testing::random_logits(rng, 100);
    const LogProbVector para = parametric_stream(q);
    const ContrastVector cont = contextual_stream(rq, q);
    EXPECT_EQ(head_set(para, cont, 5).ids, testing::brute_force_head(para.values, cont.values, 5));
  }
}

TEST(HeadSet, RejectsBadK) {
  const LogProbVector para{{-1.0, -2.0}};
  const ContrastVector cont{{0.0, 1.0}};
  EXPECT_THROW(head_set(para, cont, 0), InvalidArgument);
  EXPECT_THROW(head_set(para, cont, 3), InvalidArgument);
}

TEST(Fuse, Endpoints) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    const LogitVector rq = testing::random_logits(rng, 40), q = testing::random_logits(rng, 40);
    const LogProbVector para = parametric_stream(q);
    const ContrastVector cont = contextual_stream(rq, q);
    const HeadSet head = head_set(para, cont, 10);
    const LogitVector one = fuse(para, cont, 1.0, head), zero = fuse(para, cont, 0.0, head);
    for (TokenId i = 0; i < 40; ++i) {
      if (head.contains(i)) {
        EXPECT_NEAR(one.values[i], para.values[i], 1e-12);
        EXPECT_NEAR(zero.values[i], cont.values[i], 1e-12);
      } else {
        EXPECT_EQ(one.values[i], -kInf);
        EXPECT_EQ(zero.values[i], -kInf);
      }
    }
  }
}

TEST(Fuse, HalfCollapsesToHalfContextLogProbs) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 100; ++t) {
    const LogitVector rq = testing::random_logits(rng, 40), q = testing::random_logits(rng, 40);
    const LogProbVector para = parametric_stream(q), lp_rq = log_softmax(rq);
    const ContrastVector cont = contextual_stream(rq, q);
    const HeadSet head = head_set(para, cont, 10);
    const LogitVector half = fuse(para, cont, 0.5, head);
    for (TokenId id : head.ids) EXPECT_NEAR(half.values[id], 0.5 * lp_rq.values[id], 1e-9);
  }
}

TEST(Fuse, RejectsBadAlphaAndShapes) {
  const LogProbVector para{{-1.0, -2.0}};
  const ContrastVector cont{{0.0, 1.0}};
  const HeadSet head{{0, 1}};
  EXPECT_THROW(fuse(para, cont, 1.01, head), InvalidArgument);
  EXPECT_THROW(fuse(para, cont, -0.01, head), InvalidArgument);
  EXPECT_THROW(fuse(para, cont, std::nan(""), head), InvalidArgument);
  EXPECT_THROW(fuse(para, ContrastVector{{0.0}}, 0.5, head), ShapeError);
}

TEST(AdaptiveAlpha, Values) {
  EXPECT_EQ(adaptive_alpha(1.7, 1.7), 0.5);
  EXPECT_EQ(adaptive_alpha(0.0, 1.0), 1.0);
  EXPECT_EQ(adaptive_alpha(2.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(adaptive_alpha(3.0, 1.0), 0.25);
  EXPECT_EQ(adaptive_alpha(0.0, 0.0), 0.5);
  EXPECT_THROW(adaptive_alpha(-1.0, 1.0), InvalidInput);
}

TEST(AdaptiveAlpha, StaysInUnitInterval) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> h(0.0, 20.0);
  for (int t = 0; t < 10000; ++t) {
    const double a = adaptive_alpha(h(rng), h(rng));
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(ModulatedDistribution, PassthroughIsBitIdentical) {
  // Context stream sharper than the query-only stream: no conflict.
  const LogitVector rq{{6.0, 0.1, -0.3, 0.2}}, q{{1.0, 0.8, 0.5, 0.9}};
  const ModulationResult r = modulated_distribution(rq, q, ModulationConfig::fixed(1.0));
  EXPECT_FALSE(r.fired);
  const TokenDistribution ref = softmax(rq);
  ASSERT_EQ(r.dist.size(), ref.size());
  EXPECT_EQ(std::memcmp(r.dist.probs.data(), ref.probs.data(), ref.size() * sizeof(double)), 0);
}

TEST(ModulatedDistribution, AlphaOneFavoursParametricToken) {
  // Token 0 = parametric answer, token 1 = context answer.
  const LogitVector rq{{0.0, 0.3}}, q{{3.0, 0.0}};
  const ModulationResult one = modulated_distribution(rq, q, ModulationConfig::fixed(1.0, 1));
  ASSERT_TRUE(one.fired);
  EXPECT_GT(one.dist.probs[0], one.dist.probs[1]);
  const ModulationResult zero = modulated_distribution(rq, q, ModulationConfig::fixed(0.0, 1));
  ASSERT_TRUE(zero.fired);
  EXPECT_GT(zero.dist.probs[1], zero.dist.probs[0]);
  // Brute force: softmax over the head of alpha*q_para + (1-alpha)*q_cont.
  const double lq0 = 3.0 - std::log(std::exp(3.0) + 1.0), lq1 = -std::log(std::exp(3.0) + 1.0);
  const double z = std::exp(lq0) + std::exp(lq1);
  EXPECT_NEAR(one.dist.probs[0], std::exp(lq0) / z, 1e-12);
}

TEST(ModulatedDistribution, ReportsEntropiesAndGain) {
  const LogitVector rq{{0.0, 0.0, 0.0, 0.0}}, q{{0.0, 0.0, 0.0, 0.0}};
  const ModulationResult r = modulated_distribution(rq, q, ModulationConfig::fixed(0.5));
  EXPECT_NEAR(r.cg.h_cont, 2.0, 1e-12);
  EXPECT_NEAR(r.cg.h_para, 2.0, 1e-12);
  EXPECT_NEAR(r.cg.cg, 0.0, 1e-12);
}

TEST(ModulatedDistribution, AlwaysNormalized) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 2 + t % 50;
    ModulationConfig c = t % 3 == 0 ? ModulationConfig::adaptive(1 + t % 12) : ModulationConfig::fixed((t % 11) / 10.0, 1 + t % 12);
    c.policy.epsilon = (t % 5) - 2.0;
    const ModulationResult r = modulated_distribution(testing::random_logits(rng, n), testing::random_logits(rng, n), c);
    EXPECT_NEAR(sum(r.dist), 1.0, 1e-6);
    for (double p : r.dist.probs) EXPECT_GE(p, 0.0);
  }
}

TEST(ModulatedDistribution, HeadKLargerThanVocabIsClamped) {
  const LogitVector rq{{0.0, 0.3, 0.1}}, q{{3.0, 0.0, 0.0}};
  const ModulationResult r = modulated_distribution(rq, q, ModulationConfig::fixed(1.0, 50));
  EXPECT_TRUE(r.fired);
  for (double p : r.dist.probs) EXPECT_GT(p, 0.0);
}

TEST(ModulatedDistribution, ConflictOutsideHeadGetsZero) {
  const LogitVector rq{{0.0, 0.3, -4.0}}, q{{3.0, 0.0, -4.0}};
  const ModulationResult r = modulated_distribution(rq, q, ModulationConfig::fixed(1.0, 1));
  ASSERT_TRUE(r.fired);
  EXPECT_EQ(r.dist.probs[2], 0.0);
}

TEST(ModulatedDistribution, AdaptiveAlphaUsesStepEntropies) {
  const LogitVector rq{{0.0, 0.3, 0.1}}, q{{3.0, 0.0, 0.0}};
  const ModulationResult r = modulated_distribution(rq, q, ModulationConfig::adaptive());
  ASSERT_TRUE(r.fired);
  EXPECT_DOUBLE_EQ(r.alpha_used, r.cg.h_cont / (r.cg.h_para + r.cg.h_cont));
  EXPECT_GT(r.alpha_used, 0.5);
}

TEST(ModulatedDistribution, BaselineNeverFires) {
  const LogitVector rq{{0.0, 0.3}}, q{{3.0, 0.0}};
  const ModulationResult r = modulated_distribution(rq, q, ModulationConfig::baseline());
  EXPECT_FALSE(r.fired);
  EXPECT_LT(r.cg.cg, 0.0);
  const TokenDistribution ref = softmax(rq);
  EXPECT_EQ(std::memcmp(r.dist.probs.data(), ref.probs.data(), ref.size() * sizeof(double)), 0);
}

TEST(ModulatedDistribution, EpsilonShiftsThreshold) {
  const LogitVector rq{{0.0, 0.3}}, q{{3.0, 0.0}};
  ModulationConfig c = ModulationConfig::fixed(1.0, 1);
  EXPECT_TRUE(modulated_distribution(rq, q, c).fired);
  c.policy.epsilon = -1.0;  // threshold -h_cont; cg is about -0.72 here
  EXPECT_FALSE(modulated_distribution(rq, q, c).fired);
}

TEST(ModulatedDistribution, Validation) {
  EXPECT_THROW(modulated_distribution({{0.0, 1.0}}, {{0.0}}, ModulationConfig::fixed(0.5)), ShapeError);
  ModulationConfig c;
  c.alpha = 2.0;
  EXPECT_THROW(modulated_distribution({{0.0, 1.0}}, {{0.0, 1.0}}, c), InvalidArgument);
  c.alpha = 0.5;
  c.head_k = 0;
  EXPECT_THROW(modulated_distribution({{0.0, 1.0}}, {{0.0, 1.0}}, c), InvalidArgument);
  EXPECT_THROW(ModulationConfig::fixed(-0.5), InvalidArgument);
}

}  // namespace
}  // namespace ckplug
