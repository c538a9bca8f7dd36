/*
 * Copyright 2026 The WeblyNet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "weblynet/losses.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "oracles.h"
#include "weblynet/errors.h"

namespace weblynet {
namespace {

Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

TEST(LossesTest, BceHalfIsLn2) {
  EXPECT_NEAR(bce_multilabel(vec({0.5}), vec({1})).item(), std::log(2.0),
              1e-15);
  EXPECT_NEAR(bce_multilabel(vec({0.5, 0.5}), vec({1, 0})).item(),
              std::log(2.0), 1e-15);
}

TEST(LossesTest, BcePerfectPredictionIsClampFloor) {
  const double loss = bce_multilabel(vec({1.0}), vec({1})).item();
  EXPECT_NEAR(loss, -std::log(1.0 - kLogEpsilon), 1e-20);
  EXPECT_LT(loss, 2e-7);
  // Clamping keeps the worst case finite.
  EXPECT_NEAR(bce_multilabel(vec({0.0}), vec({1})).item(),
              -std::log(kLogEpsilon), 1e-9);
}

TEST(LossesTest, BceLengthMismatch) {
  EXPECT_THROW(bce_multilabel(vec({0.5, 0.5}), vec({1})), DimensionError);
}

TEST(LossesTest, SymGklExamples) {
  EXPECT_EQ(sym_gkl(vec({0.3, 0.7}), vec({0.3, 0.7})).item(), 0.0);
  EXPECT_NEAR(sym_gkl(vec({0.8}), vec({0.2})).item(), 0.6 * std::log(4.0),
              1e-15);
  EXPECT_NEAR(sym_gkl(vec({0.8}), vec({0.2})).item(), 0.831777, 1e-6);
  EXPECT_THROW(sym_gkl(vec({0.5, 0.5}), vec({0.5})), DimensionError);
}

TEST(LossesTest, SymGklNeedsNoNormalisation) {
  // Outputs of independent sigmoids need not sum to one.
  const double d = sym_gkl(vec({0.9, 0.9, 0.9}), vec({0.1, 0.2, 0.3})).item();
  EXPECT_NEAR(d, testing::sym_gkl_oracle({0.9, 0.9, 0.9}, {0.1, 0.2, 0.3}),
              1e-14);
}

TEST(LossesPropertyTest, DivergenceOverTenThousandPairs) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> len(1, 20);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = len(rng);
    const auto a = testing::positive_values(n, rng);
    const auto b = testing::positive_values(n, rng);
    const double dab = sym_gkl(vec(a), vec(b)).item();
    const double dba = sym_gkl(vec(b), vec(a)).item();
    ASSERT_GE(dab, 0.0);
    ASSERT_LE(std::abs(dab - dba), 1e-12);
    ASSERT_GT(dab, 0.0) << "distinct vectors must diverge";
    ASSERT_EQ(sym_gkl(vec(a), vec(a)).item(), 0.0);
    const double two_sided = generalized_kl(vec(a), vec(b)).item() +
                             generalized_kl(vec(b), vec(a)).item();
    ASSERT_LE(std::abs(dab - two_sided), 1e-12) << "trial " << trial;
    ASSERT_NEAR(dab, testing::sym_gkl_oracle(a, b), 1e-12 * std::max(1.0, dab));
    ASSERT_NEAR(two_sided,
                testing::gkl_oracle(a, b) + testing::gkl_oracle(b, a),
                1e-12 * std::max(1.0, dab));
  }
}

TEST(LossesTest, GeneralizedKlIsZeroOnlyAtEquality) {
  EXPECT_EQ(generalized_kl(vec({0.2, 0.4}), vec({0.2, 0.4})).item(), 0.0);
  EXPECT_GT(generalized_kl(vec({0.2, 0.4}), vec({0.4, 0.2})).item(), 0.0);
}

TEST(LossesTest, PairCounts) {
  EXPECT_EQ(pair_count(2), 1u);
  EXPECT_EQ(pair_count(4), 6u);
  const auto pairs = network_pairs(4);
  ASSERT_EQ(pairs.size(), 6u);
  const std::vector<std::pair<std::size_t, std::size_t>> expected{
      {0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  EXPECT_EQ(pairs, expected);
  EXPECT_EQ(broadcast_alpha(0.5, 3), (std::vector<double>{0.5, 0.5, 0.5}));
}

TEST(LossesTest, CombinedLossWithZeroAlphaIsSumOfBce) {
  const Tensor y = vec({1, 0, 0});
  const std::vector<Tensor> outs{vec({0.7, 0.2, 0.1}), vec({0.4, 0.5, 0.3})};
  const std::vector<double> alphas{0.0};
  const WeblyLoss loss = weblynet_loss(outs, y, alphas);
  const double expected =
      bce_multilabel(outs[0], y).item() + bce_multilabel(outs[1], y).item();
  EXPECT_EQ(loss.total.item(), expected);
  ASSERT_EQ(loss.breakdown.per_pair_divergence.size(), 1u);
}

TEST(LossesTest, CombinedLossRecomposesExactly) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> p(0.01, 0.99);
  for (std::size_t k : {2u, 3u, 4u}) {
    std::vector<Tensor> outs;
    for (std::size_t i = 0; i < k; ++i) outs.push_back(vec({p(rng), p(rng)}));
    std::vector<double> alphas(pair_count(k));
    for (double& a : alphas) a = p(rng) * 3.0;
    const WeblyLoss loss = weblynet_loss(outs, vec({0, 1}), alphas);
    EXPECT_EQ(loss.breakdown.per_network_bce.size(), k);
    EXPECT_EQ(loss.breakdown.per_pair_divergence.size(), pair_count(k));
    EXPECT_EQ(loss.breakdown.total, loss.breakdown.recompose());
    EXPECT_EQ(loss.total.item(), loss.breakdown.total);
    for (double d : loss.breakdown.per_pair_divergence) EXPECT_GE(d, 0.0);
    for (double b : loss.breakdown.per_network_bce) EXPECT_GE(b, 0.0);
  }
}

TEST(LossesTest, CombinedLossContracts) {
  const std::vector<Tensor> outs{vec({0.5}), vec({0.5})};
  EXPECT_THROW(weblynet_loss(outs, vec({1}), std::vector<double>{}),
               ContractError);
  EXPECT_THROW(weblynet_loss(outs, vec({1}), std::vector<double>{0.1, 0.2}),
               ContractError);
  EXPECT_THROW(weblynet_loss(outs, vec({1}), std::vector<double>{-0.1}),
               ContractError);
}

TEST(LossesTest, MeanOverBatchAveragesFields) {
  const std::vector<Tensor> a{vec({0.9}), vec({0.6})};
  const std::vector<Tensor> b{vec({0.2}), vec({0.3})};
  const std::vector<double> alphas{2.0};
  const std::vector<WeblyLoss> parts{weblynet_loss(a, vec({1}), alphas),
                                     weblynet_loss(b, vec({0}), alphas)};
  const WeblyLoss mean = mean_over_batch(parts);
  EXPECT_NEAR(mean.total.item(),
              0.5 * (parts[0].total.item() + parts[1].total.item()), 1e-15);
  EXPECT_NEAR(mean.breakdown.per_pair_divergence[0],
              0.5 * (parts[0].breakdown.per_pair_divergence[0] +
                     parts[1].breakdown.per_pair_divergence[0]),
              1e-15);
  EXPECT_NEAR(mean.breakdown.recompose(), mean.total.item(), 1e-15);
}

}  // namespace
}  // namespace weblynet
