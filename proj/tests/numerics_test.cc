// Copyright 2026 The Encode Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "encode/numerics.h"

#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "encode/errors.h"
#include "test_util.h"

namespace encode {
namespace {

using testing::random_unit;
using testing::random_vec;

TEST(CosineDistance, ClosedForms) {
  EXPECT_DOUBLE_EQ(cosine_distance(Vec{1, 0}, Vec{0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(cosine_distance(Vec{0.3, -2}, Vec{0.3, -2}), 0.0);
  EXPECT_DOUBLE_EQ(cosine_distance(Vec{1, 0}, Vec{-1, 0}), 2.0);
}

TEST(CosineDistance, Errors) {
  EXPECT_THROW(cosine_distance(Vec{0, 0}, Vec{1, 0}), ZeroNormError);
  EXPECT_THROW(cosine_distance(Vec{1, 0}, Vec{1, 0, 0}), DimError);
}

TEST(CosineDistance, SymmetricAndScaleInvariant) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec a = random_vec(7, rng);
    const Vec b = random_vec(7, rng);
    const double alpha = 0.01 + 100.0 * rng.uniform();
    Vec scaled = a;
    for (double& x : scaled) x *= alpha;
    const double d = cosine_distance(a, b);
    EXPECT_NEAR(d, cosine_distance(b, a), 1e-12);
    EXPECT_NEAR(d, cosine_distance(scaled, b), 1e-12);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
  }
}

TEST(Sim, DividesByBeta) {
  EXPECT_DOUBLE_EQ(sim(Vec{1, 2}, Vec{1, 2}, 20.0), 0.05);
  EXPECT_NEAR(sim(Vec{1, 0}, Vec{0, 1}, 1.0), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(sim(Vec{1, 0}, Vec{-1, 0}, 2.0), -0.5);
}

TEST(Softmax, ClosedForms) {
  const std::vector<double> half = softmax(std::vector<double>{0, 0});
  EXPECT_DOUBLE_EQ(half[0], 0.5);
  EXPECT_DOUBLE_EQ(half[1], 0.5);
  EXPECT_DOUBLE_EQ(softmax(std::vector<double>{-3.7})[0], 1.0);
  const std::vector<double> p = softmax(std::vector<double>{1, 0});
  EXPECT_NEAR(p[0], std::numbers::e / (std::numbers::e + 1.0), 1e-15);
  EXPECT_NEAR(p[0], 0.73106, 1e-5);
  EXPECT_NEAR(p[1], 0.26894, 1e-5);
  EXPECT_THROW(softmax(std::vector<double>{}), EmptyInputError);
}

TEST(Softmax, ShiftInvariantAndStable) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> logits(1 + rng.uniform_index(40));
    for (double& x : logits) x = 10.0 * rng.normal();
    std::vector<double> shifted = logits;
    const double c = 500.0 * rng.normal();
    for (double& x : shifted) x += c;
    const std::vector<double> p = softmax(logits);
    const std::vector<double> q = softmax(shifted);
    EXPECT_NEAR(testing::sum(p), 1.0, 1e-12);
    EXPECT_LE(testing::max_abs_diff(p, q), 1e-12);
  }
  const std::vector<double> huge = softmax(std::vector<double>{1000.0, 999.0});
  EXPECT_NEAR(huge[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

TEST(LogSumExp, MatchesDirectSum) {
  const std::vector<double> x{0.1, -2.0, 1.5};
  double direct = 0.0;
  for (double v : x) direct += std::exp(v);
  EXPECT_NEAR(log_sum_exp(x), std::log(direct), 1e-14);
}

TEST(MatvecT, Examples) {
  const Mat w(2, 1, std::vector<double>{1, 0});
  EXPECT_EQ(matvec_t(w, Vec{3, 4}), (Vec{3}));
  const Vec e{0.5, -1.0, 2.0};
  EXPECT_EQ(matvec_t(Mat::identity(3), e), e);
  EXPECT_EQ(matvec_t(Mat(3, 2), e), (Vec{0, 0}));
  EXPECT_THROW(matvec_t(Mat(2, 2), e), DimError);
  EXPECT_THROW(Mat(2, 2, std::vector<double>{1, 2, 3}), DimError);
}

TEST(MatvecT, Linear) {
  Rng rng(3);
  Mat w(6, 4);
  for (double& x : w.values()) x = rng.normal();
  for (int trial = 0; trial < 50; ++trial) {
    const Vec a = random_vec(6, rng);
    const Vec b = random_vec(6, rng);
    Vec ab(6);
    for (int i = 0; i < 6; ++i) ab[i] = a[i] + b[i];
    const Vec fa = matvec_t(w, a);
    const Vec fb = matvec_t(w, b);
    const Vec fab = matvec_t(w, ab);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(fab[j], fa[j] + fb[j], 1e-10);
  }
}

TEST(AttentionLogit, Variants) {
  const Vec q{1, 0, 0, 0};
  const Vec k{2, 0, 0, 0};
  EXPECT_DOUBLE_EQ(attention_logit(AttentionMetric::kUnifiedSim, q, k, 4.0), 0.25);
  EXPECT_DOUBLE_EQ(attention_logit(AttentionMetric::kScaledDot, q, k, 4.0), 1.0);  // 2 / sqrt(4)
}

TEST(MetricCounters, CountEachEvaluation) {
  reset_metric_counters();
  cosine_distance(Vec{1, 0}, Vec{0, 1});
  sim(Vec{1, 0}, Vec{0, 1}, 1.0);
  scaled_dot(Vec{1, 0}, Vec{0, 1});
  EXPECT_EQ(metric_counters().cosine, 2u);
  EXPECT_EQ(metric_counters().scaled_dot, 1u);
  reset_metric_counters();
  EXPECT_EQ(metric_counters().cosine, 0u);
}

TEST(PairwiseSum, OrderInsensitiveToRoundoff) {
  std::vector<double> terms(100000, 0.1);
  EXPECT_NEAR(pairwise_sum(terms), 10000.0, 1e-9);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  bool same = true;
  for (int i = 0; i < 1'000'000; ++i) same = same && a.next_u64() == b.next_u64();
  EXPECT_TRUE(same);
  Rng c(43);
  EXPECT_NE(Rng(42).next_u64(), c.next_u64());
}

TEST(Rng, SplitIsIndependentOfParentPosition) {
  Rng parent(9);
  const Rng child_before = parent.split(5);
  for (int i = 0; i < 10; ++i) parent.next_u64();
  Rng a = child_before;
  Rng b = parent.split(5);
  EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_NE(parent.split(5).next_u64(), parent.split(6).next_u64());
}

TEST(Rng, DistributionMoments) {
  Rng rng(1);
  const int n = 200000;
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  std::vector<int> counts(7, 0);
  for (int i = 0; i < n; ++i) {
    su += rng.uniform();
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    ++counts[rng.uniform_index(7)];
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
  for (int c : counts) EXPECT_NEAR(static_cast<double>(c) / n, 1.0 / 7.0, 0.005);
}

TEST(Normalized, UnitNormOrError) {
  Rng rng(2);
  const Vec u = random_unit(5, rng);
  EXPECT_NEAR(norm(normalized(Vec{3, 4})), 1.0, 1e-15);
  EXPECT_NEAR(norm(u), 1.0, 1e-12);
  EXPECT_THROW(normalized(Vec{0, 0}), ZeroNormError);
}

}  // namespace
}  // namespace encode
