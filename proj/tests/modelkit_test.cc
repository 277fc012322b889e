//
// Copyright 2026 The fedcert Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "fedcert/modelkit.h"

#include <cmath>
#include <numeric>
#include <random>

#include "fedcert/errors.h"
#include "gtest/gtest.h"

namespace fedcert {
namespace {

Architecture Logistic(size_t d, int c) { return {ModelKind::kLogistic, d, c, 0}; }
Architecture Mlp(size_t d, int c, size_t h) { return {ModelKind::kMlp, d, c, h}; }

ModelParams RandomParams(const Architecture& arch, std::mt19937_64& rng, double scale) {
  ModelParams p = InitParams(arch, 0);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : p.flat) v = u(rng);
  return p;
}

std::vector<double> RandomVector(size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

TEST(LayoutTest, NamesAndSizes) {
  auto l = LayoutFor(Logistic(3, 2));
  ASSERT_EQ(l.size(), 2u);
  EXPECT_EQ(l[0].name, "weight");
  EXPECT_EQ(l[0].length, 6u);
  EXPECT_EQ(l[1].offset, 6u);
  auto m = LayoutFor(Mlp(4, 3, 5));
  ASSERT_EQ(m.size(), 4u);
  EXPECT_EQ(m[0].name, "hidden.weight");
  EXPECT_EQ(m[3].name, "output.bias");
  EXPECT_EQ(m[3].offset + m[3].length, 4u * 5 + 5 + 5 * 3 + 3);
}

TEST(InitParamsTest, RejectsBadArchitecture) {
  EXPECT_THROW(InitParams(Logistic(0, 2), 0), ConfigError);
  EXPECT_THROW(InitParams(Logistic(2, 1), 0), ConfigError);
  EXPECT_THROW(InitParams(Mlp(2, 2, 0), 0), ConfigError);
}

TEST(PredictConfidenceTest, ZeroParamsUniform) {
  ModelParams p = InitParams(Logistic(4, 3), 0);
  std::vector<double> x = {1.0, -2.0, 0.5, 3.0};
  for (double c : PredictConfidence(p, x)) EXPECT_DOUBLE_EQ(c, 1.0 / 3.0);
}

TEST(PredictConfidenceTest, ShapeMismatch) {
  ModelParams p = InitParams(Logistic(4, 2), 0);
  std::vector<double> x = {1.0};
  EXPECT_THROW(PredictConfidence(p, x), ShapeError);
}

TEST(PredictConfidenceTest, SaturatesMonotonically) {
  ModelParams p = InitParams(Logistic(1, 2), 0);
  std::vector<double> x = {1.0};
  double last = 0.5;
  for (double scale : {1.0, 5.0, 20.0, 100.0, 1000.0}) {
    p.flat = {scale, -scale, 0.0, 0.0};
    const auto c = PredictConfidence(p, x);
    EXPECT_GE(c[0], last);
    last = c[0];
  }
  EXPECT_DOUBLE_EQ(last, 1.0);
}

TEST(PredictConfidenceTest, SumsToOne) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto arch = t % 2 ? Logistic(6, 4) : Mlp(6, 4, 7);
    ModelParams p = RandomParams(arch, rng, 3.0);
    const auto c = PredictConfidence(p, RandomVector(6, rng));
    EXPECT_NEAR(std::accumulate(c.begin(), c.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(PredictConfidenceTest, ShiftInvariant) {
  std::mt19937_64 rng(4);
  ModelParams p = RandomParams(Logistic(3, 4), rng, 1.0);
  const auto x = RandomVector(3, rng);
  const auto before = PredictConfidence(p, x);
  for (size_t c = 0; c < 4; ++c) p.flat[p.layers[1].offset + c] += 123.0;
  const auto after = PredictConfidence(p, x);
  for (size_t c = 0; c < 4; ++c) EXPECT_NEAR(before[c], after[c], 1e-9);
}

TEST(LossTest, UniformBinary) {
  ModelParams p = InitParams(Logistic(2, 2), 0);
  EXPECT_NEAR(Loss(p, {{0.3, 0.1}, 1}), std::log(2.0), 1e-15);
}

TEST(LossTest, ConfidentAndClamped) {
  ModelParams p = InitParams(Logistic(1, 2), 0);
  p.flat = {1e6, -1e6, 0.0, 0.0};
  EXPECT_EQ(Loss(p, {{1.0}, 0}), 0.0);
  EXPECT_NEAR(Loss(p, {{1.0}, 1}), -std::log(1e-12), 1e-9);
  EXPECT_NEAR(Loss(p, {{1.0}, 1}), 27.631021, 1e-6);
}

double MaxFiniteDifferenceError(const ModelParams& p, const LabeledExample& ex) {
  const auto g = ExampleGradient(p, ex);
  const double h = 1e-5;
  double worst = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    ModelParams plus = p, minus = p;
    plus.flat[i] += h;
    minus.flat[i] -= h;
    const double fd = (Loss(plus, ex) - Loss(minus, ex)) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[i]));
  }
  return worst;
}

TEST(GradTest, FiniteDifferenceLogisticTwoFeatures) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    ModelParams p = RandomParams(Logistic(2, 2), rng, 2.0);
    LabeledExample ex{RandomVector(2, rng), static_cast<int>(rng() % 2)};
    EXPECT_LT(MaxFiniteDifferenceError(p, ex), 1e-6);
  }
}

TEST(GradTest, FiniteDifferenceBothFamilies) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t) {
    const auto arch = t % 2 ? Logistic(5, 3) : Mlp(5, 3, 4);
    ModelParams p = RandomParams(arch, rng, 1.0);
    LabeledExample ex{RandomVector(5, rng), static_cast<int>(rng() % 3)};
    EXPECT_LT(MaxFiniteDifferenceError(p, ex), 1e-6) << "trial " << t;
  }
}

TEST(GradTest, SingleAndDuplicated) {
  std::mt19937_64 rng(10);
  ModelParams p = RandomParams(Mlp(3, 2, 4), rng, 1.0);
  LabeledExample ex{RandomVector(3, rng), 1};
  std::vector<LabeledExample> one = {ex}, two = {ex, ex};
  const auto g1 = Grad(p, one);
  EXPECT_EQ(g1.batch_mean, g1.per_example[0]);
  const auto g2 = Grad(p, two);
  ASSERT_EQ(g2.per_example.size(), 2u);
  for (size_t i = 0; i < p.size(); ++i) EXPECT_DOUBLE_EQ(g2.batch_mean[i], g1.batch_mean[i]);
}

TEST(GradTest, EmptyBatch) {
  ModelParams p = InitParams(Logistic(2, 2), 0);
  EXPECT_THROW(Grad(p, std::span<const LabeledExample>()), UsageError);
}

TEST(SgdStepTest, ZeroGradientIsNoOp) {
  std::mt19937_64 rng(1);
  ModelParams p = RandomParams(Logistic(3, 2), rng, 1.0);
  SgdState state;
  std::vector<double> zero(p.size(), 0.0);
  EXPECT_EQ(SgdStep(p, zero, {0.1, 0.0, 0.0}, state).flat, p.flat);
}

TEST(SgdStepTest, UnitLearningRate) {
  std::mt19937_64 rng(3);
  ModelParams p = RandomParams(Logistic(3, 2), rng, 1.0);
  const auto g = RandomVector(p.size(), rng);
  SgdState state;
  ModelParams q = SgdStep(p, g, {1.0, 0.0, 0.0}, state);
  for (size_t i = 0; i < p.size(); ++i) EXPECT_EQ(q.flat[i], p.flat[i] - g[i]);
}

TEST(SgdStepTest, MomentumTwoSteps) {
  std::mt19937_64 rng(5);
  ModelParams p = RandomParams(Logistic(2, 2), rng, 1.0);
  const auto g = RandomVector(p.size(), rng);
  SgdState state;
  const double lr = 0.05;
  ModelParams q = SgdStep(p, g, {lr, 0.9, 0.0}, state);
  q = SgdStep(q, g, {lr, 0.9, 0.0}, state);
  for (size_t i = 0; i < p.size(); ++i) {
    EXPECT_NEAR(p.flat[i] - q.flat[i], lr * (g[i] + 1.9 * g[i]), 1e-15);
  }
}

TEST(SgdStepTest, LengthMismatch) {
  ModelParams p = InitParams(Logistic(2, 2), 0);
  SgdState state;
  std::vector<double> g(2, 0.0);
  EXPECT_THROW(SgdStep(p, g, {}, state), ShapeError);
}

TEST(AccuracyTest, CountsArgmax) {
  ModelParams p = InitParams(Logistic(1, 2), 0);
  p.flat = {1.0, -1.0, 0.0, 0.0};
  Dataset d = {{{1.0}, 0}, {{-1.0}, 1}, {{2.0}, 1}, {{0.0}, 0}};
  EXPECT_DOUBLE_EQ(Accuracy(p, d), 0.75);  // ties go to class 0
}

TEST(CheckpointTest, RoundTrip) {
  std::mt19937_64 rng(12);
  for (const auto& arch : {Logistic(4, 3), Mlp(4, 2, 6)}) {
    ModelParams p = RandomParams(arch, rng, 1.0);
    EXPECT_EQ(ParseCheckpoint(SerializeCheckpoint(p)), p);
  }
}

TEST(CheckpointTest, RejectsCorruption) {
  ModelParams p = InitParams(Logistic(2, 2), 0);
  auto bytes = SerializeCheckpoint(p);
  auto bad_magic = bytes;
  bad_magic[0] ^= 0xff;
  EXPECT_THROW(ParseCheckpoint(bad_magic), FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(ParseCheckpoint(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(ParseCheckpoint(trailing), FormatError);
}

}  // namespace
}  // namespace fedcert
