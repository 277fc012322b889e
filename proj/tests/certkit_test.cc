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

#include "fedcert/certkit.h"

#include <cmath>
#include <limits>
#include <random>

#include "fedcert/errors.h"
#include "fedcert/privkit.h"
#include "gtest/gtest.h"
#include "oracle.h"
#include "oracle_suite.h"

namespace fedcert {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(EstimateExpectationTest, SingleSample) {
  std::vector<std::vector<double>> s = {{0.2, 0.7, 0.1}};
  const auto e = EstimateExpectation(s);
  EXPECT_EQ(e.mean, s[0]);
  EXPECT_EQ(e.top, 1);
  EXPECT_EQ(e.runner_up, 0);
  EXPECT_EQ(e.samples, 1);
}

TEST(EstimateExpectationTest, TieBreaksLow) {
  std::vector<std::vector<double>> s = {{1.0, 0.0}, {0.0, 1.0}};
  const auto e = EstimateExpectation(s);
  EXPECT_EQ(e.mean, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(e.top, 0);
  EXPECT_EQ(e.runner_up, 1);
}

TEST(EstimateExpectationTest, IdenticalSamples) {
  std::vector<std::vector<double>> s(1000, {0.25, 0.75});
  EXPECT_EQ(EstimateExpectation(s).mean, (std::vector<double>{0.25, 0.75}));
  EXPECT_THROW(EstimateExpectation({}), UsageError);
}

TEST(HoeffdingTest, Examples) {
  EXPECT_EQ(HoeffdingMargin(1.0, 50), 0.0);
  EXPECT_NEAR(HoeffdingMargin(0.01, 1000), 0.047985, 1e-6);
  EXPECT_NEAR(HoeffdingMargin(0.01, 1000), 0.0479852591, 1e-10);
  std::vector<std::vector<double>> s = {{0.55, 0.45}};
  auto e = EstimateExpectation(s);
  const auto same = HoeffdingCalibrate(e, 1.0);
  EXPECT_EQ(same.top_lower, 0.55);
  EXPECT_EQ(same.runner_up_upper, 0.45);
  // O = 1: margin ~ 1.5, larger than the gap.
  const auto wide = HoeffdingCalibrate(e, 0.01);
  EXPECT_LT(wide.top_lower, wide.runner_up_upper);
  EXPECT_EQ(CertifiedK(wide.top_lower, wide.runner_up_upper, 1.0, 1e-3), 0.0);
}

TEST(CheckOneAdversaryTest, Examples) {
  EXPECT_NEAR(oracle::CheckOneRhs(0.1, 0.1, 0.01), 0.14319, 1e-5);
  EXPECT_TRUE(CheckOneAdversary(0.9, 0.1, 0.1, 0.01));
  EXPECT_FALSE(CheckOneAdversary(0.4, 0.4, 0.3, 0.01));
  EXPECT_FALSE(CheckOneAdversary(0.0, 0.0, 0.3, 0.01));
  const double eps = 0.7;
  const double big_delta = 1.0 / (1.0 + std::exp(eps));
  EXPECT_FALSE(CheckOneAdversary(1.0, 0.0, eps, big_delta));
}

TEST(CertifiedKTest, Examples) {
  EXPECT_EQ(CertifiedK(0.3, 0.3, 0.5, 0.01), 0.0);
  EXPECT_NEAR(CertifiedK(0.9, 0.1, 0.1, 0.01), 8.1470, 1e-4);
  EXPECT_NEAR(CertifiedK(0.9, 0.1, 0.1, 0.01), 8.1469986263, 1e-9);
  EXPECT_NEAR(CertifiedK(1.0, 0.0, 0.5, 0.001), 6.4765434566, 1e-9);
  EXPECT_EQ(CertifiedK(0.8, 0.0, 0.5, 0.0), kInf);
  EXPECT_EQ(CertifiedK(0.2, 0.3, 0.5, 0.01), 0.0);
  EXPECT_EQ(CertifiedK(0.9, 0.1, kInf, 0.01), 0.0);
  EXPECT_THROW(CertifiedK(0.9, 0.1, 0.0, 0.01), DomainError);
}

TEST(CertifiedKTest, Monotonicity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    const double eps = 0.05 + 3 * u(rng), delta = 1e-4 * u(rng) + 1e-9;
    const double fb = 0.5 * u(rng), fa = fb + (1 - fb) * u(rng);
    const double k = CertifiedK(fa, fb, eps, delta);
    EXPECT_LE(k, CertifiedK(std::min(1.0, fa + 0.01), fb, eps, delta));
    EXPECT_GE(k, CertifiedK(fa, std::min(fa, fb + 0.01), eps, delta));
    EXPECT_NEAR(CertifiedK(fa, fb, eps, delta * (1 + 1e-9)), k, 1e-6 * (1 + k));
  }
}

// K >= 1 means the one-adversary consistency chain closes:
// e^{2 eps} F_B + (1 + e^eps) delta <= F_A at k = 1 via group DP.
TEST(CertifiedKTest, KAtLeastOneImpliesGroupChain) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int t = 0; t < 2000; ++t) {
    const double eps = 0.01 + u(rng), delta = 1e-3 * u(rng);
    const double fb = 0.3 * u(rng), fa = fb + (1 - fb) * u(rng);
    if (CertifiedK(fa, fb, eps, delta) < 1.0) continue;
    ++checked;
    const auto [e1, d1] = GroupDp(eps, delta, 1);
    // Lower bound on F_A' and upper bound on F_B' under one change.
    const double fa_lo = (fa - d1) * std::exp(-e1);
    const double fb_hi = std::exp(e1) * fb + d1;
    EXPECT_GE(fa_lo + 1e-12, fb_hi);
  }
  EXPECT_GT(checked, 100);
}

TEST(AttackCostTest, Examples) {
  ModelParams uniform = InitParams({ModelKind::kLogistic, 5, 2, 0}, 0);
  Dataset eval = SynthesizeBlobs(20, 5, 2, 1.0, 1);
  const Pattern trig = TailTriggerPattern(5);
  EXPECT_NEAR(AttackCost(CostKind::kBackdoor, uniform, eval, trig, 0, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(AttackCost(CostKind::kLabelFlip, uniform, eval, trig, 0, 1), std::log(2.0), 1e-15);

  // Model that predicts class 0 with certainty whenever the trigger is set.
  ModelParams sure = uniform;
  for (size_t j = 2; j < 5; ++j) sure.flat[j] = 1e4;
  EXPECT_EQ(AttackCost(CostKind::kBackdoor, sure, eval, trig, 0, 1), 0.0);

  Dataset no_source;
  for (const auto& ex : eval) {
    if (ex.label == 0) no_source.push_back(ex);
  }
  EXPECT_THROW(AttackCost(CostKind::kLabelFlip, uniform, no_source, trig, 0, 1), UsageError);
}

TEST(AttackCostTest, ClampFlagsLargeCosts) {
  ModelParams wrong = InitParams({ModelKind::kLogistic, 5, 2, 0}, 0);
  for (size_t j = 2; j < 5; ++j) wrong.flat[5 + j] = 1e4;  // class 1 on trigger
  Dataset eval = SynthesizeBlobs(10, 5, 2, 1.0, 1);
  const auto c = EvaluateAttackCost(CostKind::kBackdoor, wrong, eval, TailTriggerPattern(5), 0,
                                    1, 5.0);
  EXPECT_EQ(c.value, 5.0);
  EXPECT_EQ(c.clamped, eval.size());
}

TEST(CostBoundsTest, Examples) {
  for (int k : {0}) {
    const auto b = ComputeCostBounds(0.37, 0.8, 0.01, k, 2.0, SignRegime::kNonnegative);
    EXPECT_EQ(b.lower, 0.37);
    EXPECT_EQ(b.upper, 0.37);
    const auto n = ComputeCostBounds(-0.37, 0.8, 0.01, k, 2.0, SignRegime::kNonpositive);
    EXPECT_EQ(n.lower, -0.37);
    EXPECT_EQ(n.upper, -0.37);
  }
  const auto b = ComputeCostBounds(0.4, 0.5, 0.01, 2, 0.5, SignRegime::kNonnegative);
  EXPECT_NEAR(b.lower, 0.14228, 1e-5);
  EXPECT_NEAR(b.lower, 0.1422797260, 1e-10);
  EXPECT_EQ(b.upper, 0.5);
  for (int k = 0; k < 10; ++k) {
    EXPECT_EQ(ComputeCostBounds(0.0, 0.5, 0.01, k, 1.0, SignRegime::kNonnegative).lower, 0.0);
  }
  EXPECT_THROW(ComputeCostBounds(0.6, 0.5, 0.01, 1, 0.5, SignRegime::kNonnegative), ConfigError);
}

TEST(CostBoundsTest, SandwichMonotoneInK) {
  for (auto regime : {SignRegime::kNonnegative, SignRegime::kNonpositive}) {
    const double j = regime == SignRegime::kNonnegative ? 0.9 : -0.9;
    double lo = j, hi = j;
    for (int k = 0; k <= 30; ++k) {
      const auto b = ComputeCostBounds(j, 0.3, 1e-3, k, 5.0, regime);
      EXPECT_LE(b.lower, lo);
      EXPECT_GE(b.upper, hi);
      EXPECT_LE(b.lower, j);
      EXPECT_GE(b.upper, j);
      lo = b.lower;
      hi = b.upper;
    }
  }
}

TEST(MinAttackersTest, Examples) {
  EXPECT_EQ(MinAttackers(0.4, 0.5, 0.01, 1.0, 0.5, SignRegime::kNonnegative), 0.0);
  EXPECT_NEAR(MinAttackers(0.4, 0.5, 0.01, 2.0, 0.5, SignRegime::kNonnegative), 1.3489, 1e-4);
  EXPECT_NEAR(MinAttackers(0.4, 0.5, 0.01, 2.0, 0.5, SignRegime::kNonnegative), 1.3488384708,
              1e-9);
  EXPECT_NEAR(MinAttackers(0.4, 0.5, 0.0, 3.0, 0.5, SignRegime::kNonnegative),
              std::log(3.0) / 0.5, 1e-15);
  EXPECT_THROW(MinAttackers(0.4, 0.5, 0.01, 0.5, 0.5, SignRegime::kNonnegative), DomainError);
  EXPECT_THROW(MinAttackers(-0.4, 0.5, 0.01, 2.0, 0.5, SignRegime::kNonpositive), DomainError);
  EXPECT_NO_THROW(MinAttackers(-0.2, 0.5, 0.01, 2.0, 0.5, SignRegime::kNonpositive));
}

// The smallest certified-lower-bound crossing agrees with MinAttackers.
TEST(MinAttackersTest, InvertsLowerBound) {
  const double j = 0.4, eps = 0.5, delta = 0.01, c = 0.5, tau = 2.0;
  const double kmin = MinAttackers(j, eps, delta, tau, c, SignRegime::kNonnegative);
  const int k = static_cast<int>(std::ceil(kmin));
  EXPECT_LE(ComputeCostBounds(j, eps, delta, k, c, SignRegime::kNonnegative).lower, j / tau);
  EXPECT_GT(ComputeCostBounds(j, eps, delta, k - 1, c, SignRegime::kNonnegative).lower, j / tau);
}

TEST(CertifiedAccuracyTest, Examples) {
  std::vector<SampleCertificate> all = {{true, 2.0}, {true, 0.5}};
  EXPECT_EQ(CertifiedAccuracy(all, 0), 1.0);
  std::vector<SampleCertificate> s = {{true, 3}, {true, 1}, {false, 5}, {true, 2}};
  EXPECT_EQ(CertifiedAccuracy(s, 2), 0.25);
  EXPECT_EQ(CertifiedAccuracy(s, 10), 0.0);
}

TEST(InstanceLevelTest, SameNumbersAtEitherLevel) {
  // The formulas are level-agnostic; an instance-level epsilon feeds them unchanged.
  RdpLedger ledger;
  const auto curve = RdpCurve(RdpBound::kSampledGaussian, ledger.orders, 0.05, 4.0);
  for (int i = 0; i < 100; ++i) ledger = Accumulate(ledger, curve);
  const auto user = RdpToDp(ledger, 1e-5, PrivacyLevel::kUser);
  const auto inst = RdpToDp(ledger, 1e-5, PrivacyLevel::kInstance);
  EXPECT_EQ(user.epsilon, inst.epsilon);
  EXPECT_NEAR(inst.epsilon, 0.6546, 0.1 * 0.6546);
  EXPECT_EQ(CertifiedK(0.9, 0.1, inst.epsilon, inst.delta),
            CertifiedK(0.9, 0.1, user.epsilon, user.delta));
  const auto b = ComputeCostBounds(0.3, inst.epsilon, inst.delta, 0, 1.0,
                                   SignRegime::kNonnegative);
  EXPECT_EQ(b.lower, 0.3);
  EXPECT_EQ(b.upper, 0.3);
}

TEST(OracleTest, WorkedValuesMatchOracle) {
  EXPECT_NEAR(CertifiedK(0.9, 0.1, 0.1, 0.01), oracle::CertifiedK(0.9, 0.1, 0.1, 0.01),
              1e-10 * 8.147);
  EXPECT_NEAR(oracle::CertifiedK(0.9, 0.1, 0.1, 0.01), 8.1469986263, 1e-10);
  const auto on = oracle::CostBoundsNonneg(0.4, 0.5, 0.01, 2, 0.5);
  EXPECT_NEAR(on.first, 0.1422797260, 1e-10);
  EXPECT_GT(on.second, 0.5);  // clamped by the library
  EXPECT_NEAR(oracle::MinAttackersNonneg(0.4, 0.5, 0.01, 2.0, 0.5), 1.3488384708, 1e-10);
  EXPECT_NEAR(oracle::HoeffdingMargin(0.01, 1000), 0.0479852591, 1e-10);
  EXPECT_NEAR(oracle::GroupDp(0.5, 1e-3, 3).second, 5.3670030992e-3, 1e-13);
}

class OracleSuiteTest : public ::testing::TestWithParam<uint64_t> {};

TEST_P(OracleSuiteTest, ThousandDrawsWithinTolerance) {
  const auto r = oracle::RunSuite(GetParam(), 1000);
  for (const auto& [name, worst] : r.worst) EXPECT_LE(worst, 1e-10) << name;
  EXPECT_EQ(r.check_one_mismatches, 0);
  EXPECT_GE(r.worst.size(), 8u);
}

INSTANTIATE_TEST_SUITE_P(Seeds, OracleSuiteTest, ::testing::Values(1, 2, 3));

}  // namespace
}  // namespace fedcert
