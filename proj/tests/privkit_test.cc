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

#include "fedcert/privkit.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "fedcert/errors.h"
#include "gtest/gtest.h"
#include "oracle.h"

namespace fedcert {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(ClipTest, Examples) {
  std::vector<double> big = {1.2, 1.6};  // norm 2
  auto c = Clip(big, 1.0);
  EXPECT_DOUBLE_EQ(c[0], 0.6);
  EXPECT_DOUBLE_EQ(c[1], 0.8);
  std::vector<double> small = {0.3, 0.4};
  EXPECT_EQ(Clip(small, 1.0), small);
  std::vector<double> zero(4, 0.0);
  EXPECT_EQ(Clip(zero, 1.0), zero);
  EXPECT_THROW(Clip(small, 0.0), ConfigError);
  EXPECT_THROW(Clip(small, -1.0), ConfigError);
}

TEST(ClipTest, BoundedAndIdempotent) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(1 + rng() % 20);
    for (double& x : v) x = n(rng);
    const double s = std::exp(n(rng) / 5.0);
    const auto c = Clip(v, s);
    EXPECT_LE(L2Norm(c), s + 1e-12);
    EXPECT_EQ(Clip(c, s), c);
  }
}

TEST(GaussianNoiseTest, ZeroSigmaAndDeterminism) {
  EXPECT_EQ(GaussianNoise(5, 0.0, 3.0, uint64_t{9}), std::vector<double>(5, 0.0));
  EXPECT_EQ(GaussianNoise(5, 1.0, 3.0, uint64_t{9}), GaussianNoise(5, 1.0, 3.0, uint64_t{9}));
  EXPECT_NE(GaussianNoise(5, 1.0, 3.0, uint64_t{9}), GaussianNoise(5, 1.0, 3.0, uint64_t{10}));
}

TEST(GaussianNoiseTest, VarianceSigmaTimesS) {
  const auto v = GaussianNoise(1000000, 1.0, 2.0, uint64_t{42});
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= v.size();
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= v.size() - 1;
  EXPECT_NEAR(var, 4.0, 0.02);
}

TEST(GaussianRdpTest, Examples) {
  EXPECT_DOUBLE_EQ(GaussianRdp(2, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(GaussianRdp(2, 2.0), 0.25);
  EXPECT_DOUBLE_EQ(GaussianRdp(64, std::sqrt(32.0)), 1.0);
  EXPECT_EQ(GaussianRdp(2, 0.0), kInf);
}

TEST(SubsampledRdpTest, Examples) {
  EXPECT_EQ(SubsampledRdp(5, 0.0, 1.0), 0.0);
  // log(1 + 1e-4 * min{4(e^0.25 - 1), 2 e^0.25}).
  EXPECT_NEAR(SubsampledRdp(2, 0.01, 2.0), std::log1p(1e-4 * 4.0 * std::expm1(0.25)), 1e-17);
  EXPECT_NEAR(SubsampledRdp(2, 0.01, 2.0), 1.13604e-4, 1e-9);
  for (int a : {2, 7, 64}) {
    for (double s : {0.3, 1.0, 5.0}) EXPECT_EQ(SubsampledRdp(a, 1.0, s), GaussianRdp(a, s));
  }
  EXPECT_THROW(SubsampledRdp(1, 0.5, 1.0), UsageError);
  EXPECT_THROW(SubsampledRdp(2, 1.5, 1.0), UsageError);
}

TEST(SubsampledRdpTest, AmplificationOnGrid) {
  for (int a : DefaultOrders()) {
    for (double q : {0.001, 0.01, 0.1, 0.3, 0.5, 0.9, 0.99, 1.0}) {
      for (double s : {0.3, 0.5, 1.0, 2.0, 5.0, 20.0}) {
        EXPECT_LE(SubsampledRdp(a, q, s), GaussianRdp(a, s)) << a << " " << q << " " << s;
        EXPECT_LE(SampledGaussianRdp(a, q, s), GaussianRdp(a, s) * (1 + 1e-12))
            << a << " " << q << " " << s;
        EXPECT_LE(SampledGaussianRdp(a, q, s), SubsampledRdp(a, q, s) * (1 + 1e-12) + 1e-300)
            << a << " " << q << " " << s;
      }
    }
  }
}

// Exact binomial expansion evaluated directly in 50-digit arithmetic.
TEST(SampledGaussianRdpTest, MatchesHighPrecisionSum) {
  using oracle::Real;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uq(1e-4, 0.999), us(0.5, 10.0);
  for (int t = 0; t < 200; ++t) {
    const int a = 2 + static_cast<int>(rng() % 63);
    const double q = uq(rng), s = us(rng);
    Real sum = 0, binom = 1;
    for (int j = 0; j <= a; ++j) {
      if (j > 0) binom = binom * (a - j + 1) / j;
      sum += binom * pow(Real(1) - Real(q), a - j) * pow(Real(q), j) *
             exp(Real(j) * (j - 1) / (2 * Real(s) * Real(s)));
    }
    const double want = (log(sum) / (a - 1)).convert_to<double>();
    EXPECT_NEAR(SampledGaussianRdp(a, q, s), want, 1e-10 * std::max(want, 1e-6))
        << a << " " << q << " " << s;
  }
}

TEST(AccumulateTest, Linearity) {
  RdpLedger ledger;
  const auto zero = std::vector<double>(ledger.orders.size(), 0.0);
  RdpLedger z = Accumulate(ledger, zero);
  EXPECT_EQ(z.totals, ledger.totals);
  EXPECT_EQ(z.rounds_applied, 1);

  const auto c1 = RdpCurve(RdpBound::kSampledGaussian, ledger.orders, 0.1, 1.0);
  const auto c2 = RdpCurve(RdpBound::kGeneralSubsampled, ledger.orders, 0.3, 2.0);
  RdpLedger t = ledger;
  for (int i = 0; i < 5; ++i) t = Accumulate(t, c1);
  for (size_t i = 0; i < c1.size(); ++i) EXPECT_NEAR(t.totals[i], 5 * c1[i], 1e-12 * c1[i]);
  RdpLedger both = Accumulate(Accumulate(ledger, c1), c2);
  for (size_t i = 0; i < c1.size(); ++i) EXPECT_EQ(both.totals[i], c1[i] + c2[i]);

  std::vector<double> short_curve(3, 0.0);
  EXPECT_THROW(Accumulate(ledger, short_curve), UsageError);
}

TEST(RdpToDpTest, ZeroTotalsGridSearch) {
  RdpLedger ledger;
  double want = kInf;
  for (int a : ledger.orders) want = std::min(want, -std::log(0.5) / (a - 1.0));
  const auto r = RdpToDp(ledger, 0.5);
  EXPECT_GT(r.epsilon, 0.0);
  EXPECT_NEAR(r.epsilon, want, 1e-15);
  EXPECT_EQ(r.optimal_order, 64);
}

TEST(RdpToDpTest, Errors) {
  RdpLedger empty;
  empty.orders.clear();
  empty.totals.clear();
  EXPECT_THROW(RdpToDp(empty, 0.1), UsageError);
  EXPECT_THROW(RdpToDp(RdpLedger{}, 0.0), ConfigError);
}

TEST(RdpToDpTest, HypothesisTestingConversionIsTighter) {
  RdpLedger ledger;
  const auto c = RdpCurve(RdpBound::kSampledGaussian, ledger.orders, 0.1, 1.0);
  for (int i = 0; i < 10; ++i) ledger = Accumulate(ledger, c);
  EXPECT_LT(RdpToDp(ledger, 1e-5, PrivacyLevel::kUser, Conversion::kHypothesisTesting).epsilon,
            RdpToDp(ledger, 1e-5).epsilon);
}

double UserEpsilon(double sigma, double q, int rounds, double delta) {
  RdpLedger ledger;
  const auto c = RdpCurve(RdpBound::kSampledGaussian, ledger.orders, q, sigma);
  for (int t = 0; t < rounds; ++t) ledger = Accumulate(ledger, c);
  return RdpToDp(ledger, delta).epsilon;
}

TEST(RdpToDpTest, UserLevelTableValues) {
  EXPECT_NEAR(UserEpsilon(3.0, 0.1, 3, 0.0029), 0.2808, 0.1 * 0.2808);
  EXPECT_NEAR(UserEpsilon(0.5, 0.1, 3, 0.0029), 6.9269, 0.1 * 6.9269);
}

TEST(RdpToDpTest, MonotoneInRoundsAndSigma) {
  for (auto bound : {RdpBound::kSampledGaussian, RdpBound::kGeneralSubsampled}) {
    for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
      RdpLedger ledger;
      const auto c = RdpCurve(bound, ledger.orders, 0.1, sigma);
      const auto c_more = RdpCurve(bound, ledger.orders, 0.1, sigma * 2);
      RdpLedger more_noise;
      double last = 0.0;
      for (int t = 1; t <= 10; ++t) {
        ledger = Accumulate(ledger, c);
        more_noise = Accumulate(more_noise, c_more);
        const double eps = RdpToDp(ledger, 1e-5).epsilon;
        EXPECT_GE(eps, last);
        EXPECT_LE(RdpToDp(more_noise, 1e-5).epsilon, eps);
        last = eps;
      }
    }
  }
}

TEST(RdpToDpTest, HugeNoiseIsNearZero) {
  EXPECT_LT(UserEpsilon(1e6, 0.1, 3, 0.0029), 0.1);
}

TEST(GroupDpTest, Examples) {
  EXPECT_EQ(GroupDp(0.37, 1e-4, 1), std::make_pair(0.37, 1e-4));
  EXPECT_EQ(GroupDp(0.37, 1e-4, 0), std::make_pair(0.0, 0.0));
  const auto g = GroupDp(0.5, 1e-3, 3);
  EXPECT_DOUBLE_EQ(g.first, 1.5);
  EXPECT_NEAR(g.second, oracle::GroupDp(0.5, 1e-3, 3).second, 1e-18);
  EXPECT_NEAR(g.second, 5.3670030992e-3, 1e-12);
  EXPECT_EQ(GroupDp(0.5, 0.0, 4), std::make_pair(2.0, 0.0));
  EXPECT_THROW(GroupDp(0.5, 0.0, -1), DomainError);
}

TEST(ParallelComposeTest, Examples) {
  std::vector<double> e = {0.1, 0.5, 0.3};
  EXPECT_EQ(ParallelCompose(e), 0.5);
  std::vector<double> zeros(4, 0.0);
  EXPECT_EQ(ParallelCompose(zeros), 0.0);
  std::vector<double> one = {0.7};
  EXPECT_EQ(ParallelCompose(one), 0.7);
  EXPECT_THROW(ParallelCompose(std::vector<double>{}), UsageError);
}

TEST(ParallelComposeTest, PermutationAndDuplication) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> e(1 + rng() % 10);
    for (double& x : e) x = u(rng);
    const double base = ParallelCompose(e);
    std::shuffle(e.begin(), e.end(), rng);
    EXPECT_EQ(ParallelCompose(e), base);
    e.push_back(e[rng() % e.size()]);
    EXPECT_EQ(ParallelCompose(e), base);
  }
}

TEST(InstanceLedgerSetTest, UnselectedUsersStayAtZero) {
  InstanceLedgerSet set(3, 1e-5);
  const auto curve = RdpCurve(RdpBound::kSampledGaussian, DefaultOrders(), 0.05, 1.0);
  set.RecordLocalSteps(1, curve, 10);
  EXPECT_GT(set.EndRound(), 0.0);
  EXPECT_EQ(set.user_epsilon(0), 0.0);
  EXPECT_EQ(set.user_epsilon(2), 0.0);
  EXPECT_EQ(set.global_epsilon(), set.user_epsilon(1));
  EXPECT_EQ(set.ledger(1).rounds_applied, 10);
  const double before = set.user_epsilon(1);
  EXPECT_EQ(set.EndRound(), before);  // carried forward
  EXPECT_EQ(set.GlobalReport(2).level, PrivacyLevel::kInstance);
}

}  // namespace
}  // namespace fedcert
