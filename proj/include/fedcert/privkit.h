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

// Differential-privacy primitives and the Renyi-DP accountant.
//
// The accountant tracks RDP on an integer order grid. Two per-step curves
// are available for a subsampled Gaussian mechanism:
//
//   kSampledGaussian     exact RDP of the Poisson-subsampled Gaussian for
//                        integer orders (binomial expansion). Tight; this is
//                        the default used by all training algorithms.
//   kGeneralSubsampled   the generic subsampling amplification bound for
//                        an arbitrary base mechanism specialised to the
//                        Gaussian (eps(inf) = inf). Looser, kept for
//                        comparison.
//
// Conversion to (eps, delta) minimises over the grid either
//   kStandard:           R(a) - log(delta) / (a - 1)
//   kHypothesisTesting:  R(a) + log((a-1)/a) - (log(delta) + log(a)) / (a-1).

#ifndef FEDCERT_PRIVKIT_H_
#define FEDCERT_PRIVKIT_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedcert/random.h"

namespace fedcert {

double L2Norm(std::span<const double> v);

// delta / max(1, |delta|_2 / S). Throws ConfigError when S <= 0.
std::vector<double> Clip(std::span<const double> delta, double threshold);

// A draw from N(0, sigma^2 S^2 I). sigma == 0 gives exact zeros.
std::vector<double> GaussianNoise(size_t dimension, double sigma,
                                  double threshold, uint64_t seed);
std::vector<double> GaussianNoise(size_t dimension, double sigma,
                                  double threshold, Rng& rng);

// a / (2 sigma^2); +infinity when sigma == 0.
double GaussianRdp(double order, double effective_noise);

// Generic amplification-by-subsampling bound, capped at GaussianRdp
// (subsampling never increases RDP). Integer orders only.
double SubsampledRdp(int order, double sampling_prob, double effective_noise);

// Exact RDP of the subsampled Gaussian at an integer order.
double SampledGaussianRdp(int order, double sampling_prob,
                          double effective_noise);

enum class RdpBound { kSampledGaussian, kGeneralSubsampled };
enum class Conversion { kStandard, kHypothesisTesting };
enum class PrivacyLevel { kUser, kInstance };

std::string PrivacyLevelName(PrivacyLevel level);

// Integers 2..64.
std::vector<int> DefaultOrders();

std::vector<double> RdpCurve(RdpBound bound, std::span<const int> orders,
                             double sampling_prob, double effective_noise);

struct RdpLedger {
  std::vector<int> orders = DefaultOrders();
  std::vector<double> totals = std::vector<double>(orders.size(), 0.0);
  int rounds_applied = 0;

  bool operator==(const RdpLedger&) const = default;
};

// Order-wise sum; throws UsageError when the curve is not on the grid.
RdpLedger Accumulate(const RdpLedger& ledger, std::span<const double> curve);

struct PrivacyReport {
  double epsilon = 0.0;
  double delta = 0.0;
  int optimal_order = 0;
  PrivacyLevel level = PrivacyLevel::kUser;
  int rounds = 0;
};

PrivacyReport RdpToDp(const RdpLedger& ledger, double delta,
                      PrivacyLevel level = PrivacyLevel::kUser,
                      Conversion conversion = Conversion::kStandard);

// (k eps, (1 - e^{k eps}) / (1 - e^eps) delta). k = 0 returns (0, 0).
std::pair<double, double> GroupDp(double epsilon, double delta, int k);

// Maximum of the per-user epsilons. Throws UsageError when empty.
double ParallelCompose(std::span<const double> per_user_epsilons);

// Per-user local accountants for instance-level FedAvg. A user that is not
// selected in a round keeps its epsilon; the global epsilon is the maximum.
class InstanceLedgerSet {
 public:
  InstanceLedgerSet(size_t num_users, double delta);

  // Adds `steps` copies of `step_curve` to the user's ledger and refreshes
  // its epsilon.
  void RecordLocalSteps(size_t user, std::span<const double> step_curve,
                        int steps);
  // Recomputes the global epsilon; call once per round.
  double EndRound();

  const RdpLedger& ledger(size_t user) const { return ledgers_[user]; }
  double user_epsilon(size_t user) const { return epsilons_[user]; }
  const std::vector<double>& user_epsilons() const { return epsilons_; }
  double global_epsilon() const { return global_epsilon_; }
  PrivacyReport GlobalReport(int rounds) const;

 private:
  double delta_;
  std::vector<RdpLedger> ledgers_;
  std::vector<double> epsilons_;
  std::vector<int> optimal_orders_;
  double global_epsilon_ = 0.0;
};

}  // namespace fedcert

#endif  // FEDCERT_PRIVKIT_H_
