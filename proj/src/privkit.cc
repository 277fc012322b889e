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

#include "fedcert/errors.h"

namespace fedcert {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double LogSumExp(std::span<const double> xs) {
  const auto top = std::max_element(xs.begin(), xs.end());
  const double mx = *top;
  if (std::isinf(mx)) return mx;
  // log1p keeps precision when the largest term dominates.
  double rest = 0.0;
  for (auto it = xs.begin(); it != xs.end(); ++it) {
    if (it != top) rest += std::exp(*it - mx);
  }
  return mx + std::log1p(rest);
}

// log C(n, j) for j = 0..n via the multiplicative recurrence.
std::vector<double> LogBinomialRow(int n) {
  std::vector<double> row(n + 1, 0.0);
  double c = 1.0;
  for (int j = 1; j <= n; ++j) {
    c = c * static_cast<double>(n - j + 1) / static_cast<double>(j);
    row[j] = std::log(c);
  }
  return row;
}

void CheckOrderAndRate(int order, double sampling_prob) {
  if (order < 2) throw UsageError("RDP order must be an integer >= 2");
  if (!(sampling_prob >= 0.0 && sampling_prob <= 1.0)) {
    throw UsageError("sampling probability must lie in [0,1]");
  }
}

}  // namespace

double L2Norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> Clip(std::span<const double> delta, double threshold) {
  if (!(threshold > 0.0)) {
    throw ConfigError("clipping threshold must be > 0");
  }
  // Rounding can leave a rescaled vector a few ulps above S; vectors within
  // that slack pass through unchanged, which keeps Clip idempotent.
  constexpr double kUlp = std::numeric_limits<double>::epsilon();
  const double limit = threshold * (1.0 + 64 * kUlp);
  std::vector<double> out(delta.begin(), delta.end());
  double norm = L2Norm(out);
  if (norm <= limit) return out;
  const double scale = norm / threshold;
  for (double& v : out) v /= scale;
  while ((norm = L2Norm(out)) > limit) {
    const double shrink = threshold / norm * (1.0 - 4 * kUlp);
    for (double& v : out) v *= shrink;
  }
  return out;
}

std::vector<double> GaussianNoise(size_t dimension, double sigma,
                                  double threshold, Rng& rng) {
  if (sigma < 0.0) throw ConfigError("noise multiplier must be >= 0");
  std::vector<double> out(dimension, 0.0);
  if (sigma == 0.0) return out;
  const double stddev = sigma * threshold;
  NormalSampler normal;
  for (double& v : out) v = stddev * normal(rng);
  return out;
}

std::vector<double> GaussianNoise(size_t dimension, double sigma,
                                  double threshold, uint64_t seed) {
  Rng rng(Mix64(seed));
  return GaussianNoise(dimension, sigma, threshold, rng);
}

double GaussianRdp(double order, double effective_noise) {
  if (effective_noise == 0.0) return kInf;
  return order / (2.0 * effective_noise * effective_noise);
}

double SubsampledRdp(int order, double sampling_prob, double effective_noise) {
  CheckOrderAndRate(order, sampling_prob);
  if (sampling_prob == 0.0) return 0.0;
  const double full = GaussianRdp(order, effective_noise);
  if (sampling_prob == 1.0 || std::isinf(full)) return full;

  const double inv = 1.0 / (2.0 * effective_noise * effective_noise);
  const double log_gamma = std::log(sampling_prob);
  const auto log_binom = LogBinomialRow(order);
  // Gaussian base mechanism: eps(inf) = inf, so every min{2, (e^eps(inf)-1)^j}
  // is 2 and the j = 2 term is min{4(e^eps(2) - 1), 2 e^eps(2)}.
  const double eps2 = 2.0 * inv;
  std::vector<double> terms;
  terms.reserve(order);
  terms.push_back(0.0);
  terms.push_back(2.0 * log_gamma + log_binom[2] +
                  std::min(std::log(4.0) + std::log(std::expm1(eps2)),
                           std::log(2.0) + eps2));
  for (int j = 3; j <= order; ++j) {
    const double eps_j = j * inv;
    terms.push_back(j * log_gamma + log_binom[j] + (j - 1) * eps_j +
                    std::log(2.0));
  }
  const double bound = LogSumExp(terms) / (order - 1);
  return std::min(bound, full);
}

double SampledGaussianRdp(int order, double sampling_prob,
                          double effective_noise) {
  CheckOrderAndRate(order, sampling_prob);
  if (sampling_prob == 0.0) return 0.0;
  if (sampling_prob == 1.0 || effective_noise == 0.0) {
    return GaussianRdp(order, effective_noise);
  }
  const double inv = 1.0 / (2.0 * effective_noise * effective_noise);
  const double log_q = std::log(sampling_prob);
  const double log_1mq = std::log1p(-sampling_prob);
  const auto log_binom = LogBinomialRow(order);
  std::vector<double> terms(order + 1);
  for (int j = 0; j <= order; ++j) {
    terms[j] = log_binom[j] + j * log_q + (order - j) * log_1mq +
               static_cast<double>(j) * (j - 1) * inv;
  }
  return std::max(0.0, LogSumExp(terms) / (order - 1));
}

std::string PrivacyLevelName(PrivacyLevel level) {
  return level == PrivacyLevel::kUser ? "user" : "instance";
}

std::vector<int> DefaultOrders() {
  std::vector<int> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  return orders;
}

std::vector<double> RdpCurve(RdpBound bound, std::span<const int> orders,
                             double sampling_prob, double effective_noise) {
  std::vector<double> curve;
  curve.reserve(orders.size());
  for (int a : orders) {
    curve.push_back(bound == RdpBound::kSampledGaussian
                        ? SampledGaussianRdp(a, sampling_prob, effective_noise)
                        : SubsampledRdp(a, sampling_prob, effective_noise));
  }
  return curve;
}

RdpLedger Accumulate(const RdpLedger& ledger, std::span<const double> curve) {
  if (curve.size() != ledger.orders.size()) {
    throw UsageError("RDP curve length " + std::to_string(curve.size()) +
                     " does not match the ledger's order grid (" +
                     std::to_string(ledger.orders.size()) + ")");
  }
  RdpLedger out = ledger;
  for (size_t i = 0; i < curve.size(); ++i) out.totals[i] += curve[i];
  ++out.rounds_applied;
  return out;
}

PrivacyReport RdpToDp(const RdpLedger& ledger, double delta, PrivacyLevel level,
                      Conversion conversion) {
  if (ledger.orders.empty() || ledger.orders.size() != ledger.totals.size()) {
    throw UsageError("RdpToDp: empty ledger");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw ConfigError("delta must lie in (0,1)");
  }
  PrivacyReport report;
  report.delta = delta;
  report.level = level;
  report.rounds = ledger.rounds_applied;
  double best = kInf;
  int best_order = ledger.orders.front();
  for (size_t i = 0; i < ledger.orders.size(); ++i) {
    const double a = ledger.orders[i];
    double eps;
    if (conversion == Conversion::kStandard) {
      eps = ledger.totals[i] - std::log(delta) / (a - 1.0);
    } else {
      eps = ledger.totals[i] + std::log((a - 1.0) / a) -
            (std::log(delta) + std::log(a)) / (a - 1.0);
    }
    if (eps < best) {
      best = eps;
      best_order = ledger.orders[i];
    }
  }
  report.epsilon = std::max(0.0, best);
  report.optimal_order = best_order;
  return report;
}

std::pair<double, double> GroupDp(double epsilon, double delta, int k) {
  if (k < 0) throw DomainError("group size must be >= 0");
  if (k == 0) return {0.0, 0.0};
  if (k == 1) return {epsilon, delta};
  if (epsilon == 0.0) return {0.0, k * delta};
  // (1 - e^{k eps}) / (1 - e^{eps}) = expm1(k eps) / expm1(eps).
  return {k * epsilon, std::expm1(k * epsilon) / std::expm1(epsilon) * delta};
}

double ParallelCompose(std::span<const double> per_user_epsilons) {
  if (per_user_epsilons.empty()) {
    throw UsageError("ParallelCompose: no users");
  }
  return *std::max_element(per_user_epsilons.begin(), per_user_epsilons.end());
}

InstanceLedgerSet::InstanceLedgerSet(size_t num_users, double delta)
    : delta_(delta),
      ledgers_(num_users),
      epsilons_(num_users, 0.0),
      optimal_orders_(num_users, 0) {
  if (num_users == 0) throw UsageError("InstanceLedgerSet: no users");
}

void InstanceLedgerSet::RecordLocalSteps(size_t user,
                                         std::span<const double> step_curve,
                                         int steps) {
  RdpLedger& ledger = ledgers_.at(user);
  for (int s = 0; s < steps; ++s) ledger = Accumulate(ledger, step_curve);
  if (ledger.rounds_applied > 0) {
    const auto report = RdpToDp(ledger, delta_, PrivacyLevel::kInstance);
    epsilons_[user] = report.epsilon;
    optimal_orders_[user] = report.optimal_order;
  }
}

double InstanceLedgerSet::EndRound() {
  global_epsilon_ = ParallelCompose(epsilons_);
  return global_epsilon_;
}

PrivacyReport InstanceLedgerSet::GlobalReport(int rounds) const {
  PrivacyReport r;
  r.epsilon = global_epsilon_;
  r.delta = delta_;
  r.level = PrivacyLevel::kInstance;
  r.rounds = rounds;
  const auto it = std::max_element(epsilons_.begin(), epsilons_.end());
  r.optimal_order = optimal_orders_[it - epsilons_.begin()];
  return r;
}

}  // namespace fedcert
