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

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedcert/errors.h"

namespace fedcert {

EnsembleEstimate EstimateExpectation(std::span<const std::vector<double>> samples) {
  if (samples.empty()) throw UsageError("EstimateExpectation: no samples");
  const size_t c = samples.front().size();
  if (c < 2) throw UsageError("EstimateExpectation: need at least two classes");
  EnsembleEstimate est;
  est.mean.assign(c, 0.0);
  for (const auto& s : samples) {
    if (s.size() != c) throw UsageError("EstimateExpectation: ragged samples");
    for (size_t j = 0; j < c; ++j) est.mean[j] += s[j];
  }
  const double n = static_cast<double>(samples.size());
  for (double& v : est.mean) v /= n;
  est.samples = static_cast<int>(samples.size());

  // Strict comparisons keep the lower index on ties.
  size_t a = 0;
  for (size_t j = 1; j < c; ++j) {
    if (est.mean[j] > est.mean[a]) a = j;
  }
  size_t b = (a == 0) ? 1 : 0;
  for (size_t j = 0; j < c; ++j) {
    if (j != a && est.mean[j] > est.mean[b]) b = j;
  }
  est.top = static_cast<int>(a);
  est.runner_up = static_cast<int>(b);
  est.top_lower = est.mean[a];
  est.runner_up_upper = est.mean[b];
  return est;
}

double HoeffdingMargin(double psi, int samples) {
  if (!(psi > 0.0 && psi <= 1.0)) throw DomainError("psi must lie in (0,1]");
  if (samples < 1) throw UsageError("HoeffdingMargin: need at least one sample");
  return std::sqrt(std::log(1.0 / psi) / (2.0 * samples));
}

EnsembleEstimate HoeffdingCalibrate(const EnsembleEstimate& estimate, double psi) {
  const double margin = HoeffdingMargin(psi, estimate.samples);
  EnsembleEstimate out = estimate;
  out.psi = psi;
  out.top_lower = std::clamp(estimate.mean[estimate.top] - margin, 0.0, 1.0);
  out.runner_up_upper = std::clamp(estimate.mean[estimate.runner_up] + margin, 0.0, 1.0);
  out.calibrated = true;
  return out;
}

bool CheckOneAdversary(double f_a, double f_b, double epsilon, double delta) {
  return f_a > std::exp(2.0 * epsilon) * f_b + (1.0 + std::exp(epsilon)) * delta;
}

double CertifiedK(double f_a, double f_b, double epsilon, double delta) {
  if (!(epsilon > 0.0)) throw DomainError("CertifiedK requires epsilon > 0");
  if (f_a <= f_b || std::isinf(epsilon)) return 0.0;
  const double g = std::expm1(epsilon);
  const double den = f_b * g + delta;
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  // (f_a g + delta) / den = 1 + (f_a - f_b) g / den.
  return std::max(0.0, std::log1p((f_a - f_b) * g / den) / (2.0 * epsilon));
}

CertifiedPrediction CertifyPrediction(const EnsembleEstimate& estimate,
                                      double epsilon, double delta) {
  CertifiedPrediction p;
  p.top = estimate.top;
  p.runner_up = estimate.runner_up;
  p.used_calibration = estimate.calibrated;
  p.f_a = estimate.top_lower;
  p.f_b = estimate.runner_up_upper;
  p.k_bound = CertifiedK(p.f_a, p.f_b, epsilon, delta);
  return p;
}

CostEvaluation EvaluateAttackCost(CostKind kind, const ModelParams& params,
                                  const Dataset& eval_set, const Pattern& pattern,
                                  int target_label, int source_class,
                                  double cost_bound) {
  if (eval_set.empty()) throw UsageError("attack cost: empty evaluation set");
  CostEvaluation out;
  double sum = 0.0;
  size_t n = 0;
  for (const auto& ex : eval_set) {
    double cost;
    if (kind == CostKind::kBackdoor) {
      cost = Loss(params, ApplyBackdoor(ex, pattern, target_label));
    } else {
      if (ex.label != source_class) continue;
      cost = Loss(params, {ex.features, target_label});
    }
    if (cost > cost_bound) {
      cost = cost_bound;
      ++out.clamped;
    }
    sum += cost;
    ++n;
  }
  if (n == 0) throw UsageError("label-flip cost: no source-class examples");
  out.value = sum / static_cast<double>(n);
  return out;
}

double AttackCost(CostKind kind, const ModelParams& params, const Dataset& eval_set,
                  const Pattern& pattern, int target_label, int source_class) {
  return EvaluateAttackCost(kind, params, eval_set, pattern, target_label,
                            source_class, std::numeric_limits<double>::infinity())
      .value;
}

CostBounds ComputeCostBounds(double j_clean, double epsilon, double delta, int k,
                             double cost_bound, SignRegime regime) {
  if (std::abs(j_clean) > cost_bound) {
    throw ConfigError("|J(D)| exceeds the cost bound C_bar");
  }
  if (!(epsilon > 0.0)) throw DomainError("cost bounds require epsilon > 0");
  if (k < 0) throw DomainError("k must be >= 0");
  CostBounds b{j_clean, k, epsilon, delta, cost_bound, regime, 0.0, 0.0};
  const double ke = k * epsilon;
  const double g = std::expm1(epsilon);
  const double shrink = -std::expm1(-ke) / g * delta * cost_bound;  // (1-e^{-ke})/(e^e-1) d C
  const double grow = std::expm1(ke) / g * delta * cost_bound;      // (e^{ke}-1)/(e^e-1) d C
  if (regime == SignRegime::kNonnegative) {
    if (j_clean < 0.0) throw ConfigError("nonnegative regime needs J(D) >= 0");
    b.lower = std::max(std::exp(-ke) * j_clean - shrink, 0.0);
    b.upper = std::min(std::exp(ke) * j_clean + grow, cost_bound);
  } else {
    if (j_clean > 0.0) throw ConfigError("nonpositive regime needs J(D) <= 0");
    b.upper = std::min(std::exp(-ke) * j_clean + shrink, 0.0);
    b.lower = std::max(std::exp(ke) * j_clean - grow, -cost_bound);
  }
  return b;
}

double MinAttackers(double j_clean, double epsilon, double delta, double tau,
                    double cost_bound, SignRegime regime) {
  if (!(epsilon > 0.0)) throw DomainError("MinAttackers requires epsilon > 0");
  const double g = std::expm1(epsilon);
  if (regime == SignRegime::kNonnegative) {
    if (!(tau >= 1.0)) throw DomainError("tau must be >= 1");
    const double den = g * j_clean + cost_bound * delta * tau;
    if (!(den > 0.0)) throw DomainError("MinAttackers: J(D) and delta are both zero");
    // tau (g J + C d) / (g J + C d tau) = 1 + (tau - 1) g J / den.
    return std::log1p((tau - 1.0) * g * j_clean / den) / epsilon;
  }
  if (!(j_clean < 0.0)) throw DomainError("nonpositive regime needs J(D) < 0");
  if (!(tau >= 1.0 && tau <= -cost_bound / j_clean)) {
    throw DomainError("tau must lie in [1, -C_bar / J(D)]");
  }
  const double den = g * j_clean - cost_bound * delta;
  if (!(den < 0.0)) throw DomainError("(e^eps - 1) J(D) - C_bar delta must be < 0");
  return std::log1p((tau - 1.0) * g * j_clean / den) / epsilon;
}

double CertifiedAccuracy(std::span<const SampleCertificate> samples, double k) {
  if (samples.empty()) throw UsageError("CertifiedAccuracy: no samples");
  size_t n = 0;
  for (const auto& s : samples) {
    if (s.correct && k < s.k_bound) ++n;
  }
  return static_cast<double>(n) / static_cast<double>(samples.size());
}

}  // namespace fedcert
