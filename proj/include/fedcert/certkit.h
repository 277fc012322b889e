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

// Certification from Monte-Carlo ensembles of DP-trained models.
//
// Given a mechanism that is (eps, delta)-DP at user or instance level, the
// formulas here bound how far k poisoned users (instances) can move the
// expected class confidences or an expected attack cost. All formulas are
// level agnostic: the caller decides what k counts.

#ifndef FEDCERT_CERTKIT_H_
#define FEDCERT_CERTKIT_H_

#include <span>
#include <string>
#include <vector>

#include "fedcert/attackkit.h"
#include "fedcert/datakit.h"
#include "fedcert/modelkit.h"

namespace fedcert {

// Monte-Carlo estimate of the expected confidence vector for one test input.
struct EnsembleEstimate {
  std::vector<double> mean;  // F~_c, mean over the O samples
  int samples = 0;           // O
  int top = 0;               // A
  int runner_up = 1;         // B
  double psi = 1.0;          // error tolerance used for calibration
  double top_lower = 0.0;    // lower bound on F_A (F~_A when uncalibrated)
  double runner_up_upper = 0.0;  // upper bound on F_B
  bool calibrated = false;
};

// Component-wise mean of O probability vectors; A and B are the two largest
// entries with ties going to the lower class index. Throws UsageError when
// there are no samples or they disagree in length.
EnsembleEstimate EstimateExpectation(std::span<const std::vector<double>> samples);

// sqrt(log(1/psi) / (2 O)).
double HoeffdingMargin(double psi, int samples);

// F_A - margin and F_B + margin, each clamped to [0, 1].
EnsembleEstimate HoeffdingCalibrate(const EnsembleEstimate& estimate, double psi);

// F_A > e^{2 eps} F_B + (1 + e^eps) delta.
bool CheckOneAdversary(double f_a, double f_b, double epsilon, double delta);

// (1 / 2eps) log[(F_A (e^eps - 1) + delta) / (F_B (e^eps - 1) + delta)],
// clamped at 0. Returns +infinity when the denominator is zero (F_B = 0 and
// delta = 0). The prediction is certified for every k < K.
double CertifiedK(double f_a, double f_b, double epsilon, double delta);

struct CertifiedPrediction {
  int top = 0;
  int runner_up = 1;
  double f_a = 0.0;      // bound on F_A that fed K
  double f_b = 0.0;      // bound on F_B that fed K
  double k_bound = 0.0;  // K
  bool used_calibration = false;
};

// K for an estimate, using the calibrated bounds when present.
CertifiedPrediction CertifyPrediction(const EnsembleEstimate& estimate,
                                      double epsilon, double delta);

enum class CostKind { kBackdoor, kLabelFlip };
enum class SignRegime { kNonnegative, kNonpositive };

struct CostEvaluation {
  double value = 0.0;      // mean of clamped per-sample costs
  size_t clamped = 0;      // samples whose cost exceeded C_bar
};

// Backdoor: mean loss on (x + trigger, y*) over eval_set. Label flip: mean
// loss on (x, y*) over the source-class examples. Per-sample costs are
// clamped to [0, cost_bound] before averaging.
CostEvaluation EvaluateAttackCost(CostKind kind, const ModelParams& params,
                                  const Dataset& eval_set, const Pattern& pattern,
                                  int target_label, int source_class,
                                  double cost_bound);

// Unclamped variant (cost_bound = +inf).
double AttackCost(CostKind kind, const ModelParams& params, const Dataset& eval_set,
                  const Pattern& pattern, int target_label, int source_class);

struct CostBounds {
  double j_clean = 0.0;
  int k = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  double cost_bound = 0.0;  // C_bar
  SignRegime regime = SignRegime::kNonnegative;
  double lower = 0.0;
  double upper = 0.0;
};

// Bounds on J(D') for k poisoned units given J(D). Throws ConfigError when
// |J(D)| > C_bar or J has the wrong sign for the regime.
CostBounds ComputeCostBounds(double j_clean, double epsilon, double delta, int k,
                             double cost_bound, SignRegime regime);

// Lower bound on the number of poisoned units needed to reach
// J(D') <= J(D) / tau (nonnegative costs) or J(D') <= tau J(D) (nonpositive
// costs). Throws DomainError when tau is outside the admissible range.
double MinAttackers(double j_clean, double epsilon, double delta, double tau,
                    double cost_bound, SignRegime regime);

struct SampleCertificate {
  bool correct = false;
  double k_bound = 0.0;
};

// Fraction of samples that are correct and satisfy k < K.
double CertifiedAccuracy(std::span<const SampleCertificate> samples, double k);

}  // namespace fedcert

#endif  // FEDCERT_CERTKIT_H_
