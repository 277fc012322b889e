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

// Federated training: plain FedAvg and the three DP variants (user-level
// FedAvg, instance-level FedSGD, instance-level FedAvg), with pluggable
// server-side clipping and attack injection.

#ifndef FEDCERT_FEDSIM_H_
#define FEDCERT_FEDSIM_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedcert/attackkit.h"
#include "fedcert/datakit.h"
#include "fedcert/modelkit.h"
#include "fedcert/privkit.h"
#include "fedcert/random.h"

namespace fedcert {

enum class Algorithm { kUserDpFedAvg, kInsDpFedSgd, kInsDpFedAvg, kPlainFedAvg };
enum class ClippingStrategy { kFlat, kPerLayer, kFlatMedian, kPerLayerMedian };

std::string AlgorithmName(Algorithm a);
Algorithm ParseAlgorithm(const std::string& name);
std::string ClippingStrategyName(ClippingStrategy s);
ClippingStrategy ParseClippingStrategy(const std::string& name);

struct FederationConfig {
  Algorithm algorithm = Algorithm::kUserDpFedAvg;
  size_t num_users = 10;          // N
  double user_sampling_prob = 1;  // q
  int rounds = 1;                 // T
  int local_epochs = 1;           // E (FedAvg variants)
  int local_steps = 1;            // V (instance-level FedAvg)
  double learning_rate = 0.1;     // eta
  double momentum = 0.0;
  double weight_decay = 0.0;
  double batch_fraction = 0.1;    // p = L / |D_i|
  double clip_threshold = 1.0;    // S
  double noise_multiplier = 0.0;  // sigma
  double delta = 1e-5;
  ClippingStrategy clipping = ClippingStrategy::kFlat;
  RdpBound rdp_bound = RdpBound::kSampledGaussian;
  uint64_t seed = 0;

  // m = max(ceil(q N), 1).
  size_t UsersPerRound() const;
  bool operator==(const FederationConfig&) const = default;
};

// Throws ConfigError when an invariant is violated.
void ValidateConfig(const FederationConfig& config);

PrivacyLevel LevelFor(Algorithm algorithm);

// Local batch size L = max(1, round(p * n)).
size_t BatchSize(double batch_fraction, size_t local_size);

struct AggregateResult {
  std::vector<double> update;  // (sum of clipped deltas + noise) / m
  // Threshold actually used per clipping scope (one entry for flat).
  std::vector<double> thresholds;
  // contribution_norms[i][s]: norm of user i's clipped delta in scope s.
  std::vector<std::vector<double>> contribution_norms;
};

// Server-side clipping and noising of m user deltas. Flat strategies treat
// the vector as one scope; per-layer strategies clip each layer view
// separately. Median strategies replace S by the lower median of the scope's
// norms this round. Noise N(0, sigma^2 S_eff^2) is added per scope to the
// sum before dividing by m.
AggregateResult Aggregate(std::span<const std::vector<double>> deltas,
                          std::span<const LayerView> layers,
                          ClippingStrategy strategy, double threshold,
                          double sigma, Rng& rng);
AggregateResult Aggregate(std::span<const std::vector<double>> deltas,
                          std::span<const LayerView> layers,
                          ClippingStrategy strategy, double threshold,
                          double sigma, uint64_t seed);

struct RoundRecord {
  int round = 0;
  std::vector<size_t> selected;
  std::vector<double> update_norms;  // submitted delta norms, before clipping
  std::vector<std::vector<double>> contribution_norms;
  std::vector<double> thresholds;
  double epsilon = 0.0;  // cumulative after this round
};

struct TrainedRun {
  ModelParams params;
  PrivacyReport privacy;
  std::vector<RoundRecord> rounds;
  // Median clipping makes the threshold data dependent; the reported
  // epsilon uses the nominal S and is informal.
  bool informal_dp = false;
  // Instance-level FedAvg: per-user epsilon and local DP-SGD step counts.
  std::vector<double> user_epsilons;
  std::vector<int> user_local_steps;
};

// Shared entry point; dispatches on config.algorithm.
TrainedRun Train(const FederationConfig& config, const ModelParams& init,
                 const Dataset& data, const Partition& partition,
                 const std::optional<AttackSpec>& attack = std::nullopt);

TrainedRun RunPlainFedAvg(const FederationConfig& config, const ModelParams& init,
                          const Dataset& data, const Partition& partition,
                          const std::optional<AttackSpec>& attack = std::nullopt);
TrainedRun RunUserDpFedAvg(const FederationConfig& config, const ModelParams& init,
                           const Dataset& data, const Partition& partition,
                           const std::optional<AttackSpec>& attack = std::nullopt);
TrainedRun RunInsDpFedSgd(const FederationConfig& config, const ModelParams& init,
                          const Dataset& data, const Partition& partition,
                          const std::optional<AttackSpec>& attack = std::nullopt);
TrainedRun RunInsDpFedAvg(const FederationConfig& config, const ModelParams& init,
                          const Dataset& data, const Partition& partition,
                          const std::optional<AttackSpec>& attack = std::nullopt);

// Privacy cost of a configuration without training. `clip_scopes` is the
// number of layer views; per-layer clipping of L scopes at S has whole-update
// sensitivity S sqrt(L), so the user-level accountant uses sigma / sqrt(L).
PrivacyReport AccountantReport(const FederationConfig& config, size_t clip_scopes = 1);

}  // namespace fedcert

#endif  // FEDCERT_FEDSIM_H_
