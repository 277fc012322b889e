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

#include "fedcert/fedsim.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedcert/errors.h"

namespace fedcert {
namespace {

void AddInto(std::vector<double>& acc, std::span<const double> v) {
  for (size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
}

std::vector<double> Difference(const ModelParams& after, const ModelParams& before) {
  std::vector<double> d(after.size());
  for (size_t i = 0; i < d.size(); ++i) d[i] = after.flat[i] - before.flat[i];
  return d;
}

double LowerMedian(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

// Local datasets for every user, poisoned where the attack says so.
std::vector<Dataset> LocalDatasets(const Dataset& data, const Partition& partition,
                                   const std::optional<AttackSpec>& attack,
                                   PrivacyLevel level) {
  std::vector<Dataset> local(partition.num_users());
  if (attack && attack->k > 0) {
    const PoisonedView view(data, partition, *attack,
                            level == PrivacyLevel::kUser ? AttackLevel::kUser
                                                         : AttackLevel::kInstance);
    for (size_t u = 0; u < local.size(); ++u) local[u] = view.LocalDataset(u);
  } else {
    for (size_t u = 0; u < local.size(); ++u) {
      local[u] = Subset(data, partition.users[u]);
    }
  }
  return local;
}

bool IsAdversarialUser(const std::optional<AttackSpec>& attack, size_t user) {
  return attack && user < static_cast<size_t>(attack->k);
}

void CheckRun(const FederationConfig& config, Algorithm expected,
              const Partition& partition) {
  ValidateConfig(config);
  if (config.algorithm != expected) {
    throw ConfigError("config algorithm is " + AlgorithmName(config.algorithm) +
                      ", expected " + AlgorithmName(expected));
  }
  if (partition.num_users() != config.num_users) {
    throw ConfigError("partition has " + std::to_string(partition.num_users()) +
                      " users, config N=" + std::to_string(config.num_users));
  }
  for (const auto& u : partition.users) {
    if (u.empty()) throw ConfigError("partition contains an empty user");
  }
}

std::vector<size_t> SampleUsers(const FederationConfig& config, int round) {
  Rng rng = MakeRng(config.seed, Stream::kUserSampling, static_cast<uint64_t>(round));
  return SampleWithoutReplacement(config.num_users, config.UsersPerRound(), rng);
}

SgdOptions OptionsFor(const FederationConfig& config) {
  return {config.learning_rate, config.momentum, config.weight_decay};
}

// E epochs of minibatch SGD over shuffled local data.
ModelParams LocalEpochs(const FederationConfig& config, const ModelParams& start,
                        const Dataset& local, int round, size_t user) {
  const size_t batch = BatchSize(config.batch_fraction, local.size());
  Rng rng = MakeRng(config.seed, Stream::kLocalBatches,
                    static_cast<uint64_t>(round), user);
  std::vector<size_t> order(local.size());
  std::iota(order.begin(), order.end(), size_t{0});
  ModelParams w = start;
  SgdState state;
  const SgdOptions opts = OptionsFor(config);
  std::vector<LabeledExample> buf;
  for (int e = 0; e < config.local_epochs; ++e) {
    Shuffle(order, rng);
    for (size_t begin = 0; begin < order.size(); begin += batch) {
      const size_t end = std::min(order.size(), begin + batch);
      buf.clear();
      for (size_t j = begin; j < end; ++j) buf.push_back(local[order[j]]);
      const auto g = Grad(w, buf);
      w = SgdStep(w, g.batch_mean, opts, state);
    }
  }
  return w;
}

// One DP-SGD step: sample L examples without replacement, clip each
// per-example gradient to S, add N(0, sigma^2 S^2) to the sum, divide by L.
ModelParams DpSgdStep(const FederationConfig& config, const ModelParams& w,
                      const Dataset& local, Rng& batch_rng, Rng& noise_rng,
                      SgdState& state) {
  const size_t batch = BatchSize(config.batch_fraction, local.size());
  const auto picked = SampleWithoutReplacement(local.size(), batch, batch_rng);
  std::vector<double> sum(w.size(), 0.0);
  for (size_t j : picked) {
    const auto g = ExampleGradient(w, local[j]);
    AddInto(sum, Clip(g, config.clip_threshold));
  }
  const auto noise =
      GaussianNoise(w.size(), config.noise_multiplier, config.clip_threshold, noise_rng);
  AddInto(sum, noise);
  for (double& v : sum) v /= static_cast<double>(batch);
  return SgdStep(w, sum, OptionsFor(config), state);
}

std::vector<double> StepCurve(const FederationConfig& config, double rate,
                              double noise) {
  const auto orders = DefaultOrders();
  return RdpCurve(config.rdp_bound, orders, rate, noise);
}

// Actual per-round user sampling rate m / N.
double UserRate(const FederationConfig& config) {
  return static_cast<double>(config.UsersPerRound()) /
         static_cast<double>(config.num_users);
}

// Noise multiplier relative to the whole-update sensitivity. Per-layer
// strategies clip each of L scopes at S, so one user moves the sum by up to
// S sqrt(L) while every coordinate still receives noise of scale sigma S.
double UserLevelNoise(const FederationConfig& config, size_t clip_scopes) {
  const bool per_layer = config.clipping == ClippingStrategy::kPerLayer ||
                         config.clipping == ClippingStrategy::kPerLayerMedian;
  if (!per_layer || clip_scopes <= 1) return config.noise_multiplier;
  return config.noise_multiplier / std::sqrt(static_cast<double>(clip_scopes));
}

// Shared server loop of plain and user-level DP FedAvg.
TrainedRun RunFedAvgLoop(const FederationConfig& config, const ModelParams& init,
                         const Dataset& data, const Partition& partition,
                         const std::optional<AttackSpec>& attack, bool private_run) {
  const auto local = LocalDatasets(data, partition, attack, PrivacyLevel::kUser);
  const size_t m = config.UsersPerRound();
  TrainedRun run;
  run.params = init;
  run.informal_dp = private_run && (config.clipping == ClippingStrategy::kFlatMedian ||
                                    config.clipping == ClippingStrategy::kPerLayerMedian);
  RdpLedger ledger;
  const auto curve = private_run
                         ? StepCurve(config, UserRate(config),
                                     UserLevelNoise(config, init.layers.size()))
                         : std::vector<double>();
  for (int t = 1; t <= config.rounds; ++t) {
    RoundRecord rec;
    rec.round = t;
    rec.selected = SampleUsers(config, t);
    std::vector<std::vector<double>> deltas;
    deltas.reserve(m);
    for (size_t u : rec.selected) {
      const ModelParams w = LocalEpochs(config, run.params, local[u], t, u);
      auto delta = Difference(w, run.params);
      if (IsAdversarialUser(attack, u)) delta = ScaleUpdate(delta, attack->scale);
      rec.update_norms.push_back(L2Norm(delta));
      deltas.push_back(std::move(delta));
    }
    std::vector<double> update;
    if (private_run) {
      Rng noise_rng = MakeRng(config.seed, Stream::kServerNoise, static_cast<uint64_t>(t));
      auto agg = Aggregate(deltas, run.params.layers, config.clipping,
                           config.clip_threshold, config.noise_multiplier, noise_rng);
      update = std::move(agg.update);
      rec.thresholds = std::move(agg.thresholds);
      rec.contribution_norms = std::move(agg.contribution_norms);
      ledger = Accumulate(ledger, curve);
      rec.epsilon = RdpToDp(ledger, config.delta, PrivacyLevel::kUser).epsilon;
    } else {
      update.assign(run.params.size(), 0.0);
      for (const auto& d : deltas) AddInto(update, d);
      for (double& v : update) v /= static_cast<double>(m);
      rec.epsilon = std::numeric_limits<double>::infinity();
    }
    AddInto(run.params.flat, update);
    run.rounds.push_back(std::move(rec));
  }
  if (private_run) {
    run.privacy = RdpToDp(ledger, config.delta, PrivacyLevel::kUser);
  } else {
    run.privacy.epsilon = std::numeric_limits<double>::infinity();
    run.privacy.delta = config.delta;
    run.privacy.rounds = config.rounds;
  }
  return run;
}

}  // namespace

std::string AlgorithmName(Algorithm a) {
  switch (a) {
    case Algorithm::kUserDpFedAvg:
      return "userdp-fedavg";
    case Algorithm::kInsDpFedSgd:
      return "insdp-fedsgd";
    case Algorithm::kInsDpFedAvg:
      return "insdp-fedavg";
    case Algorithm::kPlainFedAvg:
      return "plain-fedavg";
  }
  return "?";
}

Algorithm ParseAlgorithm(const std::string& name) {
  for (auto a : {Algorithm::kUserDpFedAvg, Algorithm::kInsDpFedSgd,
                 Algorithm::kInsDpFedAvg, Algorithm::kPlainFedAvg}) {
    if (AlgorithmName(a) == name) return a;
  }
  throw ConfigError("unknown algorithm '" + name + "'");
}

std::string ClippingStrategyName(ClippingStrategy s) {
  switch (s) {
    case ClippingStrategy::kFlat:
      return "flat";
    case ClippingStrategy::kPerLayer:
      return "per-layer";
    case ClippingStrategy::kFlatMedian:
      return "flat-median";
    case ClippingStrategy::kPerLayerMedian:
      return "per-layer-median";
  }
  return "?";
}

ClippingStrategy ParseClippingStrategy(const std::string& name) {
  for (auto s : {ClippingStrategy::kFlat, ClippingStrategy::kPerLayer,
                 ClippingStrategy::kFlatMedian, ClippingStrategy::kPerLayerMedian}) {
    if (ClippingStrategyName(s) == name) return s;
  }
  throw ConfigError("unknown clipping strategy '" + name + "'");
}

size_t FederationConfig::UsersPerRound() const {
  // The 1e-9 slack keeps q = 20/30 with N = 30 at m = 20 despite rounding.
  const double m = std::ceil(user_sampling_prob * static_cast<double>(num_users) - 1e-9);
  return std::max<size_t>(1, static_cast<size_t>(std::max(0.0, m)));
}

void ValidateConfig(const FederationConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (c.num_users < 1) fail("N must be >= 1");
  if (!(c.user_sampling_prob > 0.0 && c.user_sampling_prob <= 1.0)) fail("q must lie in (0,1]");
  if (!(c.batch_fraction > 0.0 && c.batch_fraction <= 1.0)) fail("batch fraction p must lie in (0,1]");
  if (!(c.noise_multiplier >= 0.0)) fail("sigma must be >= 0");
  if (!(c.clip_threshold > 0.0)) fail("clipping threshold S must be > 0");
  if (!(c.delta > 0.0 && c.delta < 1.0)) fail("delta must lie in (0,1)");
  if (c.rounds < 1) fail("T must be >= 1");
  if (c.learning_rate < 0.0) fail("learning rate must be >= 0");
  if ((c.algorithm == Algorithm::kUserDpFedAvg || c.algorithm == Algorithm::kPlainFedAvg) &&
      c.local_epochs < 1) {
    fail("E must be >= 1");
  }
  if (c.algorithm == Algorithm::kInsDpFedAvg && c.local_steps < 1) fail("V must be >= 1");
}

PrivacyLevel LevelFor(Algorithm algorithm) {
  return (algorithm == Algorithm::kInsDpFedSgd || algorithm == Algorithm::kInsDpFedAvg)
             ? PrivacyLevel::kInstance
             : PrivacyLevel::kUser;
}

size_t BatchSize(double batch_fraction, size_t local_size) {
  const auto l = static_cast<size_t>(std::llround(batch_fraction * static_cast<double>(local_size)));
  return std::clamp<size_t>(l, 1, std::max<size_t>(local_size, 1));
}

AggregateResult Aggregate(std::span<const std::vector<double>> deltas,
                          std::span<const LayerView> layers,
                          ClippingStrategy strategy, double threshold,
                          double sigma, Rng& rng) {
  if (deltas.empty()) throw UsageError("Aggregate: no deltas");
  const size_t dim = deltas.front().size();
  for (const auto& d : deltas) {
    if (d.size() != dim) throw ShapeError("Aggregate: deltas differ in length");
  }
  if (!(threshold > 0.0)) throw ConfigError("clipping threshold must be > 0");

  // Clipping scopes: the whole vector, or one per layer view.
  std::vector<LayerView> scopes;
  const bool per_layer = strategy == ClippingStrategy::kPerLayer ||
                         strategy == ClippingStrategy::kPerLayerMedian;
  if (per_layer) {
    if (layers.empty()) throw UsageError("per-layer clipping needs layer views");
    scopes.assign(layers.begin(), layers.end());
  } else {
    scopes.push_back({"all", 0, dim});
  }
  const bool median = strategy == ClippingStrategy::kFlatMedian ||
                      strategy == ClippingStrategy::kPerLayerMedian;

  AggregateResult out;
  out.update.assign(dim, 0.0);
  out.contribution_norms.assign(deltas.size(), std::vector<double>(scopes.size(), 0.0));
  for (size_t s = 0; s < scopes.size(); ++s) {
    const auto& scope = scopes[s];
    auto slice = [&](const std::vector<double>& v) {
      return std::span<const double>(v).subspan(scope.offset, scope.length);
    };
    double s_eff = threshold;
    if (median) {
      std::vector<double> norms;
      for (const auto& d : deltas) norms.push_back(L2Norm(slice(d)));
      s_eff = LowerMedian(std::move(norms));
    }
    out.thresholds.push_back(s_eff);
    for (size_t i = 0; i < deltas.size(); ++i) {
      std::vector<double> clipped;
      if (s_eff > 0.0) {
        clipped = Clip(slice(deltas[i]), s_eff);
      } else {
        clipped.assign(scope.length, 0.0);
      }
      out.contribution_norms[i][s] = L2Norm(clipped);
      for (size_t j = 0; j < scope.length; ++j) out.update[scope.offset + j] += clipped[j];
    }
    const auto noise = GaussianNoise(scope.length, sigma, s_eff, rng);
    for (size_t j = 0; j < scope.length; ++j) out.update[scope.offset + j] += noise[j];
  }
  for (double& v : out.update) v /= static_cast<double>(deltas.size());
  return out;
}

AggregateResult Aggregate(std::span<const std::vector<double>> deltas,
                          std::span<const LayerView> layers,
                          ClippingStrategy strategy, double threshold,
                          double sigma, uint64_t seed) {
  Rng rng(Mix64(seed));
  return Aggregate(deltas, layers, strategy, threshold, sigma, rng);
}

TrainedRun RunPlainFedAvg(const FederationConfig& config, const ModelParams& init,
                          const Dataset& data, const Partition& partition,
                          const std::optional<AttackSpec>& attack) {
  CheckRun(config, Algorithm::kPlainFedAvg, partition);
  return RunFedAvgLoop(config, init, data, partition, attack, /*private_run=*/false);
}

TrainedRun RunUserDpFedAvg(const FederationConfig& config, const ModelParams& init,
                           const Dataset& data, const Partition& partition,
                           const std::optional<AttackSpec>& attack) {
  CheckRun(config, Algorithm::kUserDpFedAvg, partition);
  return RunFedAvgLoop(config, init, data, partition, attack, /*private_run=*/true);
}

TrainedRun RunInsDpFedSgd(const FederationConfig& config, const ModelParams& init,
                          const Dataset& data, const Partition& partition,
                          const std::optional<AttackSpec>& attack) {
  CheckRun(config, Algorithm::kInsDpFedSgd, partition);
  const auto local = LocalDatasets(data, partition, attack, PrivacyLevel::kInstance);
  const size_t m = config.UsersPerRound();
  // Each instance is used with probability p * (m/N); the noise on the
  // averaged update is equivalent to a global multiplier sigma * sqrt(m).
  const auto curve = StepCurve(config, config.batch_fraction * UserRate(config),
                               config.noise_multiplier * std::sqrt(static_cast<double>(m)));
  TrainedRun run;
  run.params = init;
  RdpLedger ledger;
  for (int t = 1; t <= config.rounds; ++t) {
    RoundRecord rec;
    rec.round = t;
    rec.selected = SampleUsers(config, t);
    std::vector<double> sum(run.params.size(), 0.0);
    for (size_t u : rec.selected) {
      Rng batch_rng = MakeRng(config.seed, Stream::kLocalBatches, static_cast<uint64_t>(t), u);
      Rng noise_rng = MakeRng(config.seed, Stream::kLocalNoise, static_cast<uint64_t>(t), u);
      SgdState state;
      const ModelParams w = DpSgdStep(config, run.params, local[u], batch_rng, noise_rng, state);
      const auto delta = Difference(w, run.params);
      rec.update_norms.push_back(L2Norm(delta));
      AddInto(sum, delta);
    }
    for (double& v : sum) v /= static_cast<double>(m);
    AddInto(run.params.flat, sum);
    ledger = Accumulate(ledger, curve);
    rec.epsilon = RdpToDp(ledger, config.delta, PrivacyLevel::kInstance).epsilon;
    run.rounds.push_back(std::move(rec));
  }
  run.privacy = RdpToDp(ledger, config.delta, PrivacyLevel::kInstance);
  return run;
}

TrainedRun RunInsDpFedAvg(const FederationConfig& config, const ModelParams& init,
                          const Dataset& data, const Partition& partition,
                          const std::optional<AttackSpec>& attack) {
  CheckRun(config, Algorithm::kInsDpFedAvg, partition);
  const auto local = LocalDatasets(data, partition, attack, PrivacyLevel::kInstance);
  const size_t m = config.UsersPerRound();
  const auto curve = StepCurve(config, config.batch_fraction, config.noise_multiplier);
  InstanceLedgerSet ledgers(config.num_users, config.delta);
  TrainedRun run;
  run.params = init;
  run.user_local_steps.assign(config.num_users, 0);
  for (int t = 1; t <= config.rounds; ++t) {
    RoundRecord rec;
    rec.round = t;
    rec.selected = SampleUsers(config, t);
    std::vector<double> sum(run.params.size(), 0.0);
    for (size_t u : rec.selected) {
      Rng batch_rng = MakeRng(config.seed, Stream::kLocalBatches, static_cast<uint64_t>(t), u);
      Rng noise_rng = MakeRng(config.seed, Stream::kLocalNoise, static_cast<uint64_t>(t), u);
      SgdState state;
      ModelParams w = run.params;
      for (int v = 0; v < config.local_steps; ++v) {
        w = DpSgdStep(config, w, local[u], batch_rng, noise_rng, state);
      }
      ledgers.RecordLocalSteps(u, curve, config.local_steps);
      run.user_local_steps[u] += config.local_steps;
      const auto delta = Difference(w, run.params);
      rec.update_norms.push_back(L2Norm(delta));
      AddInto(sum, delta);
    }
    for (double& v : sum) v /= static_cast<double>(m);
    AddInto(run.params.flat, sum);
    rec.epsilon = ledgers.EndRound();
    run.rounds.push_back(std::move(rec));
  }
  run.privacy = ledgers.GlobalReport(config.rounds);
  run.user_epsilons = ledgers.user_epsilons();
  return run;
}

TrainedRun Train(const FederationConfig& config, const ModelParams& init,
                 const Dataset& data, const Partition& partition,
                 const std::optional<AttackSpec>& attack) {
  switch (config.algorithm) {
    case Algorithm::kUserDpFedAvg:
      return RunUserDpFedAvg(config, init, data, partition, attack);
    case Algorithm::kInsDpFedSgd:
      return RunInsDpFedSgd(config, init, data, partition, attack);
    case Algorithm::kInsDpFedAvg:
      return RunInsDpFedAvg(config, init, data, partition, attack);
    case Algorithm::kPlainFedAvg:
      return RunPlainFedAvg(config, init, data, partition, attack);
  }
  throw ConfigError("unknown algorithm");
}

// Instance-level FedAvg assumes the worst-case user that is selected in
// every round, which upper-bounds the parallel-composition maximum.
PrivacyReport AccountantReport(const FederationConfig& config, size_t clip_scopes) {
  ValidateConfig(config);
  const auto orders = DefaultOrders();
  RdpLedger ledger;
  switch (config.algorithm) {
    case Algorithm::kPlainFedAvg: {
      PrivacyReport r;
      r.epsilon = std::numeric_limits<double>::infinity();
      r.delta = config.delta;
      r.rounds = config.rounds;
      return r;
    }
    case Algorithm::kUserDpFedAvg: {
      const auto curve =
          StepCurve(config, UserRate(config), UserLevelNoise(config, clip_scopes));
      for (int t = 0; t < config.rounds; ++t) ledger = Accumulate(ledger, curve);
      return RdpToDp(ledger, config.delta, PrivacyLevel::kUser);
    }
    case Algorithm::kInsDpFedSgd: {
      const double m = static_cast<double>(config.UsersPerRound());
      const auto curve = StepCurve(config, config.batch_fraction * UserRate(config),
                                   config.noise_multiplier * std::sqrt(m));
      for (int t = 0; t < config.rounds; ++t) ledger = Accumulate(ledger, curve);
      return RdpToDp(ledger, config.delta, PrivacyLevel::kInstance);
    }
    case Algorithm::kInsDpFedAvg: {
      const auto curve = StepCurve(config, config.batch_fraction, config.noise_multiplier);
      for (int t = 0; t < config.rounds * config.local_steps; ++t) {
        ledger = Accumulate(ledger, curve);
      }
      auto r = RdpToDp(ledger, config.delta, PrivacyLevel::kInstance);
      r.rounds = config.rounds;
      return r;
    }
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace fedcert
