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

#include "fedcert/harness.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "fedcert/errors.h"
#include "fedcert/privkit.h"
#include "fedcert/random.h"

namespace fedcert {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kRecordFormat = 1;

template <typename T>
void Get(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

double RealFromJson(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

json RealToJson(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string ModelKindName(ModelKind k) { return k == ModelKind::kMlp ? "mlp" : "logistic"; }

ModelKind ParseModelKind(const std::string& s) {
  if (s == "logistic") return ModelKind::kLogistic;
  if (s == "mlp") return ModelKind::kMlp;
  throw ConfigError("unknown model kind '" + s + "'");
}

std::string RdpBoundName(RdpBound b) {
  return b == RdpBound::kSampledGaussian ? "sampled-gaussian" : "general-subsampled";
}

RdpBound ParseRdpBound(const std::string& s) {
  if (s == "sampled-gaussian") return RdpBound::kSampledGaussian;
  if (s == "general-subsampled") return RdpBound::kGeneralSubsampled;
  throw ConfigError("unknown rdp bound '" + s + "'");
}

std::string PartitionName(PartitionStrategy s) {
  return s == PartitionStrategy::kIid ? "iid" : "label-shard";
}

PartitionStrategy ParsePartition(const std::string& s) {
  if (s == "iid") return PartitionStrategy::kIid;
  if (s == "label-shard") return PartitionStrategy::kLabelShard;
  throw ConfigError("unknown partition strategy '" + s + "'");
}

json ToJson(const DataSpec& d) {
  return {{"source", d.source},
          {"train_size", d.train_size},
          {"test_size", d.test_size},
          {"dim", d.dim},
          {"num_classes", d.num_classes},
          {"separation", d.separation},
          {"seed", d.seed},
          {"train_images", d.train_images},
          {"train_labels", d.train_labels},
          {"test_images", d.test_images},
          {"test_labels", d.test_labels},
          {"class_a", d.class_a},
          {"class_b", d.class_b},
          {"max_train", d.max_train},
          {"max_test", d.max_test},
          {"partition", PartitionName(d.partition)},
          {"shards_per_user", d.shards_per_user}};
}

DataSpec DataSpecFromJson(const json& j, DataSpec d) {
  Get(j, "source", d.source);
  Get(j, "train_size", d.train_size);
  Get(j, "test_size", d.test_size);
  Get(j, "dim", d.dim);
  Get(j, "num_classes", d.num_classes);
  Get(j, "separation", d.separation);
  Get(j, "seed", d.seed);
  Get(j, "train_images", d.train_images);
  Get(j, "train_labels", d.train_labels);
  Get(j, "test_images", d.test_images);
  Get(j, "test_labels", d.test_labels);
  Get(j, "class_a", d.class_a);
  Get(j, "class_b", d.class_b);
  Get(j, "max_train", d.max_train);
  Get(j, "max_test", d.max_test);
  if (j.contains("partition")) d.partition = ParsePartition(j.at("partition").get<std::string>());
  Get(j, "shards_per_user", d.shards_per_user);
  return d;
}

json ToJson(const SweepAxes& s) {
  std::vector<std::string> kinds;
  for (auto k : s.kinds) kinds.push_back(AttackKindName(k));
  return {{"sigmas", s.sigmas}, {"ks", s.ks}, {"gammas", s.gammas},
          {"poison_fractions", s.poison_fractions}, {"taus", s.taus}, {"kinds", kinds}};
}

SweepAxes SweepFromJson(const json& j, SweepAxes s) {
  Get(j, "sigmas", s.sigmas);
  Get(j, "ks", s.ks);
  Get(j, "gammas", s.gammas);
  Get(j, "poison_fractions", s.poison_fractions);
  Get(j, "taus", s.taus);
  if (j.contains("kinds")) {
    s.kinds.clear();
    for (const auto& k : j.at("kinds")) s.kinds.push_back(ParseAttackKind(k.get<std::string>()));
  }
  return s;
}

uint64_t Fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string Hex16(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json ConfigIdentity(const ExperimentPlan& plan) {
  json fed = ToJson(plan.federation);
  fed.erase("seed");
  return {{"data", ToJson(plan.data)},
          {"model", {{"kind", ModelKindName(plan.model)},
                     {"hidden", plan.model == ModelKind::kMlp ? plan.hidden : 0},
                     {"init_seed", plan.init_seed}}},
          {"federation", fed},
          {"attack", plan.attack && plan.attack->k > 0 ? ToJson(*plan.attack) : json(nullptr)}};
}

void WriteAtomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  WriteTextFile(tmp, text);
  fs::rename(tmp, path);
}

// A run directory is complete when its record parses, names this plan and
// run, and its checkpoint loads.
std::optional<ModelParams> LoadCompletedRun(const fs::path& dir, const std::string& plan_hash,
                                            int run_index, PrivacyReport* privacy,
                                            double* accuracy) {
  const fs::path record_path = dir / "record.json";
  if (!fs::exists(record_path)) return std::nullopt;
  try {
    const json rec = json::parse(ReadTextFile(record_path));
    if (rec.at("format").get<int>() != kRecordFormat ||
        rec.at("plan_hash").get<std::string>() != plan_hash ||
        rec.at("run_index").get<int>() != run_index) {
      return std::nullopt;
    }
    ModelParams params = ReadCheckpoint((dir / "checkpoint.bin").string());
    const json& pr = rec.at("privacy");
    privacy->epsilon = RealFromJson(pr.at("epsilon"));
    privacy->delta = pr.at("delta").get<double>();
    privacy->optimal_order = pr.at("optimal_order").get<int>();
    privacy->level = pr.at("level").get<std::string>() == "user" ? PrivacyLevel::kUser
                                                                 : PrivacyLevel::kInstance;
    privacy->rounds = pr.at("rounds").get<int>();
    *accuracy = rec.at("metrics").at("clean_accuracy").get<double>();
    return params;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

json RoundsToJson(const std::vector<RoundRecord>& rounds) {
  json out = json::array();
  for (const auto& r : rounds) {
    out.push_back({{"round", r.round},
                   {"selected", r.selected},
                   {"update_norms", r.update_norms},
                   {"contribution_norms", r.contribution_norms},
                   {"thresholds", r.thresholds},
                   {"epsilon", RealToJson(r.epsilon)}});
  }
  return out;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// exception after all workers stop.
template <typename Fn>
void ParallelFor(int n, int jobs, Fn fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (int i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mu);
            if (!error) error = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

std::string KLabel(double k) {
  if (k == std::floor(k) && std::abs(k) < 1e15) {
    return std::to_string(static_cast<long long>(k));
  }
  return FormatReal(k);
}

ExperimentPlan WithAttack(const ExperimentPlan& plan, AttackKind kind, int k, double gamma,
                          double alpha) {
  ExperimentPlan out = plan;
  AttackSpec spec = plan.attack.value_or(AttackSpec{});
  spec.kind = kind;
  spec.k = k;
  spec.scale = gamma;
  spec.poison_fraction = alpha;
  if (spec.pattern.empty()) spec.pattern = TailTriggerPattern(plan.data.dim);
  out.attack = spec;
  return out;
}

const AttackSpec& AttackTemplate(const ExperimentPlan& plan, AttackSpec& storage) {
  storage = plan.attack.value_or(AttackSpec{});
  if (storage.pattern.empty()) storage.pattern = TailTriggerPattern(plan.data.dim);
  return storage;
}

Dataset CostEvalSet(CostKind kind, const Dataset& test, int target_label) {
  if (kind == CostKind::kLabelFlip) return test;
  Dataset out;
  for (const auto& ex : test) {
    if (ex.label != target_label) out.push_back(ex);
  }
  return out;
}

double MeanCost(CostKind kind, const std::vector<ModelParams>& models, const Dataset& eval,
                const AttackSpec& spec, double cost_bound, size_t* clamped) {
  double sum = 0.0;
  for (const auto& m : models) {
    const auto c = EvaluateAttackCost(kind, m, eval, spec.pattern, spec.target_label,
                                      spec.source_class, cost_bound);
    sum += c.value;
    if (clamped) *clamped += c.clamped;
  }
  return sum / static_cast<double>(models.size());
}

}  // namespace

nlohmann::json ToJson(const FederationConfig& c) {
  return {{"algorithm", AlgorithmName(c.algorithm)},
          {"num_users", c.num_users},
          {"user_sampling_prob", c.user_sampling_prob},
          {"rounds", c.rounds},
          {"local_epochs", c.local_epochs},
          {"local_steps", c.local_steps},
          {"learning_rate", c.learning_rate},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"batch_fraction", c.batch_fraction},
          {"clip_threshold", c.clip_threshold},
          {"noise_multiplier", c.noise_multiplier},
          {"delta", c.delta},
          {"clipping", ClippingStrategyName(c.clipping)},
          {"rdp_bound", RdpBoundName(c.rdp_bound)},
          {"seed", c.seed}};
}

FederationConfig FederationConfigFromJson(const nlohmann::json& j,
                                          const FederationConfig& defaults) {
  FederationConfig c = defaults;
  if (j.contains("algorithm")) c.algorithm = ParseAlgorithm(j.at("algorithm").get<std::string>());
  Get(j, "num_users", c.num_users);
  Get(j, "user_sampling_prob", c.user_sampling_prob);
  Get(j, "rounds", c.rounds);
  Get(j, "local_epochs", c.local_epochs);
  Get(j, "local_steps", c.local_steps);
  Get(j, "learning_rate", c.learning_rate);
  Get(j, "momentum", c.momentum);
  Get(j, "weight_decay", c.weight_decay);
  Get(j, "batch_fraction", c.batch_fraction);
  Get(j, "clip_threshold", c.clip_threshold);
  Get(j, "noise_multiplier", c.noise_multiplier);
  Get(j, "delta", c.delta);
  if (j.contains("clipping")) c.clipping = ParseClippingStrategy(j.at("clipping").get<std::string>());
  if (j.contains("rdp_bound")) c.rdp_bound = ParseRdpBound(j.at("rdp_bound").get<std::string>());
  Get(j, "seed", c.seed);
  return c;
}

nlohmann::json ToJson(const AttackSpec& a) {
  return {{"kind", AttackKindName(a.kind)},
          {"k", a.k},
          {"poison_fraction", a.poison_fraction},
          {"scale", a.scale},
          {"pattern", FormatPattern(a.pattern)},
          {"target_label", a.target_label},
          {"source_class", a.source_class}};
}

AttackSpec AttackSpecFromJson(const nlohmann::json& j, const AttackSpec& defaults) {
  AttackSpec a = defaults;
  if (j.contains("kind")) a.kind = ParseAttackKind(j.at("kind").get<std::string>());
  Get(j, "k", a.k);
  Get(j, "poison_fraction", a.poison_fraction);
  Get(j, "scale", a.scale);
  if (j.contains("pattern")) a.pattern = ParsePattern(j.at("pattern").get<std::string>());
  Get(j, "target_label", a.target_label);
  Get(j, "source_class", a.source_class);
  return a;
}

nlohmann::json ToJson(const ExperimentPlan& p) {
  json j = ConfigIdentity(p);
  j["federation"] = ToJson(p.federation);
  j["attack"] = p.attack ? ToJson(*p.attack) : json(nullptr);
  j["repetitions"] = p.repetitions;
  j["psi"] = p.psi;
  j["base_seed"] = p.base_seed;
  j["k_list"] = p.k_list;
  j["cost_bound"] = p.cost_bound;
  j["sweep"] = ToJson(p.sweep);
  return j;
}

ExperimentPlan PlanFromJson(const nlohmann::json& j, const ExperimentPlan& defaults) {
  ExperimentPlan p = defaults;
  if (j.contains("data")) p.data = DataSpecFromJson(j.at("data"), p.data);
  if (j.contains("model")) {
    const json& m = j.at("model");
    if (m.contains("kind")) p.model = ParseModelKind(m.at("kind").get<std::string>());
    Get(m, "hidden", p.hidden);
    Get(m, "init_seed", p.init_seed);
  }
  if (j.contains("federation")) p.federation = FederationConfigFromJson(j.at("federation"), p.federation);
  if (j.contains("attack")) {
    if (j.at("attack").is_null()) {
      p.attack.reset();
    } else {
      p.attack = AttackSpecFromJson(j.at("attack"), p.attack.value_or(AttackSpec{}));
    }
  }
  Get(j, "repetitions", p.repetitions);
  Get(j, "psi", p.psi);
  Get(j, "base_seed", p.base_seed);
  Get(j, "k_list", p.k_list);
  Get(j, "cost_bound", p.cost_bound);
  if (j.contains("sweep")) p.sweep = SweepFromJson(j.at("sweep"), p.sweep);
  return p;
}

nlohmann::json ToJson(const PrivacyReport& r) {
  return {{"epsilon", RealToJson(r.epsilon)},
          {"delta", r.delta},
          {"optimal_order", r.optimal_order},
          {"level", PrivacyLevelName(r.level)},
          {"rounds", r.rounds}};
}

void ValidatePlan(const ExperimentPlan& plan) {
  ValidateConfig(plan.federation);
  if (plan.repetitions < 1) throw ConfigError("repetitions O must be >= 1");
  if (!(plan.psi > 0.0 && plan.psi <= 1.0)) throw ConfigError("psi must lie in (0,1]");
  if (!(plan.cost_bound > 0.0)) throw ConfigError("cost bound must be > 0");
  if (plan.attack) ValidateAttack(*plan.attack);
  for (double s : plan.sweep.sigmas) {
    if (!(s >= 0.0)) throw ConfigError("sweep sigma must be >= 0");
  }
  for (double g : plan.sweep.gammas) {
    if (!(g >= 1.0)) throw ConfigError("sweep gamma must be >= 1");
  }
  for (double a : plan.sweep.poison_fractions) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("sweep poison fraction must lie in [0,1]");
  }
  for (int k : plan.sweep.ks) {
    if (k < 0) throw ConfigError("sweep k must be >= 0");
  }
  for (double t : plan.sweep.taus) {
    if (!(t >= 1.0)) throw ConfigError("sweep tau must be >= 1");
  }
}

std::string ConfigHash(const ExperimentPlan& plan) {
  return Hex16(Fnv1a(ConfigIdentity(plan).dump()));
}

std::string PlanHash(const ExperimentPlan& plan) {
  json j = {{"config", ConfigHash(plan)}, {"base_seed", plan.base_seed}};
  return Hex16(Fnv1a(j.dump()));
}

uint64_t RunSeed(uint64_t base_seed, int run_index) {
  return DeriveSeed(base_seed, {0x72756eULL, static_cast<uint64_t>(run_index)});
}

Materialized Materialize(const ExperimentPlan& plan) {
  const DataSpec& d = plan.data;
  Materialized m;
  if (d.source == "blobs") {
    // One draw split into train and test so both share the class means.
    Dataset all = SynthesizeBlobs(d.train_size + d.test_size, d.dim, d.num_classes,
                                  d.separation, d.seed);
    m.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(d.train_size));
    m.test.assign(all.begin() + static_cast<std::ptrdiff_t>(d.train_size), all.end());
  } else if (d.source == "idx") {
    m.train = LoadIdx(d.train_images, d.train_labels);
    m.test = LoadIdx(d.test_images, d.test_labels);
    if (d.class_a >= 0 && d.class_b >= 0) {
      m.train = FilterBinary(m.train, d.class_a, d.class_b);
      m.test = FilterBinary(m.test, d.class_a, d.class_b);
    }
    if (d.max_train > 0 && m.train.size() > d.max_train) m.train.resize(d.max_train);
    if (d.max_test > 0 && m.test.size() > d.max_test) m.test.resize(d.max_test);
  } else {
    throw ConfigError("unknown data source '" + d.source + "'");
  }
  if (m.train.empty() || m.test.empty()) throw ConfigError("empty train or test set");
  if (d.partition == PartitionStrategy::kIid) {
    m.partition = PartitionIid(m.train.size(), plan.federation.num_users, d.seed);
  } else {
    m.partition = PartitionByLabelShard(m.train, plan.federation.num_users,
                                        d.shards_per_user, d.seed);
  }
  m.arch.kind = plan.model;
  m.arch.input_dim = m.train.front().features.size();
  m.arch.num_classes = std::max({NumClasses(m.train), NumClasses(m.test), 2});
  m.arch.hidden = plan.model == ModelKind::kMlp ? plan.hidden : 0;
  return m;
}

int JobsFromEnvironment() {
  if (const char* env = std::getenv("FEDCERT_JOBS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  out << text;
  if (!out) throw UsageError("failed writing " + path.string());
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string FormatReal(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

EnsembleResult Assemble(const ExperimentPlan& plan, const Materialized& data,
                        const fs::path& plan_dir, std::vector<ModelParams> models,
                        const std::vector<PrivacyReport>& privacy,
                        const std::vector<double>& accuracy) {
  EnsembleResult r;
  r.plan_dir = plan_dir;
  r.plan_hash = PlanHash(plan);
  r.config_hash = ConfigHash(plan);
  r.privacy = privacy.front();
  // Runs can differ (instance-level user selection); keep the largest epsilon.
  for (const auto& p : privacy) {
    if (p.epsilon > r.privacy.epsilon) r.privacy = p;
  }
  double acc_sum = 0.0;
  for (double a : accuracy) acc_sum += a;
  r.mean_run_accuracy = acc_sum / static_cast<double>(accuracy.size());

  const size_t n = data.test.size();
  r.estimates.reserve(n);
  r.test_labels.reserve(n);
  size_t correct = 0;
  std::vector<std::vector<double>> samples(models.size());
  for (size_t i = 0; i < n; ++i) {
    for (size_t o = 0; o < models.size(); ++o) {
      samples[o] = PredictConfidence(models[o], data.test[i].features);
    }
    r.estimates.push_back(EstimateExpectation(samples));
    r.test_labels.push_back(data.test[i].label);
    if (r.estimates.back().top == data.test[i].label) ++correct;
  }
  r.clean_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  r.models = std::move(models);
  return r;
}

}  // namespace

EnsembleResult RunEnsemble(const ExperimentPlan& plan, const std::filesystem::path& root,
                           int jobs) {
  ValidatePlan(plan);
  const std::string plan_hash = PlanHash(plan);
  const fs::path plan_dir = root / "plans" / plan_hash;
  fs::create_directories(plan_dir / "runs");
  WriteAtomically(plan_dir / "plan.json", ToJson(plan).dump(2) + "\n");

  const Materialized data = Materialize(plan);
  const ModelParams init = InitParams(data.arch, plan.init_seed);
  const int O = plan.repetitions;
  std::vector<ModelParams> models(O);
  std::vector<PrivacyReport> privacy(O);
  std::vector<double> accuracy(O, 0.0);
  std::atomic<int> trained{0}, skipped{0}, quarantined{0};

  ParallelFor(O, jobs, [&](int o) {
    const fs::path run_dir = plan_dir / "runs" / std::to_string(o);
    if (auto done = LoadCompletedRun(run_dir, plan_hash, o, &privacy[o], &accuracy[o])) {
      models[o] = std::move(*done);
      ++skipped;
      return;
    }
    if (fs::exists(run_dir)) {
      const fs::path qdir = plan_dir / "quarantine";
      fs::create_directories(qdir);
      int n = 0;
      while (fs::exists(qdir / (std::to_string(o) + "." + std::to_string(n)))) ++n;
      fs::rename(run_dir, qdir / (std::to_string(o) + "." + std::to_string(n)));
      ++quarantined;
    }
    fs::create_directories(run_dir);
    FederationConfig cfg = plan.federation;
    cfg.seed = RunSeed(plan.base_seed, o);
    TrainedRun run = Train(cfg, init, data.train, data.partition, plan.attack);
    const double acc = Accuracy(run.params, data.test);
    WriteCheckpoint((run_dir / "checkpoint.bin").string(), run.params);
    json rec = {{"format", kRecordFormat},
                {"plan_hash", plan_hash},
                {"config_hash", ConfigHash(plan)},
                {"run_index", o},
                {"seed", cfg.seed},
                {"config", ToJson(cfg)},
                {"attack", plan.attack ? ToJson(*plan.attack) : json(nullptr)},
                {"privacy", ToJson(run.privacy)},
                {"informal_dp", run.informal_dp},
                {"metrics", {{"clean_accuracy", acc}}},
                {"rounds", RoundsToJson(run.rounds)},
                {"user_epsilons", run.user_epsilons},
                {"checkpoint", "checkpoint.bin"},
                {"created_unix", static_cast<int64_t>(std::time(nullptr))}};
    WriteAtomically(run_dir / "record.json", rec.dump(1) + "\n");
    privacy[o] = run.privacy;
    accuracy[o] = acc;
    models[o] = std::move(run.params);
    ++trained;
  });

  EnsembleResult r = Assemble(plan, data, plan_dir, std::move(models), privacy, accuracy);
  r.trained = trained;
  r.skipped = skipped;
  r.quarantined = quarantined;
  return r;
}

EnsembleResult LoadEnsemble(const ExperimentPlan& plan, const std::filesystem::path& root) {
  ValidatePlan(plan);
  const std::string plan_hash = PlanHash(plan);
  const fs::path plan_dir = root / "plans" / plan_hash;
  const Materialized data = Materialize(plan);
  const int O = plan.repetitions;
  std::vector<ModelParams> models(O);
  std::vector<PrivacyReport> privacy(O);
  std::vector<double> accuracy(O, 0.0);
  for (int o = 0; o < O; ++o) {
    auto done = LoadCompletedRun(plan_dir / "runs" / std::to_string(o), plan_hash, o,
                                 &privacy[o], &accuracy[o]);
    if (!done) {
      throw UsageError("ensemble " + plan_hash + " is missing run " + std::to_string(o));
    }
    models[o] = std::move(*done);
  }
  EnsembleResult r = Assemble(plan, data, plan_dir, std::move(models), privacy, accuracy);
  r.skipped = O;
  return r;
}

PredictionCertification CertifyPredictionTable(const EnsembleResult& ensemble,
                                               const std::vector<double>& k_list, double psi,
                                               bool write) {
  if (ensemble.estimates.empty()) throw UsageError("certify: empty ensemble");
  PredictionCertification cert;
  cert.k_list = k_list;
  for (size_t i = 0; i < ensemble.estimates.size(); ++i) {
    const auto& raw = ensemble.estimates[i];
    const EnsembleEstimate est = psi < 1.0 ? HoeffdingCalibrate(raw, psi) : raw;
    const auto p = CertifyPrediction(est, ensemble.privacy.epsilon, ensemble.privacy.delta);
    cert.predictions.push_back(p);
    cert.samples.push_back({raw.top == ensemble.test_labels[i], p.k_bound});
  }
  for (double k : k_list) cert.certified_accuracy.push_back(CertifiedAccuracy(cert.samples, k));
  if (write) {
    WriteTextFile(ensemble.plan_dir / "tables" / "cert_pred.csv", PredictionCsv(cert, ensemble));
    WriteTextFile(ensemble.plan_dir / "tables" / "cert_acc.csv", AccuracyCsv(cert));
  }
  return cert;
}

std::string PredictionCsv(const PredictionCertification& cert, const EnsembleResult& /*ensemble*/) {
  std::string out = "sample_id,correct,F_A,F_B,K";
  for (double k : cert.k_list) out += ",k=" + KLabel(k);
  out += "\n";
  for (size_t i = 0; i < cert.samples.size(); ++i) {
    const auto& p = cert.predictions[i];
    out += std::to_string(i) + "," + (cert.samples[i].correct ? "1" : "0");
    out += "," + FormatReal(p.f_a) + "," + FormatReal(p.f_b) + "," + FormatReal(p.k_bound);
    for (double k : cert.k_list) {
      out += (cert.samples[i].correct && k < p.k_bound) ? ",1" : ",0";
    }
    out += "\n";
  }
  return out;
}

std::string AccuracyCsv(const PredictionCertification& cert) {
  std::string out = "k,certified_accuracy\n";
  for (size_t i = 0; i < cert.k_list.size(); ++i) {
    out += KLabel(cert.k_list[i]) + "," + FormatReal(cert.certified_accuracy[i]) + "\n";
  }
  return out;
}

CostKind CostKindFor(AttackKind kind) {
  return kind == AttackKind::kLabelFlip ? CostKind::kLabelFlip : CostKind::kBackdoor;
}

CostCertification CertifyCost(const ExperimentPlan& clean_plan, const EnsembleResult& clean,
                               const std::filesystem::path& root, int jobs) {
  const SweepAxes& axes = clean_plan.sweep;
  if (axes.kinds.empty() || axes.ks.empty()) {
    throw UsageError("certify-cost needs attack kinds and k values on the sweep axes");
  }
  const Materialized data = Materialize(clean_plan);
  AttackSpec storage;
  const AttackSpec& tmpl = AttackTemplate(clean_plan, storage);
  std::vector<int> ks = axes.ks;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  const std::vector<double> gammas = axes.gammas.empty() ? std::vector<double>{1.0} : axes.gammas;
  const std::vector<double> alphas =
      axes.poison_fractions.empty() ? std::vector<double>{1.0} : axes.poison_fractions;

  CostCertification out;
  out.epsilon = clean.privacy.epsilon;
  out.delta = clean.privacy.delta;
  const fs::path tables = clean.plan_dir / "tables";
  std::vector<int> clean_pred;
  for (const auto& e : clean.estimates) clean_pred.push_back(e.top);

  for (AttackKind kind : axes.kinds) {
    const CostKind cost_kind = CostKindFor(kind);
    const Dataset eval = CostEvalSet(cost_kind, data.test, tmpl.target_label);
    const double j_clean = MeanCost(cost_kind, clean.models, eval, tmpl, clean_plan.cost_bound, nullptr);

    std::string min_csv = "tau,min_k\n";
    for (double tau : axes.taus) {
      const double bound = MinAttackers(j_clean, out.epsilon, out.delta, tau,
                                        clean_plan.cost_bound, SignRegime::kNonnegative);
      out.min_attackers.push_back({kind, tau, bound});
      min_csv += FormatReal(tau) + "," + FormatReal(bound) + "\n";
    }
    WriteTextFile(tables / ("min_attackers_" + AttackKindName(kind) + ".csv"), min_csv);

    for (double gamma : gammas) {
      for (double alpha : alphas) {
        CostCell cell;
        cell.kind = kind;
        cell.gamma = gamma;
        cell.poison_fraction = alpha;
        cell.j_clean = j_clean;
        std::string csv = "k,lower,empirical_J,upper\n";
        for (int k : ks) {
          if (kind == AttackKind::kDistributedBackdoor &&
              static_cast<size_t>(k) > tmpl.pattern.size()) {
            continue;  // the trigger cannot be split across more users than pixels
          }
          CostCellRow row;
          row.k = k;
          std::vector<int> pred;
          if (k == 0) {
            row.empirical = j_clean;
            pred = clean_pred;
          } else {
            const ExperimentPlan poisoned = WithAttack(clean_plan, kind, k, gamma, alpha);
            const EnsembleResult ens = RunEnsemble(poisoned, root, jobs);
            row.empirical = MeanCost(cost_kind, ens.models, eval, *poisoned.attack,
                                     clean_plan.cost_bound, &row.clamped);
            for (const auto& e : ens.estimates) pred.push_back(e.top);
          }
          const auto b = ComputeCostBounds(j_clean, out.epsilon, out.delta, k,
                                           clean_plan.cost_bound, SignRegime::kNonnegative);
          row.lower = b.lower;
          row.upper = b.upper;
          csv += std::to_string(k) + "," + FormatReal(row.lower) + "," +
                 FormatReal(row.empirical) + "," + FormatReal(row.upper) + "\n";
          cell.rows.push_back(row);
          cell.predictions.push_back(std::move(pred));
        }
        WriteTextFile(tables / ("cost_" + AttackKindName(kind) + "_g" + KLabel(gamma) + "_a" +
                                FormatReal(alpha) + ".csv"),
                      csv);
        out.cells.push_back(std::move(cell));
      }
    }
  }
  return out;
}

std::vector<SweepRow> SweepSigma(const ExperimentPlan& plan, const std::filesystem::path& root,
                                 int jobs) {
  if (plan.sweep.sigmas.empty()) throw UsageError("sweep needs at least one sigma");
  std::vector<SweepRow> rows;
  for (double sigma : plan.sweep.sigmas) {
    ExperimentPlan p = plan;
    p.federation.noise_multiplier = sigma;
    const EnsembleResult ens = RunEnsemble(p, root, jobs);
    const auto cert = CertifyPredictionTable(ens, plan.k_list, plan.psi);
    SweepRow row;
    row.sigma = sigma;
    row.epsilon = ens.privacy.epsilon;
    row.clean_accuracy = ens.clean_accuracy;
    row.certified_accuracy = cert.certified_accuracy;
    double k_sum = 0.0;
    size_t n_correct = 0;
    for (const auto& s : cert.samples) {
      if (!s.correct) continue;
      ++n_correct;
      k_sum += s.k_bound;
      if (s.k_bound > 0.0) {
        // Largest integer strictly below K.
        const double kmax = std::ceil(s.k_bound) - 1.0;
        row.max_certified_k = std::max(row.max_certified_k, kmax);
      }
    }
    row.mean_k_bound = n_correct ? k_sum / static_cast<double>(n_correct) : 0.0;
    rows.push_back(std::move(row));
  }
  const fs::path dir = root / "plans" / PlanHash(plan) / "tables";
  WriteTextFile(dir / "sweep_sigma.csv", SweepCsv(rows, plan.k_list));
  return rows;
}

std::string SweepCsv(const std::vector<SweepRow>& rows, const std::vector<double>& k_list) {
  std::string out = "sigma,epsilon,clean_accuracy,max_certified_k,mean_K";
  for (double k : k_list) out += ",cert_acc_k=" + KLabel(k);
  out += "\n";
  for (const auto& r : rows) {
    out += FormatReal(r.sigma) + "," + FormatReal(r.epsilon) + "," +
           FormatReal(r.clean_accuracy) + "," + FormatReal(r.max_certified_k) + "," +
           FormatReal(r.mean_k_bound);
    for (double a : r.certified_accuracy) out += "," + FormatReal(a);
    out += "\n";
  }
  return out;
}

void WriteReport(const std::filesystem::path& root) {
  const fs::path plans = root / "plans";
  if (!fs::exists(plans)) throw UsageError("no plans under " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(plans)) {
    if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::string acc = "plan_hash,algorithm,sigma,k,certified_accuracy\n";
  std::string cost = "plan_hash,algorithm,sigma,cell,k,lower,empirical_J,upper\n";
  for (const auto& dir : dirs) {
    if (!fs::exists(dir / "plan.json")) continue;
    const ExperimentPlan plan = PlanFromJson(json::parse(ReadTextFile(dir / "plan.json")));
    const std::string prefix = dir.filename().string() + "," +
                               AlgorithmName(plan.federation.algorithm) + "," +
                               FormatReal(plan.federation.noise_multiplier) + ",";
    const fs::path tables = dir / "tables";
    if (!fs::exists(tables)) continue;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(tables)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string name = f.stem().string();
      std::istringstream in(ReadTextFile(f));
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (name == "cert_acc") acc += prefix + line + "\n";
        if (name.rfind("cost_", 0) == 0) cost += prefix + name.substr(5) + "," + line + "\n";
      }
    }
  }
  WriteTextFile(root / "report" / "certified_accuracy.csv", acc);
  WriteTextFile(root / "report" / "attack_cost.csv", cost);
}

}  // namespace fedcert
