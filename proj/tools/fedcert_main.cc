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

// fedcert command-line driver.
//
//   fedcert <subcommand> [--config plan.json] [flags...]
//
// A JSON config may supply every plan field; flags override it.
// FEDCERT_JOBS sets the number of worker threads.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedcert/errors.h"
#include "fedcert/fedsim.h"
#include "fedcert/harness.h"
#include "fedcert/modelkit.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fedcert {
namespace {

struct Overrides {
  std::string config_path;
  std::string out = "fedcert_out";
  std::optional<int> jobs;

  // data
  std::optional<std::string> source;
  std::optional<size_t> train_size, test_size, dim;
  std::optional<int> num_classes;
  std::optional<double> separation;
  std::optional<uint64_t> data_seed;
  std::optional<std::string> train_images, train_labels, test_images, test_labels;
  std::optional<int> class_a, class_b;
  std::optional<std::string> partition;

  // model
  std::optional<std::string> model;
  std::optional<size_t> hidden;

  // federation
  std::optional<std::string> algorithm, clipping, rdp_bound;
  std::optional<size_t> num_users;
  std::optional<double> q, lr, momentum, weight_decay, batch_fraction, clip, sigma, delta;
  std::optional<int> rounds, local_epochs, local_steps;
  std::optional<uint64_t> seed;

  // attack
  std::optional<std::string> attack_kind, pattern;
  std::optional<int> attack_k, target_label, source_class;
  std::optional<double> poison_fraction, gamma;

  // ensemble / certification
  std::optional<int> repetitions;
  std::optional<double> psi, cost_bound;
  std::optional<uint64_t> base_seed;
  std::vector<double> k_list, sigmas, gammas, alphas, taus;
  std::vector<int> ks;
  std::vector<std::string> kinds;
};

void AddPlanFlags(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "JSON plan file");
  app->add_option("--out", o.out, "output root directory");
  app->add_option("--jobs", o.jobs, "worker threads (default FEDCERT_JOBS)");

  app->add_option("--source", o.source, "blobs | idx")->group("Data");
  app->add_option("--train-size", o.train_size)->group("Data");
  app->add_option("--test-size", o.test_size)->group("Data");
  app->add_option("--dim", o.dim)->group("Data");
  app->add_option("--classes", o.num_classes)->group("Data");
  app->add_option("--separation", o.separation)->group("Data");
  app->add_option("--data-seed", o.data_seed)->group("Data");
  app->add_option("--train-images", o.train_images)->group("Data");
  app->add_option("--train-labels", o.train_labels)->group("Data");
  app->add_option("--test-images", o.test_images)->group("Data");
  app->add_option("--test-labels", o.test_labels)->group("Data");
  app->add_option("--class-a", o.class_a)->group("Data");
  app->add_option("--class-b", o.class_b)->group("Data");
  app->add_option("--partition", o.partition, "iid | label-shard")->group("Data");

  app->add_option("--model", o.model, "logistic | mlp")->group("Model");
  app->add_option("--hidden", o.hidden)->group("Model");

  app->add_option("--algorithm", o.algorithm,
                  "userdp-fedavg | insdp-fedsgd | insdp-fedavg | plain-fedavg")
      ->group("Federation");
  app->add_option("--users", o.num_users, "N")->group("Federation");
  app->add_option("--q", o.q, "user sampling probability")->group("Federation");
  app->add_option("--rounds", o.rounds, "T")->group("Federation");
  app->add_option("--local-epochs", o.local_epochs, "E")->group("Federation");
  app->add_option("--local-steps", o.local_steps, "V")->group("Federation");
  app->add_option("--lr", o.lr)->group("Federation");
  app->add_option("--momentum", o.momentum)->group("Federation");
  app->add_option("--weight-decay", o.weight_decay)->group("Federation");
  app->add_option("--batch-fraction", o.batch_fraction, "p")->group("Federation");
  app->add_option("--clip", o.clip, "S")->group("Federation");
  app->add_option("--sigma", o.sigma)->group("Federation");
  app->add_option("--delta", o.delta)->group("Federation");
  app->add_option("--clipping", o.clipping,
                  "flat | per-layer | flat-median | per-layer-median")
      ->group("Federation");
  app->add_option("--rdp-bound", o.rdp_bound, "sampled-gaussian | general-subsampled")
      ->group("Federation");
  app->add_option("--seed", o.seed, "seed of a single run")->group("Federation");

  app->add_option("--attack", o.attack_kind, "BKD | LF | DBA")->group("Attack");
  app->add_option("--k", o.attack_k, "adversarial users or poisoned instances")
      ->group("Attack");
  app->add_option("--poison-fraction", o.poison_fraction, "alpha")->group("Attack");
  app->add_option("--gamma", o.gamma, "model replacement scale")->group("Attack");
  app->add_option("--pattern", o.pattern, "index:value,...")->group("Attack");
  app->add_option("--target-label", o.target_label)->group("Attack");
  app->add_option("--source-class", o.source_class)->group("Attack");

  app->add_option("--repetitions", o.repetitions, "O")->group("Ensemble");
  app->add_option("--psi", o.psi)->group("Ensemble");
  app->add_option("--cost-bound", o.cost_bound, "C_bar")->group("Ensemble");
  app->add_option("--base-seed", o.base_seed)->group("Ensemble");
  app->add_option("--k-list", o.k_list)->delimiter(',')->group("Ensemble");
  app->add_option("--sigmas", o.sigmas)->delimiter(',')->group("Sweep");
  app->add_option("--ks", o.ks)->delimiter(',')->group("Sweep");
  app->add_option("--gammas", o.gammas)->delimiter(',')->group("Sweep");
  app->add_option("--alphas", o.alphas)->delimiter(',')->group("Sweep");
  app->add_option("--taus", o.taus)->delimiter(',')->group("Sweep");
  app->add_option("--kinds", o.kinds)->delimiter(',')->group("Sweep");
}

template <typename T>
void Apply(const std::optional<T>& v, T& dst) {
  if (v) dst = *v;
}

ExperimentPlan BuildPlan(const Overrides& o) {
  ExperimentPlan plan;
  if (!o.config_path.empty()) {
    try {
      plan = PlanFromJson(json::parse(ReadTextFile(o.config_path)));
    } catch (const json::exception& e) {
      throw ConfigError(o.config_path + ": " + e.what());
    }
  }
  DataSpec& d = plan.data;
  Apply(o.source, d.source);
  Apply(o.train_size, d.train_size);
  Apply(o.test_size, d.test_size);
  Apply(o.dim, d.dim);
  Apply(o.num_classes, d.num_classes);
  Apply(o.separation, d.separation);
  Apply(o.data_seed, d.seed);
  Apply(o.train_images, d.train_images);
  Apply(o.train_labels, d.train_labels);
  Apply(o.test_images, d.test_images);
  Apply(o.test_labels, d.test_labels);
  Apply(o.class_a, d.class_a);
  Apply(o.class_b, d.class_b);
  if (o.partition) {
    if (*o.partition == "iid") {
      d.partition = PartitionStrategy::kIid;
    } else if (*o.partition == "label-shard") {
      d.partition = PartitionStrategy::kLabelShard;
    } else {
      throw ConfigError("unknown partition '" + *o.partition + "'");
    }
  }
  if (o.model) {
    if (*o.model == "logistic") {
      plan.model = ModelKind::kLogistic;
    } else if (*o.model == "mlp") {
      plan.model = ModelKind::kMlp;
    } else {
      throw ConfigError("unknown model '" + *o.model + "'");
    }
  }
  Apply(o.hidden, plan.hidden);

  // Federation flags go through the JSON reader so names parse in one place.
  json fed;
  if (o.algorithm) fed["algorithm"] = *o.algorithm;
  if (o.clipping) fed["clipping"] = *o.clipping;
  if (o.rdp_bound) fed["rdp_bound"] = *o.rdp_bound;
  if (o.num_users) fed["num_users"] = *o.num_users;
  if (o.q) fed["user_sampling_prob"] = *o.q;
  if (o.rounds) fed["rounds"] = *o.rounds;
  if (o.local_epochs) fed["local_epochs"] = *o.local_epochs;
  if (o.local_steps) fed["local_steps"] = *o.local_steps;
  if (o.lr) fed["learning_rate"] = *o.lr;
  if (o.momentum) fed["momentum"] = *o.momentum;
  if (o.weight_decay) fed["weight_decay"] = *o.weight_decay;
  if (o.batch_fraction) fed["batch_fraction"] = *o.batch_fraction;
  if (o.clip) fed["clip_threshold"] = *o.clip;
  if (o.sigma) fed["noise_multiplier"] = *o.sigma;
  if (o.delta) fed["delta"] = *o.delta;
  if (o.seed) fed["seed"] = *o.seed;
  plan.federation = FederationConfigFromJson(fed, plan.federation);

  json atk;
  if (o.attack_kind) atk["kind"] = *o.attack_kind;
  if (o.attack_k) atk["k"] = *o.attack_k;
  if (o.poison_fraction) atk["poison_fraction"] = *o.poison_fraction;
  if (o.gamma) atk["scale"] = *o.gamma;
  if (o.pattern) atk["pattern"] = *o.pattern;
  if (o.target_label) atk["target_label"] = *o.target_label;
  if (o.source_class) atk["source_class"] = *o.source_class;
  if (!atk.empty()) plan.attack = AttackSpecFromJson(atk, plan.attack.value_or(AttackSpec{}));

  Apply(o.repetitions, plan.repetitions);
  Apply(o.psi, plan.psi);
  Apply(o.cost_bound, plan.cost_bound);
  Apply(o.base_seed, plan.base_seed);
  if (!o.k_list.empty()) plan.k_list = o.k_list;
  if (!o.sigmas.empty()) plan.sweep.sigmas = o.sigmas;
  if (!o.ks.empty()) plan.sweep.ks = o.ks;
  if (!o.gammas.empty()) plan.sweep.gammas = o.gammas;
  if (!o.alphas.empty()) plan.sweep.poison_fractions = o.alphas;
  if (!o.taus.empty()) plan.sweep.taus = o.taus;
  if (!o.kinds.empty()) {
    plan.sweep.kinds.clear();
    for (const auto& k : o.kinds) plan.sweep.kinds.push_back(ParseAttackKind(k));
  }
  ValidatePlan(plan);
  return plan;
}

int Jobs(const Overrides& o) { return o.jobs.value_or(JobsFromEnvironment()); }

void Print(const json& j) { std::cout << j.dump(2) << "\n"; }

std::string DatasetCsv(const Dataset& data) {
  std::string out;
  if (data.empty()) return out;
  for (size_t i = 0; i < data.front().features.size(); ++i) out += "x" + std::to_string(i) + ",";
  out += "label\n";
  for (const auto& ex : data) {
    for (double v : ex.features) out += FormatReal(v) + ",";
    out += std::to_string(ex.label) + "\n";
  }
  return out;
}

void CmdData(const Overrides& o) {
  const ExperimentPlan plan = BuildPlan(o);
  const Materialized m = Materialize(plan);
  const fs::path dir = fs::path(o.out) / "data" / ConfigHash(plan);
  WriteTextFile(dir / "train.csv", DatasetCsv(m.train));
  WriteTextFile(dir / "test.csv", DatasetCsv(m.test));
  std::string part = "user,example\n";
  for (size_t u = 0; u < m.partition.users.size(); ++u) {
    for (size_t idx : m.partition.users[u]) {
      part += std::to_string(u) + "," + std::to_string(idx) + "\n";
    }
  }
  WriteTextFile(dir / "partition.csv", part);
  Print({{"dir", dir.string()},
         {"train", m.train.size()},
         {"test", m.test.size()},
         {"users", m.partition.users.size()},
         {"input_dim", m.arch.input_dim},
         {"classes", m.arch.num_classes}});
}

void CmdTrain(const Overrides& o) {
  const ExperimentPlan plan = BuildPlan(o);
  const Materialized m = Materialize(plan);
  const ModelParams init = InitParams(m.arch, plan.init_seed);
  const TrainedRun run = Train(plan.federation, init, m.train, m.partition, plan.attack);
  const fs::path dir = fs::path(o.out) / "train" / (ConfigHash(plan) + "-" +
                                                    std::to_string(plan.federation.seed));
  fs::create_directories(dir);
  WriteCheckpoint((dir / "checkpoint.bin").string(), run.params);
  const json rec = {{"config_hash", ConfigHash(plan)},
                    {"config", ToJson(plan.federation)},
                    {"privacy", ToJson(run.privacy)},
                    {"informal_dp", run.informal_dp},
                    {"clean_accuracy", Accuracy(run.params, m.test)},
                    {"checkpoint", (dir / "checkpoint.bin").string()}};
  WriteTextFile(dir / "record.json", rec.dump(2) + "\n");
  Print(rec);
}

json EnsembleSummary(const EnsembleResult& r) {
  return {{"plan_dir", r.plan_dir.string()},
          {"plan_hash", r.plan_hash},
          {"config_hash", r.config_hash},
          {"privacy", ToJson(r.privacy)},
          {"trained", r.trained},
          {"skipped", r.skipped},
          {"quarantined", r.quarantined},
          {"clean_accuracy", r.clean_accuracy},
          {"mean_run_accuracy", r.mean_run_accuracy}};
}

void CmdEnsemble(const Overrides& o) {
  const ExperimentPlan plan = BuildPlan(o);
  Print(EnsembleSummary(RunEnsemble(plan, o.out, Jobs(o))));
}

void CmdAccountant(const Overrides& o) {
  const ExperimentPlan plan = BuildPlan(o);
  const Architecture arch{plan.model, std::max<size_t>(plan.data.dim, 1), 2,
                          plan.model == ModelKind::kMlp ? plan.hidden : 0};
  Print(ToJson(AccountantReport(plan.federation, LayoutFor(arch).size())));
}

void CmdCertifyPred(const Overrides& o) {
  const ExperimentPlan plan = BuildPlan(o);
  const EnsembleResult ens = LoadEnsemble(plan, o.out);
  const auto cert = CertifyPredictionTable(ens, plan.k_list, plan.psi);
  json acc = json::array();
  for (size_t i = 0; i < cert.k_list.size(); ++i) {
    acc.push_back({{"k", cert.k_list[i]}, {"certified_accuracy", cert.certified_accuracy[i]}});
  }
  Print({{"tables", (ens.plan_dir / "tables").string()},
         {"epsilon", ens.privacy.epsilon},
         {"clean_accuracy", ens.clean_accuracy},
         {"certified_accuracy", acc}});
}

void CmdCertifyCost(const Overrides& o) {
  const ExperimentPlan plan = BuildPlan(o);
  const EnsembleResult clean = LoadEnsemble(plan, o.out);
  const CostCertification cert = CertifyCost(plan, clean, o.out, Jobs(o));
  size_t violations = 0;
  for (const auto& cell : cert.cells) {
    for (const auto& row : cell.rows) violations += row.empirical < row.lower;
  }
  Print({{"tables", (clean.plan_dir / "tables").string()},
         {"cells", cert.cells.size()},
         {"lower_bound_violations", violations}});
}

void CmdSweep(const Overrides& o) {
  ExperimentPlan plan = BuildPlan(o);
  if (plan.sweep.sigmas.empty()) plan.sweep.sigmas = {plan.federation.noise_multiplier};
  const int jobs = Jobs(o);
  const auto rows = SweepSigma(plan, o.out, jobs);
  json out = json::array();
  for (size_t i = 0; i < rows.size(); ++i) {
    json row = {{"sigma", rows[i].sigma},
                {"epsilon", rows[i].epsilon},
                {"clean_accuracy", rows[i].clean_accuracy},
                {"max_certified_k", rows[i].max_certified_k}};
    if (!plan.sweep.kinds.empty() && !plan.sweep.ks.empty()) {
      ExperimentPlan p = plan;
      p.federation.noise_multiplier = rows[i].sigma;
      const EnsembleResult clean = RunEnsemble(p, o.out, jobs);
      CertifyCost(p, clean, o.out, jobs);
      row["cost_tables"] = (clean.plan_dir / "tables").string();
    }
    out.push_back(row);
  }
  WriteReport(o.out);
  Print({{"sweep", out}, {"report", (fs::path(o.out) / "report").string()}});
}

void CmdReport(const Overrides& o) {
  WriteReport(o.out);
  Print({{"report", (fs::path(o.out) / "report").string()}});
}

}  // namespace
}  // namespace fedcert

int main(int argc, char** argv) {
  using namespace fedcert;
  CLI::App app{"Federated learning with differential privacy and poisoning certification"};
  app.require_subcommand(1);
  Overrides o;
  struct Sub {
    const char* name;
    const char* help;
    void (*fn)(const Overrides&);
  };
  const Sub subs[] = {
      {"data", "synthesize or load data and write the partition", CmdData},
      {"train", "train a single run", CmdTrain},
      {"ensemble", "train (or resume) the O runs of a plan", CmdEnsemble},
      {"accountant", "privacy cost of a configuration without training", CmdAccountant},
      {"certify-pred", "certified prediction table for a finished ensemble", CmdCertifyPred},
      {"certify-cost", "certified attack cost over the attack grid", CmdCertifyCost},
      {"sweep", "sigma sweep with prediction and cost certification", CmdSweep},
      {"report", "merge tables under the output root", CmdReport},
  };
  std::vector<std::pair<CLI::App*, const Sub*>> handlers;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    AddPlanFlags(sub, o);
    handlers.emplace_back(sub, &s);
  }
  CLI11_PARSE(app, argc, argv);
  try {
    for (auto& [sub, s] : handlers) {
      if (sub->parsed()) s->fn(o);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
