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

// Experiment orchestration: plans, run records, seeded Monte-Carlo
// ensembles with resume, certification tables and sweeps.
//
// On-disk layout under an output root:
//
//   plans/<plan_hash>/plan.json
//   plans/<plan_hash>/runs/<o>/checkpoint.bin
//   plans/<plan_hash>/runs/<o>/record.json     (written last; marks completion)
//   plans/<plan_hash>/quarantine/<o>.<n>/      (partial runs moved aside)
//   plans/<plan_hash>/tables/*.csv

#ifndef FEDCERT_HARNESS_H_
#define FEDCERT_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedcert/attackkit.h"
#include "fedcert/certkit.h"
#include "fedcert/datakit.h"
#include "fedcert/fedsim.h"
#include "fedcert/modelkit.h"
#include "json.hpp"

namespace fedcert {

struct DataSpec {
  std::string source = "blobs";  // "blobs" or "idx"
  // blobs
  size_t train_size = 400;
  size_t test_size = 200;
  size_t dim = 5;
  int num_classes = 2;
  double separation = 3.0;
  uint64_t seed = 1;
  // idx
  std::string train_images, train_labels, test_images, test_labels;
  int class_a = -1;  // binary filter when both >= 0
  int class_b = -1;
  size_t max_train = 0;  // 0 keeps everything
  size_t max_test = 0;
  // partitioning
  PartitionStrategy partition = PartitionStrategy::kIid;
  size_t shards_per_user = 2;

  bool operator==(const DataSpec&) const = default;
};

struct SweepAxes {
  std::vector<double> sigmas;
  std::vector<int> ks;
  std::vector<double> gammas;
  std::vector<double> poison_fractions;
  std::vector<double> taus;
  std::vector<AttackKind> kinds;

  bool operator==(const SweepAxes&) const = default;
};

struct ExperimentPlan {
  DataSpec data;
  ModelKind model = ModelKind::kLogistic;
  size_t hidden = 16;
  uint64_t init_seed = 0;
  FederationConfig federation;  // seed is overridden per run
  std::optional<AttackSpec> attack;
  int repetitions = 1000;  // O
  double psi = 0.01;
  uint64_t base_seed = 0;
  std::vector<double> k_list = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  double cost_bound = 5.0;  // C_bar
  SweepAxes sweep;

  bool operator==(const ExperimentPlan&) const = default;
};

void ValidatePlan(const ExperimentPlan& plan);

nlohmann::json ToJson(const FederationConfig& c);
FederationConfig FederationConfigFromJson(const nlohmann::json& j,
                                          const FederationConfig& defaults = {});
nlohmann::json ToJson(const AttackSpec& a);
AttackSpec AttackSpecFromJson(const nlohmann::json& j, const AttackSpec& defaults = {});
nlohmann::json ToJson(const ExperimentPlan& p);
// Missing fields keep the values in `defaults`.
ExperimentPlan PlanFromJson(const nlohmann::json& j, const ExperimentPlan& defaults = {});
nlohmann::json ToJson(const PrivacyReport& r);

// 16 hex digits of FNV-1a over the canonical JSON of everything that
// determines what a single run trains on and how (data, model, federation
// config without its seed, attack). Independent of base seed and O.
std::string ConfigHash(const ExperimentPlan& plan);
// ConfigHash plus the base seed; keys the on-disk plan directory.
std::string PlanHash(const ExperimentPlan& plan);

// Child seed of run o: stable 64-bit hash of (base seed, o).
uint64_t RunSeed(uint64_t base_seed, int run_index);

// Training set, test set and partition implied by a DataSpec.
struct Materialized {
  Dataset train;
  Dataset test;
  Partition partition;
  Architecture arch;
};
Materialized Materialize(const ExperimentPlan& plan);

// Parallelism from FEDCERT_JOBS, defaulting to hardware concurrency.
int JobsFromEnvironment();

struct EnsembleResult {
  std::filesystem::path plan_dir;
  std::string plan_hash;
  std::string config_hash;
  PrivacyReport privacy;
  int trained = 0;
  int skipped = 0;
  int quarantined = 0;
  double clean_accuracy = 0.0;  // accuracy of the ensemble prediction
  double mean_run_accuracy = 0.0;
  // One estimate per test sample (uncalibrated).
  std::vector<EnsembleEstimate> estimates;
  std::vector<int> test_labels;
  std::vector<ModelParams> models;  // in run-index order
};

// Trains (or resumes) the O runs of a plan and averages test-set confidences.
EnsembleResult RunEnsemble(const ExperimentPlan& plan,
                           const std::filesystem::path& root, int jobs = 1);

// Loads a finished ensemble without training; throws UsageError when any
// run is missing.
EnsembleResult LoadEnsemble(const ExperimentPlan& plan,
                            const std::filesystem::path& root);

// "%.17g", '.' separator.
std::string FormatReal(double v);

struct PredictionCertification {
  std::vector<SampleCertificate> samples;
  std::vector<CertifiedPrediction> predictions;
  std::vector<double> k_list;
  std::vector<double> certified_accuracy;  // aligned with k_list
};

// Per-sample K from the ensemble (calibrated when psi < 1) and certified
// accuracy per k. Writes tables/cert_pred.csv and tables/cert_acc.csv under
// the plan directory when `write` is set.
PredictionCertification CertifyPredictionTable(const EnsembleResult& ensemble,
                                               const std::vector<double>& k_list,
                                               double psi, bool write = true);

std::string PredictionCsv(const PredictionCertification& cert,
                          const EnsembleResult& ensemble);
std::string AccuracyCsv(const PredictionCertification& cert);

struct CostCellRow {
  int k = 0;
  double lower = 0.0;
  double empirical = 0.0;
  double upper = 0.0;
  size_t clamped = 0;
};

struct CostCell {
  AttackKind kind = AttackKind::kBackdoor;
  double gamma = 1.0;
  double poison_fraction = 1.0;
  double j_clean = 0.0;  // clean-ensemble cost under this kind's cost function
  std::vector<CostCellRow> rows;  // one per k, ascending
  // Poisoned-ensemble predictions per k (aligned with rows), for
  // consistency checks against the clean certificate.
  std::vector<std::vector<int>> predictions;
};

struct MinAttackerRow {
  AttackKind kind = AttackKind::kBackdoor;
  double tau = 1.0;
  double bound = 0.0;
};

struct CostCertification {
  double epsilon = 0.0;
  double delta = 0.0;
  std::vector<CostCell> cells;
  std::vector<MinAttackerRow> min_attackers;
};

CostKind CostKindFor(AttackKind kind);

// For every (kind, gamma, alpha) cell of the sweep axes and every k, trains
// the poisoned ensemble, measures the empirical attack cost and compares it
// with the certified bounds. k = 0 reuses the clean ensemble. Writes
// tables/cost_<kind>_g<gamma>_a<alpha>.csv and tables/min_attackers_<kind>.csv.
CostCertification CertifyCost(const ExperimentPlan& clean_plan,
                              const EnsembleResult& clean,
                              const std::filesystem::path& root, int jobs = 1);

struct SweepRow {
  double sigma = 0.0;
  double epsilon = 0.0;
  double clean_accuracy = 0.0;
  double max_certified_k = 0.0;  // largest integer k certified for some correct sample
  double mean_k_bound = 0.0;     // mean K over correct samples
  std::vector<double> certified_accuracy;  // aligned with plan.k_list
};

// Prediction certification across the sigma axis. Writes
// tables/sweep_sigma.csv under the base plan directory.
std::vector<SweepRow> SweepSigma(const ExperimentPlan& plan,
                                 const std::filesystem::path& root, int jobs = 1);
std::string SweepCsv(const std::vector<SweepRow>& rows, const std::vector<double>& k_list);

// Merges every plan's cert_acc.csv and cost_*.csv under root into
// root/report/certified_accuracy.csv and root/report/attack_cost.csv.
void WriteReport(const std::filesystem::path& root);

void WriteTextFile(const std::filesystem::path& path, const std::string& text);
std::string ReadTextFile(const std::filesystem::path& path);

}  // namespace fedcert

#endif  // FEDCERT_HARNESS_H_
