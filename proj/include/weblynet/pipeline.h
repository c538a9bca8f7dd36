/*
 * Copyright 2026 The WeblyNet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef WEBLYNET_PIPELINE_H_
#define WEBLYNET_PIPELINE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "weblynet/data.h"
#include "weblynet/eval.h"
#include "weblynet/networks.h"
#include "weblynet/optim.h"

namespace weblynet {

// Synthetic webly benchmark: one world per seed, disjoint train, test and
// pretraining draws, label noise on the leading classes only.
struct BenchmarkSpec {
  std::size_t num_classes = 10;
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  std::size_t n_pretrain = 2000;
  // The first round(fraction * C) classes get fp rates spread evenly over
  // [fp_min, fp_max]; the rest stay clean.
  double noisy_class_fraction = 0.5;
  double fp_min = 0.3;
  double fp_max = 0.5;
  SyntheticOptions generator;

  NoiseModel noise_model() const;
};

// Datasets written by save_dataset().
struct ManifestSource {
  std::filesystem::path train;
  std::filesystem::path test;
  // Clean data for the transfer network; when empty the train and test
  // sets must already carry view 2.
  std::filesystem::path pretrain;
};

struct ExperimentConfig {
  std::optional<BenchmarkSpec> synthetic = BenchmarkSpec{};
  std::optional<ManifestSource> manifest;

  N1Spec n1;  // num_classes is filled from the data
  N2Spec n2;  // num_classes and input_dim are filled in
  std::size_t pretrain_epochs = 10;
  std::size_t n_epochs = 50;
  std::size_t batch_size = 32;
  double lr_n1 = 1e-3;
  double lr_n2 = 1e-3;
  std::vector<double> alpha_grid{0.0, 0.1, 0.5, 1.0, 2.0, 5.0};
  std::vector<std::uint64_t> seeds{0};
  double val_fraction = 0.1;
  // Also train N2 on mean-pooled view 1 as a control for the transfer view.
  bool raw_view_baseline = true;
  std::filesystem::path output_dir = "weblynet_out";

  // Throws ContractError on an invalid combination.
  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep the values already in `base`.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    ExperimentConfig base);
  static ExperimentConfig from_json(const nlohmann::json& j);
};

// Row keys of the comparison table, in display order.
inline constexpr const char* kN1Self = "n1_self";
inline constexpr const char* kN2Self = "n2_self";
inline constexpr const char* kSelfAverage = "self_average";
inline constexpr const char* kN1CoTrained = "n1_cotrained";
inline constexpr const char* kN2CoTrained = "n2_cotrained";
inline constexpr const char* kWeblyNet = "weblynet";
inline constexpr const char* kN2SelfPooled = "n2_self_pooled";

std::vector<std::string> system_order();
std::string system_label(const std::string& key);

struct AlphaResult {
  double alpha = 0.0;
  double val_map = 0.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::map<std::string, EvalReport> systems;
  std::vector<AlphaResult> alpha_sweep;
  double selected_alpha = 0.0;
};

struct SummaryRow {
  std::string system;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single seed
  std::vector<double> per_seed;
};

struct PipelineResult {
  std::vector<SeedResult> seeds;
  std::vector<SummaryRow> summary;
};

// Data for one seed, ready for training.
struct SeedData {
  Dataset train;
  Dataset val;
  Dataset test;
  std::optional<Dataset> pretrain;
};

// Stage helpers shared by the pipeline and the command-line tool.
SeedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed);
std::unique_ptr<N1Network> pretrain_n1(const ExperimentConfig& cfg,
                                       const Dataset& pretrain,
                                       std::uint64_t seed);
TrainedSystem make_system(const ExperimentConfig& cfg, std::size_t num_classes,
                          std::size_t view2_dim, std::uint64_t seed,
                          bool with_n1, bool with_n2,
                          InputView n2_view = InputView::kTransfer);
TrainConfig train_config(const ExperimentConfig& cfg,
                         const TrainedSystem& system, std::uint64_t seed,
                         std::vector<double> alphas);

// system.json lists the networks; one checkpoint per network.
void save_system(const TrainedSystem& system, const std::filesystem::path& dir);
TrainedSystem load_system(const std::filesystem::path& dir);

// Runs every stage for every seed and writes artifacts under output_dir.
// Failures are rethrown as StageError; files already written stay. Progress
// lines go to `log` when given.
PipelineResult run_pipeline(const ExperimentConfig& cfg,
                            std::ostream* log = nullptr);

// Recomputes every table entry of a finished run from its stored
// checkpoints and test sets.
PipelineResult audit_run(const std::filesystem::path& run_dir);

std::vector<SummaryRow> summarize(const std::vector<SeedResult>& seeds);
std::string summary_csv(const std::vector<SummaryRow>& rows);
// Per-class AP of the baseline against WeblyNet, averaged over seeds.
std::string per_class_csv(const std::vector<SeedResult>& seeds);

struct NoiseRow {
  std::string class_name;
  std::size_t observed_positives = 0;
  std::size_t false_positives = 0;
  double rate = 0.0;
  bool top5 = false;
};

struct NoiseReport {
  bool available = false;
  std::vector<NoiseRow> rows;  // descending by false positives
};

NoiseReport analyze_noise(const Dataset& ds);
std::string noise_report_csv(const NoiseReport& report);

}  // namespace weblynet

#endif  // WEBLYNET_PIPELINE_H_
