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

// Command-line front end. Every subcommand reads an optional JSON experiment
// config; flags given on the command line override it.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "weblynet/errors.h"
#include "weblynet/eval.h"
#include "weblynet/networks.h"
#include "weblynet/optim.h"
#include "weblynet/pipeline.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace weblynet {
namespace {

// Flags shared by every subcommand. Unset flags leave the config untouched.
struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> n_epochs;
  std::optional<std::size_t> pretrain_epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr_n1;
  std::optional<double> lr_n2;
  std::optional<double> width_scale;
  std::vector<double> alpha_grid;
  std::optional<std::string> output_dir;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON experiment config")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Seed (replaces the seed list)");
    app.add_option("--seeds", seeds, "Seed list");
    app.add_option("--epochs", n_epochs, "Training epochs");
    app.add_option("--pretrain-epochs", pretrain_epochs,
                   "Epochs for the transfer network");
    app.add_option("--batch-size", batch_size, "Recordings per batch");
    app.add_option("--lr-n1", lr_n1, "Adam learning rate for N1");
    app.add_option("--lr-n2", lr_n2, "Adam learning rate for N2");
    app.add_option("--width-scale", width_scale,
                   "Layer width multiplier for both networks");
    app.add_option("--alpha-grid", alpha_grid, "Divergence weights to try");
    app.add_option("--output-dir", output_dir, "Pipeline output directory");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        throw ContractError("cannot parse " + config_path + ": " + e.what());
      }
      cfg = ExperimentConfig::from_json(j, cfg);
    }
    if (seed) cfg.seeds = {*seed};
    if (!seeds.empty()) cfg.seeds = seeds;
    if (n_epochs) cfg.n_epochs = *n_epochs;
    if (pretrain_epochs) cfg.pretrain_epochs = *pretrain_epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (lr_n1) cfg.lr_n1 = *lr_n1;
    if (lr_n2) cfg.lr_n2 = *lr_n2;
    if (width_scale) {
      cfg.n1.width_scale = *width_scale;
      cfg.n2.width_scale = *width_scale;
    }
    if (!alpha_grid.empty()) cfg.alpha_grid = alpha_grid;
    if (output_dir) cfg.output_dir = *output_dir;
    cfg.validate();
    return cfg;
  }

  std::uint64_t first_seed(const ExperimentConfig& cfg) const {
    return cfg.seeds.front();
  }
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

std::size_t view2_width(const Dataset& ds) {
  for (const Recording& r : ds.recordings()) {
    if (r.example.view2.defined()) return r.example.view2.numel();
  }
  return 0;
}

// n1 and n2 name networks by kind; "average" is the ensemble mean.
Which select_output(const TrainedSystem& system, const std::string& name) {
  if (name == "average") return Which::average();
  for (std::size_t i = 0; i < system.networks.size(); ++i) {
    if (system.networks[i]->kind() == name) return Which::network(i);
  }
  return Which::parse(name);
}

void print_summary(const std::vector<SummaryRow>& rows) {
  for (const SummaryRow& r : rows) {
    std::printf("%-32s %.4f +- %.4f  (n=%zu)\n", system_label(r.system).c_str(),
                r.mean, r.std, r.per_seed.size());
  }
}

int run(int argc, char** argv) {
  CLI::App app{
      "WeblyNet: co-teaching of two networks on webly labelled "
      "sound event data"};
  app.require_subcommand(1);
  Overrides ov;

  // generate
  auto* generate = app.add_subcommand(
      "generate", "Write the synthetic train, val, test and pretraining sets");
  std::string gen_out;
  generate->add_option("--out", gen_out, "Output directory")->required();

  // pretrain
  auto* pretrain = app.add_subcommand(
      "pretrain", "Train the transfer network on clean pretraining data");
  std::string pre_data, pre_out;
  pretrain->add_option("--data", pre_data, "Pretraining dataset directory")
      ->required();
  pretrain->add_option("--out", pre_out, "Checkpoint path")->required();

  // view2
  auto* view2 = app.add_subcommand(
      "view2", "Attach transferred features from a pretrained network");
  std::string v2_ckpt, v2_data, v2_out;
  view2->add_option("--checkpoint", v2_ckpt, "Pretrained N1 checkpoint")
      ->required();
  view2->add_option("--data", v2_data, "Dataset directory")->required();
  view2->add_option("--out", v2_out, "Output dataset directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one system");
  std::string tr_data, tr_out, tr_mode = "joint", tr_nets = "n1",
                               tr_view = "transfer";
  double tr_alpha = 0.0;
  train_cmd->add_option("--data", tr_data, "Training dataset directory")
      ->required();
  train_cmd->add_option("--out", tr_out, "System output directory")->required();
  train_cmd->add_option("--mode", tr_mode, "self or joint")
      ->check(CLI::IsMember({"self", "joint"}));
  train_cmd->add_option("--network", tr_nets, "Network for self mode")
      ->check(CLI::IsMember({"n1", "n2"}));
  train_cmd->add_option("--alpha", tr_alpha, "Divergence weight (joint)")
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--n2-view", tr_view, "Input view of N2")
      ->check(CLI::IsMember({"transfer", "pooled"}));

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained system");
  std::string ev_system, ev_data, ev_which = "average", ev_out;
  eval_cmd->add_option("--system", ev_system, "System directory")->required();
  eval_cmd->add_option("--data", ev_data, "Test dataset directory")->required();
  eval_cmd->add_option("--which", ev_which, "n1, n2 or average");
  eval_cmd->add_option("--out", ev_out, "Per-class report CSV");

  // sweep
  auto* sweep = app.add_subcommand(
      "sweep",
      "Joint training over the alpha grid, selected by validation MAP");
  std::string sw_train, sw_val, sw_out;
  sweep->add_option("--data", sw_train, "Training dataset directory")
      ->required();
  sweep->add_option("--val", sw_val, "Validation dataset directory")
      ->required();
  sweep->add_option("--out", sw_out, "Output directory")->required();

  // analyze-noise
  auto* noise =
      app.add_subcommand("analyze-noise", "Per-class false positive report");
  std::string nz_data, nz_out;
  noise->add_option("--data", nz_data, "Dataset directory")->required();
  noise->add_option("--out", nz_out, "CSV path");

  // report
  auto* report = app.add_subcommand(
      "report", "Recompute the comparison table from a run's checkpoints");
  std::string rp_run;
  report->add_option("--run", rp_run, "Pipeline output directory")
      ->required()
      ->check(CLI::ExistingDirectory);

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage");

  for (CLI::App* sub : app.get_subcommands({})) ov.attach(*sub);

  CLI11_PARSE(app, argc, argv);
  const ExperimentConfig cfg = ov.resolve();
  const std::uint64_t seed = ov.first_seed(cfg);

  if (*generate) {
    if (!cfg.synthetic)
      throw ContractError("generate needs a synthetic source");
    const SeedData d = prepare_data(cfg, seed);
    const fs::path out = gen_out;
    save_dataset(d.train, out / "train");
    save_dataset(d.val, out / "val");
    save_dataset(d.test, out / "test");
    save_dataset(*d.pretrain, out / "pretrain");
    write_file(out / "noise_report.csv",
               noise_report_csv(analyze_noise(d.train)));
    std::printf("train %zu, val %zu, test %zu, pretrain %zu -> %s\n",
                d.train.size(), d.val.size(), d.test.size(), d.pretrain->size(),
                out.string().c_str());
  } else if (*pretrain) {
    const Dataset data = load_dataset(pre_data);
    auto net = pretrain_n1(cfg, data, seed);
    save_checkpoint(*net, pre_out);
    std::printf("pretrained on %zu recordings -> %s\n", data.size(),
                pre_out.c_str());
  } else if (*view2) {
    std::unique_ptr<Network> loaded = load_checkpoint(v2_ckpt);
    auto* n1 = dynamic_cast<N1Network*>(loaded.get());
    if (!n1) throw ContractError(v2_ckpt + " is not an N1 checkpoint");
    save_dataset(build_view2(*n1, load_dataset(v2_data)), v2_out);
    std::printf("view2 width %zu -> %s\n", n1->spec().f2_width(),
                v2_out.c_str());
  } else if (*train_cmd) {
    const Dataset data = load_dataset(tr_data);
    const bool joint = tr_mode == "joint";
    const InputView n2_view =
        tr_view == "pooled" ? InputView::kPooledSegments : InputView::kTransfer;
    TrainedSystem system = make_system(
        cfg, data.num_classes(), view2_width(data), seed,
        joint || tr_nets == "n1", joint || tr_nets == "n2", n2_view);
    const TrainConfig tc = train_config(cfg, system, seed, {tr_alpha});
    const auto examples = data.training_examples();
    const TrainResult result = weblynet::train(system.pointers(), examples, tc);
    system.set_mode(Mode::kEval);
    save_system(system, tr_out);
    write_training_log(result, fs::path(tr_out) / "train_log.jsonl");
    if (!result.epochs.empty()) {
      std::printf("%s training done, final loss %.6f -> %s\n",
                  train_mode_name(tc.mode).data(),
                  result.epochs.back().loss.total, tr_out.c_str());
    }
  } else if (*eval_cmd) {
    TrainedSystem system = load_system(ev_system);
    system.set_mode(Mode::kEval);
    const EvalReport r = evaluate(system, load_dataset(ev_data),
                                  select_output(system, ev_which), ev_which);
    if (!ev_out.empty()) write_report_csv(r, ev_out);
    std::printf("%s MAP %.6f over %zu classes\n", ev_which.c_str(), r.map,
                r.per_class_ap.size());
  } else if (*sweep) {
    const Dataset train_ds = load_dataset(sw_train);
    const Dataset val_ds = load_dataset(sw_val);
    const auto examples = train_ds.training_examples();
    json rows = json::array();
    std::optional<double> best_alpha;
    double best_map = 0.0;
    for (const double alpha : cfg.alpha_grid) {
      TrainedSystem system = make_system(
          cfg, train_ds.num_classes(), view2_width(train_ds), seed, true, true);
      const TrainConfig tc = train_config(cfg, system, seed, {alpha});
      const TrainResult result =
          weblynet::train(system.pointers(), examples, tc);
      system.set_mode(Mode::kEval);
      const double map = evaluate(system, val_ds, Which::average()).map;
      char name[48];
      std::snprintf(name, sizeof(name), "joint_alpha_%g", alpha);
      const fs::path dir = fs::path(sw_out) / name;
      save_system(system, dir);
      write_training_log(result, dir / "train_log.jsonl");
      rows.push_back({{"alpha", alpha}, {"val_map", map}});
      std::printf("alpha %-8g validation MAP %.6f\n", alpha, map);
      if (!best_alpha || map > best_map) {
        best_alpha = alpha;
        best_map = map;
      }
    }
    write_file(
        fs::path(sw_out) / "alpha_sweep.json",
        json{{"sweep", rows}, {"selected_alpha", *best_alpha}}.dump(2) + "\n");
    std::printf("selected alpha %g\n", *best_alpha);
  } else if (*noise) {
    const std::string csv =
        noise_report_csv(analyze_noise(load_dataset(nz_data)));
    if (!nz_out.empty()) write_file(nz_out, csv);
    std::cout << csv;
  } else if (*report) {
    const PipelineResult audited = audit_run(rp_run);
    write_file(fs::path(rp_run) / "audit_summary.csv",
               summary_csv(audited.summary));
    print_summary(audited.summary);
  } else if (*pipeline) {
    const PipelineResult result = run_pipeline(cfg, &std::cerr);
    print_summary(result.summary);
  }
  return 0;
}

}  // namespace
}  // namespace weblynet

int main(int argc, char** argv) {
  try {
    return weblynet::run(argc, argv);
  } catch (const weblynet::StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
