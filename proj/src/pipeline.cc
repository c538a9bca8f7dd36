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

#include "weblynet/pipeline.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <tuple>
#include <utility>

#include "random.h"
#include "weblynet/errors.h"
#include "weblynet/losses.h"

namespace weblynet {

using json = nlohmann::json;
using internal::derive_seed;

namespace {

// Streams for every seeded component of one pipeline seed.
enum SeedStream : std::uint64_t {
  kWorldStream = 1,
  kTrainDataStream = 2,
  kTestDataStream = 3,
  kPretrainDataStream = 4,
  kValSplitStream = 5,
  kN1InitStream = 10,
  kN2InitStream = 11,
  kPretrainInitStream = 12,
  kTrainStream = 20,
  kPretrainStream = 22,
};

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

template <typename T>
void read_into(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json generator_to_json(const SyntheticOptions& o) {
  return {{"embedding_dim", o.embedding_dim},
          {"auxiliary_classes", o.auxiliary_classes},
          {"modes_per_class", o.modes_per_class},
          {"mode_spread", o.mode_spread},
          {"min_angle_deg", o.min_angle_deg},
          {"prototype_smoothing", o.prototype_smoothing},
          {"max_shift", o.max_shift},
          {"modulated_fraction", o.modulated_fraction},
          {"min_segments", o.min_segments},
          {"max_segments", o.max_segments},
          {"cardinality_weights", o.cardinality_weights},
          {"auxiliary_rate", o.auxiliary_rate},
          {"amplitude_min", o.amplitude_min},
          {"amplitude_max", o.amplitude_max},
          {"coverage_min", o.coverage_min},
          {"coverage_max", o.coverage_max},
          {"perturbation", o.perturbation},
          {"background", o.background}};
}

void generator_from_json(const json& j, SyntheticOptions& o) {
  read_into(j, "embedding_dim", o.embedding_dim);
  read_into(j, "auxiliary_classes", o.auxiliary_classes);
  read_into(j, "modes_per_class", o.modes_per_class);
  read_into(j, "mode_spread", o.mode_spread);
  read_into(j, "min_angle_deg", o.min_angle_deg);
  read_into(j, "prototype_smoothing", o.prototype_smoothing);
  read_into(j, "max_shift", o.max_shift);
  read_into(j, "modulated_fraction", o.modulated_fraction);
  read_into(j, "min_segments", o.min_segments);
  read_into(j, "max_segments", o.max_segments);
  read_into(j, "cardinality_weights", o.cardinality_weights);
  read_into(j, "auxiliary_rate", o.auxiliary_rate);
  read_into(j, "amplitude_min", o.amplitude_min);
  read_into(j, "amplitude_max", o.amplitude_max);
  read_into(j, "coverage_min", o.coverage_min);
  read_into(j, "coverage_max", o.coverage_max);
  read_into(j, "perturbation", o.perturbation);
  read_into(j, "background", o.background);
}

// Runs `fn`, turning any failure into a StageError naming the stage.
template <typename Fn>
auto run_stage(const std::string& stage, std::uint64_t seed, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage + " (seed " + std::to_string(seed) + ")", e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

double validation_map(const TrainedSystem& system, const Dataset& val,
                      Which which) {
  return evaluate(system, val, which).map;
}

}  // namespace

NoiseModel BenchmarkSpec::noise_model() const {
  NoiseModel model = NoiseModel::none(num_classes);
  const auto noisy = static_cast<std::size_t>(
      std::llround(noisy_class_fraction * static_cast<double>(num_classes)));
  for (std::size_t c = 0; c < noisy && c < num_classes; ++c) {
    model.fp_rate[c] = noisy == 1 ? fp_min
                                  : fp_min + (fp_max - fp_min) *
                                                 static_cast<double>(c) /
                                                 static_cast<double>(noisy - 1);
  }
  return model;
}

void ExperimentConfig::validate() const {
  if (synthetic.has_value() == manifest.has_value()) {
    throw ContractError("configure exactly one of synthetic or manifest data");
  }
  if (seeds.empty()) throw ContractError("seeds must not be empty");
  if (alpha_grid.empty()) throw ContractError("alpha grid must not be empty");
  for (const double a : alpha_grid) {
    if (!(a >= 0.0)) throw ContractError("alpha grid values must be >= 0");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ContractError("val_fraction must lie in (0, 1)");
  }
  if (batch_size == 0) throw ContractError("batch_size must be positive");
  if (!(lr_n1 > 0.0) || !(lr_n2 > 0.0)) {
    throw ContractError("learning rates must be positive");
  }
  if (synthetic) {
    synthetic->noise_model().validate(synthetic->num_classes);
    if (synthetic->generator.embedding_dim != n1.embedding_dim) {
      throw ContractError("generator embedding_dim differs from N1's");
    }
  }
}

json ExperimentConfig::to_json() const {
  json j;
  if (synthetic) {
    const BenchmarkSpec& b = *synthetic;
    j["data"] = {{"source", "synthetic"},
                 {"num_classes", b.num_classes},
                 {"n_train", b.n_train},
                 {"n_test", b.n_test},
                 {"n_pretrain", b.n_pretrain},
                 {"noisy_class_fraction", b.noisy_class_fraction},
                 {"fp_min", b.fp_min},
                 {"fp_max", b.fp_max},
                 {"generator", generator_to_json(b.generator)}};
  } else if (manifest) {
    j["data"] = {{"source", "manifest"},
                 {"train", manifest->train.string()},
                 {"test", manifest->test.string()},
                 {"pretrain", manifest->pretrain.string()}};
  }
  j["n1"] = {
      {"block_filters", n1.block_filters}, {"f1_filters", n1.f1_filters},
      {"f2_filters", n1.f2_filters},       {"f1_kernel_w", n1.f1_kernel_w},
      {"embedding_dim", n1.embedding_dim}, {"width_scale", n1.width_scale}};
  j["n2"] = {{"hidden", n2.hidden},
             {"dropout", n2.dropout_p},
             {"width_scale", n2.width_scale}};
  j["train"] = {{"pretrain_epochs", pretrain_epochs},
                {"n_epochs", n_epochs},
                {"batch_size", batch_size},
                {"lr_n1", lr_n1},
                {"lr_n2", lr_n2}};
  j["alpha_grid"] = alpha_grid;
  j["seeds"] = seeds;
  j["val_fraction"] = val_fraction;
  j["raw_view_baseline"] = raw_view_baseline;
  j["output_dir"] = output_dir.string();
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j,
                                             ExperimentConfig base) {
  ExperimentConfig cfg = std::move(base);
  try {
    if (j.contains("data")) {
      const json& d = j.at("data");
      const std::string source = d.value("source", "synthetic");
      if (source == "synthetic") {
        BenchmarkSpec b = cfg.synthetic.value_or(BenchmarkSpec{});
        read_into(d, "num_classes", b.num_classes);
        read_into(d, "n_train", b.n_train);
        read_into(d, "n_test", b.n_test);
        read_into(d, "n_pretrain", b.n_pretrain);
        read_into(d, "noisy_class_fraction", b.noisy_class_fraction);
        read_into(d, "fp_min", b.fp_min);
        read_into(d, "fp_max", b.fp_max);
        if (d.contains("generator"))
          generator_from_json(d["generator"], b.generator);
        cfg.synthetic = b;
        cfg.manifest.reset();
      } else if (source == "manifest") {
        ManifestSource m = cfg.manifest.value_or(ManifestSource{});
        if (d.contains("train")) m.train = d.at("train").get<std::string>();
        if (d.contains("test")) m.test = d.at("test").get<std::string>();
        if (d.contains("pretrain")) {
          m.pretrain = d.at("pretrain").get<std::string>();
        }
        cfg.manifest = m;
        cfg.synthetic.reset();
      } else {
        throw ContractError("unknown data source '" + source + "'");
      }
    }
    if (j.contains("n1")) {
      const json& n = j.at("n1");
      read_into(n, "block_filters", cfg.n1.block_filters);
      read_into(n, "f1_filters", cfg.n1.f1_filters);
      read_into(n, "f2_filters", cfg.n1.f2_filters);
      read_into(n, "f1_kernel_w", cfg.n1.f1_kernel_w);
      read_into(n, "embedding_dim", cfg.n1.embedding_dim);
      read_into(n, "width_scale", cfg.n1.width_scale);
    }
    if (j.contains("n2")) {
      const json& n = j.at("n2");
      read_into(n, "hidden", cfg.n2.hidden);
      read_into(n, "dropout", cfg.n2.dropout_p);
      read_into(n, "width_scale", cfg.n2.width_scale);
    }
    if (j.contains("width_scale")) {
      cfg.n1.width_scale = cfg.n2.width_scale =
          j.at("width_scale").get<double>();
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      read_into(t, "pretrain_epochs", cfg.pretrain_epochs);
      read_into(t, "n_epochs", cfg.n_epochs);
      read_into(t, "batch_size", cfg.batch_size);
      read_into(t, "lr_n1", cfg.lr_n1);
      read_into(t, "lr_n2", cfg.lr_n2);
    }
    read_into(j, "alpha_grid", cfg.alpha_grid);
    read_into(j, "seeds", cfg.seeds);
    read_into(j, "val_fraction", cfg.val_fraction);
    read_into(j, "raw_view_baseline", cfg.raw_view_baseline);
    if (j.contains("output_dir")) {
      cfg.output_dir = j.at("output_dir").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ContractError(std::string("bad experiment config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  return from_json(j, ExperimentConfig{});
}

std::vector<std::string> system_order() {
  return {kN1Self,      kN2Self,   kSelfAverage, kN1CoTrained,
          kN2CoTrained, kWeblyNet, kN2SelfPooled};
}

std::string system_label(const std::string& key) {
  static const std::map<std::string, std::string> labels{
      {kN1Self, "N1-Self (baseline)"},
      {kN2Self, "N2-Self"},
      {kSelfAverage, "N1-Self and N2-Self (averaged)"},
      {kN1CoTrained, "N1 (co-trained)"},
      {kN2CoTrained, "N2 (co-trained)"},
      {kWeblyNet, "WeblyNet"},
      {kN2SelfPooled, "N2-Self (pooled view 1)"}};
  const auto it = labels.find(key);
  return it == labels.end() ? key : it->second;
}

SeedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.synthetic) {
    const BenchmarkSpec& b = *cfg.synthetic;
    const SyntheticWorld world(b.num_classes, derive_seed(seed, kWorldStream),
                               b.generator);
    const Dataset full = world.generate(b.n_train, b.noise_model(),
                                        derive_seed(seed, kTrainDataStream));
    auto [train, val] = split_validation(full, cfg.val_fraction,
                                         derive_seed(seed, kValSplitStream));
    return {std::move(train), std::move(val),
            world.generate(b.n_test, NoiseModel::none(b.num_classes),
                           derive_seed(seed, kTestDataStream), Split::kTest),
            world.generate_pretraining(b.n_pretrain,
                                       derive_seed(seed, kPretrainDataStream))};
  }
  const ManifestSource& m = *cfg.manifest;
  const Dataset full = load_dataset(m.train);
  auto [train, val] = split_validation(full, cfg.val_fraction,
                                       derive_seed(seed, kValSplitStream));
  Dataset test = load_dataset(m.test);
  if (test.class_names() != train.class_names()) {
    throw DataError("train and test class lists differ");
  }
  std::optional<Dataset> pretrain;
  if (!m.pretrain.empty()) pretrain = load_dataset(m.pretrain);
  return {std::move(train), std::move(val), std::move(test),
          std::move(pretrain)};
}

std::unique_ptr<N1Network> pretrain_n1(const ExperimentConfig& cfg,
                                       const Dataset& pretrain,
                                       std::uint64_t seed) {
  N1Spec spec = cfg.n1;
  spec.num_classes = pretrain.num_classes();
  auto net =
      std::make_unique<N1Network>(spec, derive_seed(seed, kPretrainInitStream));
  TrainConfig tc;
  tc.n_epochs = cfg.pretrain_epochs;
  tc.batch_size = cfg.batch_size;
  tc.learning_rates = {cfg.lr_n1};
  tc.seed = derive_seed(seed, kPretrainStream);
  tc.mode = TrainMode::kSelf;
  Network* nets[] = {net.get()};
  const auto examples = pretrain.training_examples();
  train(nets, examples, tc);
  net->set_mode(Mode::kEval);
  return net;
}

TrainedSystem make_system(const ExperimentConfig& cfg, std::size_t num_classes,
                          std::size_t view2_dim, std::uint64_t seed,
                          bool with_n1, bool with_n2, InputView n2_view) {
  TrainedSystem system;
  if (with_n1) {
    N1Spec spec = cfg.n1;
    spec.num_classes = num_classes;
    system.networks.push_back(
        std::make_unique<N1Network>(spec, derive_seed(seed, kN1InitStream)));
  }
  if (with_n2) {
    N2Spec spec = cfg.n2;
    spec.num_classes = num_classes;
    spec.input_view = n2_view;
    spec.input_dim =
        n2_view == InputView::kTransfer ? view2_dim : cfg.n1.embedding_dim;
    system.networks.push_back(
        std::make_unique<N2Network>(spec, derive_seed(seed, kN2InitStream)));
  }
  return system;
}

TrainConfig train_config(const ExperimentConfig& cfg,
                         const TrainedSystem& system, std::uint64_t seed,
                         std::vector<double> alphas) {
  TrainConfig tc;
  tc.n_epochs = cfg.n_epochs;
  tc.batch_size = cfg.batch_size;
  tc.seed = derive_seed(seed, kTrainStream);
  for (const auto& net : system.networks) {
    tc.learning_rates.push_back(net->kind() == "n1" ? cfg.lr_n1 : cfg.lr_n2);
  }
  tc.mode = system.networks.size() == 1 ? TrainMode::kSelf : TrainMode::kJoint;
  if (tc.mode == TrainMode::kJoint) tc.alphas = std::move(alphas);
  return tc;
}

void save_system(const TrainedSystem& system,
                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json files = json::array();
  for (std::size_t i = 0; i < system.networks.size(); ++i) {
    const std::string name = "net_" + std::to_string(i + 1) + ".wbnc";
    save_checkpoint(*system.networks[i], dir / name);
    files.push_back(name);
  }
  write_text(dir / "system.json", json{{"networks", files}}.dump(2) + "\n");
}

TrainedSystem load_system(const std::filesystem::path& dir) {
  std::ifstream in(dir / "system.json");
  if (!in) throw DataError("no system.json in " + dir.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("bad system.json in " + dir.string() + ": " + e.what());
  }
  TrainedSystem system;
  for (const auto& name : j.at("networks")) {
    system.networks.push_back(load_checkpoint(dir / name.get<std::string>()));
  }
  if (system.networks.empty()) {
    throw DataError("system in " + dir.string() + " has no networks");
  }
  system.set_mode(Mode::kEval);
  return system;
}

namespace {

struct TrainedCell {
  TrainedSystem system;
  TrainResult log;
};

TrainedCell train_cell(const ExperimentConfig& cfg, const SeedData& data,
                       std::size_t view2_dim, std::uint64_t seed, bool with_n1,
                       bool with_n2, InputView n2_view,
                       std::vector<double> alphas,
                       const std::filesystem::path& dir) {
  TrainedCell cell;
  cell.system = make_system(cfg, data.train.num_classes(), view2_dim, seed,
                            with_n1, with_n2, n2_view);
  const TrainConfig tc =
      train_config(cfg, cell.system, seed, std::move(alphas));
  const auto examples = data.train.training_examples();
  cell.log = train(cell.system.pointers(), examples, tc);
  cell.system.set_mode(Mode::kEval);
  save_system(cell.system, dir);
  write_training_log(cell.log, dir / "train_log.jsonl");
  return cell;
}

void record(SeedResult& result, const std::string& key, EvalReport report,
            const std::filesystem::path& dir) {
  report.system_name = key;
  std::filesystem::create_directories(dir);
  write_report_csv(report, dir / "report.csv");
  result.systems[key] = std::move(report);
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  auto say = [&](const std::string& line) {
    if (log) *log << line << std::endl;
  };
  std::filesystem::create_directories(cfg.output_dir);
  write_text(cfg.output_dir / "config.json", cfg.to_json().dump(2) + "\n");

  PipelineResult result;
  for (const std::uint64_t seed : cfg.seeds) {
    const std::filesystem::path dir =
        cfg.output_dir / ("seed_" + std::to_string(seed));
    std::filesystem::create_directories(dir);
    SeedResult sr;
    sr.seed = seed;

    say("[seed " + std::to_string(seed) + "] data");
    SeedData data = run_stage("data", seed, [&] {
      SeedData d = prepare_data(cfg, seed);
      const NoiseReport noise = analyze_noise(
          cfg.synthetic ? d.train : d.train.without_annotations());
      if (noise.available) {
        write_text(dir / "noise_report.csv", noise_report_csv(noise));
      }
      return d;
    });

    std::size_t view2_dim = 0;
    if (data.pretrain) {
      say("[seed " + std::to_string(seed) + "] pretrain");
      std::unique_ptr<N1Network> pretrained = run_stage("pretrain", seed, [&] {
        auto net = pretrain_n1(cfg, *data.pretrain, seed);
        std::filesystem::create_directories(dir / "pretrain");
        save_checkpoint(*net, dir / "pretrain" / "n1.wbnc");
        return net;
      });
      say("[seed " + std::to_string(seed) + "] view2");
      run_stage("view2", seed, [&] {
        data.train = build_view2(*pretrained, data.train);
        data.val = build_view2(*pretrained, data.val);
        data.test = build_view2(*pretrained, data.test);
        return 0;
      });
      view2_dim = pretrained->spec().f2_width();
    } else {
      const auto& first = data.train.recordings().front().example;
      if (!first.view2.defined()) {
        throw StageError("view2 (seed " + std::to_string(seed) + ")",
                         "no pretraining data and no precomputed view 2");
      }
      view2_dim = first.view2.numel();
    }

    run_stage("save_test", seed, [&] {
      save_dataset(data.test, dir / "data" / "test");
      return 0;
    });

    say("[seed " + std::to_string(seed) + "] n1_self");
    TrainedCell n1_self = run_stage("n1_self", seed, [&] {
      return train_cell(cfg, data, view2_dim, seed, true, false,
                        InputView::kTransfer, {}, dir / kN1Self);
    });
    record(sr, kN1Self, evaluate(n1_self.system, data.test, Which::network(0)),
           dir / kN1Self);

    say("[seed " + std::to_string(seed) + "] n2_self");
    TrainedCell n2_self = run_stage("n2_self", seed, [&] {
      return train_cell(cfg, data, view2_dim, seed, false, true,
                        InputView::kTransfer, {}, dir / kN2Self);
    });
    record(sr, kN2Self, evaluate(n2_self.system, data.test, Which::network(0)),
           dir / kN2Self);

    run_stage("self_average", seed, [&] {
      TrainedSystem pair;
      pair.networks.push_back(std::move(n1_self.system.networks.front()));
      pair.networks.push_back(std::move(n2_self.system.networks.front()));
      save_system(pair, dir / kSelfAverage);
      record(sr, kSelfAverage, evaluate(pair, data.test, Which::average()),
             dir / kSelfAverage);
      return 0;
    });

    std::optional<TrainedSystem> best;
    double best_val_map = 0.0;
    for (const double alpha : cfg.alpha_grid) {
      say("[seed " + std::to_string(seed) +
          "] joint alpha=" + short_number(alpha));
      const std::string name = "joint_alpha_" + short_number(alpha);
      TrainedCell cell = run_stage(name, seed, [&] {
        return train_cell(cfg, data, view2_dim, seed, true, true,
                          InputView::kTransfer, broadcast_alpha(alpha, 2),
                          dir / name);
      });
      const double val_map =
          validation_map(cell.system, data.val, Which::average());
      sr.alpha_sweep.push_back({alpha, val_map});
      // The first grid value with the highest validation MAP wins.
      const bool better = !best || val_map > best_val_map;
      if (better) {
        best = std::move(cell.system);
        best_val_map = val_map;
        sr.selected_alpha = alpha;
      }
    }
    run_stage("cotrained_eval", seed, [&] {
      save_system(*best, dir / kWeblyNet);
      record(sr, kWeblyNet, evaluate(*best, data.test, Which::average()),
             dir / kWeblyNet);
      record(sr, kN1CoTrained, evaluate(*best, data.test, Which::network(0)),
             dir / kN1CoTrained);
      record(sr, kN2CoTrained, evaluate(*best, data.test, Which::network(1)),
             dir / kN2CoTrained);
      json sweep = json::array();
      for (const AlphaResult& a : sr.alpha_sweep) {
        sweep.push_back({{"alpha", a.alpha}, {"val_map", a.val_map}});
      }
      write_text(
          dir / "alpha_sweep.json",
          json{{"sweep", sweep}, {"selected_alpha", sr.selected_alpha}}.dump(
              2) +
              "\n");
      return 0;
    });

    if (cfg.raw_view_baseline) {
      say("[seed " + std::to_string(seed) + "] n2_self_pooled");
      TrainedCell pooled = run_stage(kN2SelfPooled, seed, [&] {
        return train_cell(cfg, data, view2_dim, seed, false, true,
                          InputView::kPooledSegments, {}, dir / kN2SelfPooled);
      });
      record(sr, kN2SelfPooled,
             evaluate(pooled.system, data.test, Which::network(0)),
             dir / kN2SelfPooled);
    }

    std::ostringstream maps;
    maps << "system,map\n";
    for (const std::string& key : system_order()) {
      const auto it = sr.systems.find(key);
      if (it != sr.systems.end()) {
        maps << key << "," << format_number(it->second.map) << "\n";
      }
    }
    write_text(dir / "maps.csv", maps.str());
    result.seeds.push_back(std::move(sr));
  }

  result.summary = summarize(result.seeds);
  write_text(cfg.output_dir / "summary.csv", summary_csv(result.summary));
  write_text(cfg.output_dir / "per_class.csv", per_class_csv(result.seeds));
  return result;
}

PipelineResult audit_run(const std::filesystem::path& run_dir) {
  namespace fs = std::filesystem;
  // key -> (system directory, which network)
  const std::vector<std::tuple<std::string, std::string, Which>> cells{
      {kN1Self, kN1Self, Which::network(0)},
      {kN2Self, kN2Self, Which::network(0)},
      {kSelfAverage, kSelfAverage, Which::average()},
      {kN1CoTrained, kWeblyNet, Which::network(0)},
      {kN2CoTrained, kWeblyNet, Which::network(1)},
      {kWeblyNet, kWeblyNet, Which::average()},
      {kN2SelfPooled, kN2SelfPooled, Which::network(0)},
  };
  std::vector<std::pair<std::uint64_t, fs::path>> seed_dirs;
  for (const fs::directory_entry& e : fs::directory_iterator(run_dir)) {
    const std::string name = e.path().filename().string();
    if (!e.is_directory() || name.rfind("seed_", 0) != 0) continue;
    seed_dirs.emplace_back(std::stoull(name.substr(5)), e.path());
  }
  if (seed_dirs.empty()) {
    throw DataError("no seed_* directories in " + run_dir.string());
  }
  std::sort(seed_dirs.begin(), seed_dirs.end());
  PipelineResult result;
  for (const auto& [seed, dir] : seed_dirs) {
    const Dataset test = load_dataset(dir / "data" / "test");
    SeedResult sr;
    sr.seed = seed;
    for (const auto& [key, sub, which] : cells) {
      if (!fs::exists(dir / sub / "system.json")) continue;
      TrainedSystem system = load_system(dir / sub);
      system.set_mode(Mode::kEval);
      sr.systems[key] = evaluate(system, test, which, key);
    }
    result.seeds.push_back(std::move(sr));
  }
  result.summary = summarize(result.seeds);
  return result;
}

std::vector<SummaryRow> summarize(const std::vector<SeedResult>& seeds) {
  std::vector<SummaryRow> rows;
  for (const std::string& key : system_order()) {
    SummaryRow row;
    row.system = key;
    for (const SeedResult& s : seeds) {
      const auto it = s.systems.find(key);
      if (it != s.systems.end()) row.per_seed.push_back(it->second.map);
    }
    if (row.per_seed.empty()) continue;
    const auto n = static_cast<double>(row.per_seed.size());
    for (const double v : row.per_seed) row.mean += v;
    row.mean /= n;
    if (row.per_seed.size() > 1) {
      double sq = 0.0;
      for (const double v : row.per_seed) sq += (v - row.mean) * (v - row.mean);
      row.std = std::sqrt(sq / (n - 1.0));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "system,label,mean_map,std_map,n_seeds,per_seed\n";
  for (const SummaryRow& r : rows) {
    out << r.system << ",\"" << system_label(r.system) << "\","
        << format_number(r.mean) << "," << format_number(r.std) << ","
        << r.per_seed.size() << ",";
    for (std::size_t i = 0; i < r.per_seed.size(); ++i) {
      out << (i ? ";" : "") << format_number(r.per_seed[i]);
    }
    out << "\n";
  }
  return out.str();
}

std::string per_class_csv(const std::vector<SeedResult>& seeds) {
  // class -> (sum, count) for baseline and WeblyNet, in first-seen order.
  std::vector<std::string> classes;
  std::map<std::string, std::array<double, 4>> acc;
  for (const SeedResult& s : seeds) {
    for (const auto& [slot, key] :
         {std::pair<int, const char*>{0, kN1Self}, {2, kWeblyNet}}) {
      const auto it = s.systems.find(key);
      if (it == s.systems.end()) continue;
      for (const ClassAP& c : it->second.per_class_ap) {
        if (!acc.count(c.class_name)) {
          classes.push_back(c.class_name);
          acc[c.class_name] = {0.0, 0.0, 0.0, 0.0};
        }
        acc[c.class_name][slot] += c.ap;
        acc[c.class_name][slot + 1] += 1.0;
      }
    }
  }
  std::ostringstream out;
  out << "class,n1_self_ap,weblynet_ap,gain\n";
  for (const std::string& c : classes) {
    const auto& a = acc[c];
    const double base = a[1] > 0 ? a[0] / a[1] : 0.0;
    const double webly = a[3] > 0 ? a[2] / a[3] : 0.0;
    out << c << "," << format_number(base) << "," << format_number(webly) << ","
        << format_number(webly - base) << "\n";
  }
  return out.str();
}

NoiseReport analyze_noise(const Dataset& ds) {
  NoiseReport report;
  if (!ds.has_annotations()) return report;
  report.available = true;
  for (std::size_t c = 0; c < ds.num_classes(); ++c) {
    NoiseRow row;
    row.class_name = ds.class_names()[c];
    for (const Recording& r : ds.recordings()) {
      if (!r.example.labels[c]) continue;
      ++row.observed_positives;
      if (r.annotation->flags[c] == NoiseFlag::kFalsePositive) {
        ++row.false_positives;
      }
    }
    row.rate = row.observed_positives == 0
                   ? 0.0
                   : static_cast<double>(row.false_positives) /
                         static_cast<double>(row.observed_positives);
    report.rows.push_back(std::move(row));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const NoiseRow& a, const NoiseRow& b) {
                     return a.false_positives > b.false_positives;
                   });
  for (std::size_t i = 0; i < report.rows.size() && i < 5; ++i) {
    report.rows[i].top5 = report.rows[i].false_positives > 0;
  }
  return report;
}

std::string noise_report_csv(const NoiseReport& report) {
  if (!report.available) return "unavailable for real data\n";
  std::ostringstream out;
  out << "class,observed_positives,false_positives,fp_rate,top5\n";
  for (const NoiseRow& r : report.rows) {
    out << r.class_name << "," << r.observed_positives << ","
        << r.false_positives << "," << format_number(r.rate) << ","
        << (r.top5 ? 1 : 0) << "\n";
  }
  return out.str();
}

}  // namespace weblynet
