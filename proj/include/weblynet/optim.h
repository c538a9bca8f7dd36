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

#ifndef WEBLYNET_OPTIM_H_
#define WEBLYNET_OPTIM_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "weblynet/data.h"
#include "weblynet/losses.h"
#include "weblynet/networks.h"
#include "weblynet/tensor.h"

namespace weblynet {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options = {});

  // Applies one update from the parameters' current gradients, then zeroes
  // them. Parameters that never received a gradient see g = 0.
  void step();

  // Resumes from saved moments; every buffer must match its parameter's
  // size (ContractError otherwise).
  void restore(std::vector<std::vector<double>> m,
               std::vector<std::vector<double>> v, std::int64_t t);

  std::int64_t steps() const { return t_; }
  const AdamOptions& options() const { return options_; }
  std::span<const double> first_moment(std::size_t i) const { return m_[i]; }
  std::span<const double> second_moment(std::size_t i) const { return v_[i]; }

 private:
  std::vector<Tensor> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t t_ = 0;
};

enum class TrainMode {
  kJoint,  // K >= 2 networks, BCE terms plus weighted divergences
  kSelf,   // one network, BCE only
};

std::string_view train_mode_name(TrainMode mode);

struct TrainConfig {
  std::size_t n_epochs = 50;
  std::size_t batch_size = 32;
  // One per network; empty means 1e-3 for every network.
  std::vector<double> learning_rates;
  // K(K-1)/2 pair weights in joint mode; ignored in self mode.
  std::vector<double> alphas;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::kJoint;
};

struct EpochLog {
  std::size_t epoch = 0;
  // Averaged over every recording seen in the epoch.
  LossBreakdown loss;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
};

// Trains the networks together: per minibatch, every network's forward on
// its own view, the combined loss averaged over the batch, one backward and
// one Adam step per network. Batches come from a seeded shuffle; dropout
// draws come from a stream keyed by the run seed and the network's seed.
TrainResult train(std::span<Network* const> networks,
                  std::span<const TrainingExample* const> data,
                  const TrainConfig& cfg);

// One JSON object per epoch: epoch, per_network_bce, per_pair_divergence,
// alphas, total.
void write_training_log(const TrainResult& result,
                        const std::filesystem::path& path);

// A set of jointly (or individually) trained networks.
struct TrainedSystem {
  std::vector<std::unique_ptr<Network>> networks;

  void set_mode(Mode mode);
  std::vector<Network*> pointers() const;
};

// Which output of a system to read.
class Which {
 public:
  static Which network(std::size_t index) { return Which(false, index); }
  static Which average() { return Which(true, 0); }
  // "n1", "n2", ... or "average".
  static Which parse(std::string_view name);

  bool is_average() const { return average_; }
  std::size_t index() const { return index_; }
  std::string name() const;

 private:
  Which(bool average, std::size_t index) : average_(average), index_(index) {}
  bool average_;
  std::size_t index_;
};

// Recording-level posteriors. Every network read must be in eval mode;
// `average` is the elementwise mean over all networks.
std::vector<double> predict(const TrainedSystem& system,
                            const TrainingExample& recording, Which which);

}  // namespace weblynet

#endif  // WEBLYNET_OPTIM_H_
