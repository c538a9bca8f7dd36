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

#include "weblynet/optim.h"

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "json.hpp"
#include "random.h"
#include "weblynet/errors.h"

namespace weblynet {

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.lr > 0.0)) throw ContractError("Adam: lr must be positive");
  for (const Tensor& p : params_) {
    if (!p.requires_grad()) {
      throw ContractError("Adam: every parameter must require grad");
    }
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::restore(std::vector<std::vector<double>> m,
                   std::vector<std::vector<double>> v, std::int64_t t) {
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw ContractError("Adam::restore: expected moments for " +
                        std::to_string(params_.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (m[i].size() != params_[i].numel() ||
        v[i].size() != params_[i].numel()) {
      throw ContractError("Adam::restore: moment buffers of parameter " +
                          std::to_string(i) + " have the wrong size");
    }
  }
  if (t < 0) throw ContractError("Adam::restore: negative step count");
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].has_grad() && params_[i].grad().size() != m_[i].size()) {
      throw ContractError("Adam: gradient of parameter " + std::to_string(i) +
                          " does not match its moment buffers");
    }
    if (params_[i].numel() != m_[i].size()) {
      throw ContractError("Adam: parameter " + std::to_string(i) +
                          " changed size since construction");
    }
  }
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const bool has_grad = p.has_grad();
    const std::span<const double> g =
        has_grad ? p.grad() : std::span<const double>();
    auto values = p.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double gj = has_grad ? g[j] : 0.0;
      m[j] = b1 * m[j] + (1.0 - b1) * gj;
      v[j] = b2 * v[j] + (1.0 - b2) * gj * gj;
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      values[j] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
    if (has_grad) p.zero_grad();
  }
}

std::string_view train_mode_name(TrainMode mode) {
  return mode == TrainMode::kJoint ? "joint" : "self";
}

namespace {

void check_views(std::span<Network* const> networks,
                 std::span<const TrainingExample* const> data) {
  for (const Network* net : networks) {
    for (const TrainingExample* ex : data) {
      const bool ok = net->input_view() == InputView::kTransfer
                          ? ex->view2.defined()
                          : ex->view1.defined();
      if (!ok) {
        throw DataError("recording '" + ex->id + "' lacks the " +
                        std::string(input_view_name(net->input_view())) +
                        " view needed by a " + std::string(net->kind()) +
                        " network");
      }
    }
  }
}

}  // namespace

TrainResult train(std::span<Network* const> networks,
                  std::span<const TrainingExample* const> data,
                  const TrainConfig& cfg) {
  const std::size_t k = networks.size();
  if (cfg.mode == TrainMode::kSelf && k != 1) {
    throw ContractError("self training takes exactly one network");
  }
  if (cfg.mode == TrainMode::kJoint && k < 2) {
    throw ContractError("joint training needs at least two networks");
  }
  const std::vector<double> alphas =
      cfg.mode == TrainMode::kJoint ? cfg.alphas : std::vector<double>{};
  if (alphas.size() != pair_count(k)) {
    throw ContractError("joint training of " + std::to_string(k) +
                        " networks needs " + std::to_string(pair_count(k)) +
                        " alphas, got " + std::to_string(alphas.size()));
  }
  for (const double a : alphas) {
    if (!(a >= 0.0)) throw ContractError("divergence weights must be >= 0");
  }
  std::vector<double> lrs = cfg.learning_rates;
  if (lrs.empty()) lrs.assign(k, AdamOptions{}.lr);
  if (lrs.size() != k) {
    throw ContractError("need one learning rate per network");
  }
  if (cfg.batch_size == 0) throw ContractError("batch_size must be positive");
  check_views(networks, data);
  const std::size_t num_classes = networks.front()->num_classes();
  for (const Network* net : networks) {
    if (net->num_classes() != num_classes) {
      throw ContractError("networks disagree on the number of classes");
    }
  }
  for (const TrainingExample* ex : data) {
    if (ex->labels.size() != num_classes) {
      throw DataError("recording '" + ex->id + "' has " +
                      std::to_string(ex->labels.size()) +
                      " labels, networks "
                      "predict " +
                      std::to_string(num_classes));
    }
  }

  std::vector<Adam> optimizers;
  std::vector<std::mt19937_64> dropout_rngs;
  for (std::size_t i = 0; i < k; ++i) {
    optimizers.emplace_back(networks[i]->parameters(), AdamOptions{lrs[i]});
    dropout_rngs.emplace_back(internal::derive_seed(
        internal::derive_seed(cfg.seed, networks[i]->seed()), 0xd409));
    networks[i]->set_mode(Mode::kTrain);
    networks[i]->zero_grad();
  }
  std::mt19937_64 shuffle_rng(internal::derive_seed(cfg.seed, 0x5f1e));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= cfg.n_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(internal::canonical(shuffle_rng) *
                                              static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    EpochLog log;
    log.epoch = epoch;
    log.loss.alphas = alphas;
    log.loss.per_network_bce.assign(k, 0.0);
    log.loss.per_pair_divergence.assign(alphas.size(), 0.0);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const TrainingExample*> examples;
      for (std::size_t b = start; b < end; ++b) {
        examples.push_back(data[order[b]]);
      }
      std::vector<std::vector<Tensor>> net_outs;
      for (std::size_t n = 0; n < k; ++n) {
        net_outs.push_back(
            networks[n]->forward_batch(examples, &dropout_rngs[n]));
      }
      std::vector<WeblyLoss> per_recording;
      per_recording.reserve(examples.size());
      for (std::size_t b = 0; b < examples.size(); ++b) {
        std::vector<Tensor> outs;
        outs.reserve(k);
        for (std::size_t n = 0; n < k; ++n) outs.push_back(net_outs[n][b]);
        per_recording.push_back(
            weblynet_loss(outs, label_tensor(examples[b]->labels), alphas));
      }
      WeblyLoss batch = mean_over_batch(per_recording);
      backward(batch.total);
      for (Adam& opt : optimizers) opt.step();

      const double weight = static_cast<double>(end - start);
      for (std::size_t n = 0; n < k; ++n) {
        log.loss.per_network_bce[n] +=
            weight * batch.breakdown.per_network_bce[n];
      }
      for (std::size_t p = 0; p < alphas.size(); ++p) {
        log.loss.per_pair_divergence[p] +=
            weight * batch.breakdown.per_pair_divergence[p];
      }
    }
    if (!order.empty()) {
      const double scale = 1.0 / static_cast<double>(order.size());
      for (double& v : log.loss.per_network_bce) v *= scale;
      for (double& v : log.loss.per_pair_divergence) v *= scale;
    }
    log.loss.total = log.loss.recompose();
    result.epochs.push_back(std::move(log));
  }
  return result;
}

void write_training_log(const TrainResult& result,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write training log " + path.string());
  for (const EpochLog& e : result.epochs) {
    nlohmann::json j;
    j["epoch"] = e.epoch;
    j["per_network_bce"] = e.loss.per_network_bce;
    j["per_pair_divergence"] = e.loss.per_pair_divergence;
    j["alphas"] = e.loss.alphas;
    j["total"] = e.loss.total;
    out << j.dump() << "\n";
  }
}

void TrainedSystem::set_mode(Mode mode) {
  for (auto& net : networks) net->set_mode(mode);
}

std::vector<Network*> TrainedSystem::pointers() const {
  std::vector<Network*> out;
  for (const auto& net : networks) out.push_back(net.get());
  return out;
}

Which Which::parse(std::string_view name) {
  if (name == "average") return average();
  if (name.size() >= 2 && name[0] == 'n') {
    std::size_t index = 0;
    for (const char ch : name.substr(1)) {
      if (ch < '0' || ch > '9') {
        throw ContractError("unknown output selector '" + std::string(name) +
                            "'");
      }
      index = index * 10 + static_cast<std::size_t>(ch - '0');
    }
    if (index >= 1) return network(index - 1);
  }
  throw ContractError("unknown output selector '" + std::string(name) + "'");
}

std::string Which::name() const {
  return average_ ? "average" : "n" + std::to_string(index_ + 1);
}

std::vector<double> predict(const TrainedSystem& system,
                            const TrainingExample& recording, Which which) {
  if (system.networks.empty()) throw ContractError("empty system");
  auto run = [&](std::size_t i) {
    Network& net = *system.networks.at(i);
    if (net.mode() != Mode::kEval) {
      throw ContractError("predict needs networks in eval mode");
    }
    const Tensor out = net.forward(recording, nullptr);
    return std::vector<double>(out.data().begin(), out.data().end());
  };
  if (!which.is_average()) {
    if (which.index() >= system.networks.size()) {
      throw ContractError("system has no network " + which.name());
    }
    return run(which.index());
  }
  std::vector<double> acc = run(0);
  for (std::size_t i = 1; i < system.networks.size(); ++i) {
    const std::vector<double> out = run(i);
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += out[c];
  }
  const double scale = 1.0 / static_cast<double>(system.networks.size());
  for (double& v : acc) v *= scale;
  return acc;
}

}  // namespace weblynet
