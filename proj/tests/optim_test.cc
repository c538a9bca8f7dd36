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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "test_util.h"
#include "weblynet/errors.h"
#include "weblynet/losses.h"

namespace weblynet {
namespace {

using testing::flat_state;
using testing::tiny_n1_spec;
using testing::tiny_n2_spec;
using testing::two_view_dataset;

TEST(AdamTest, FirstStepMovesByLearningRate) {
  Tensor p = Tensor::parameter({3}, {1.0, -2.0, 0.5});
  Adam adam({p}, AdamOptions{0.01});
  const std::vector<double> g{0.3, -4.0, 1e-3};
  std::copy(g.begin(), g.end(), p.mutable_grad().begin());
  adam.step();
  // m_hat = g and v_hat = g^2 after bias correction.
  const std::vector<double> start{1.0, -2.0, 0.5};
  for (std::size_t i = 0; i < 3; ++i) {
    const double expected = start[i] - 0.01 * g[i] / (std::abs(g[i]) + 1e-8);
    EXPECT_NEAR(p.data()[i], expected, 1e-15);
    EXPECT_NEAR(std::abs(p.data()[i] - start[i]), 0.01, 1e-7);
  }
  EXPECT_EQ(adam.steps(), 1);
  for (double v : p.grad()) EXPECT_EQ(v, 0.0);
}

TEST(AdamTest, ConstantGradientApproachesSignStep) {
  Tensor p = Tensor::parameter({2}, {0.0, 0.0});
  Adam adam({p}, AdamOptions{1e-3});
  double before[2] = {0.0, 0.0};
  for (int t = 0; t < 5000; ++t) {
    before[0] = p.data()[0];
    before[1] = p.data()[1];
    p.mutable_grad()[0] = 2.5;
    p.mutable_grad()[1] = -0.01;
    adam.step();
  }
  EXPECT_NEAR(p.data()[0] - before[0], -1e-3, 1e-9);
  EXPECT_NEAR(p.data()[1] - before[1], 1e-3, 1e-8);
}

TEST(AdamTest, ZeroGradientLeavesParametersAndCountsStep) {
  Tensor p = Tensor::parameter({2}, {0.25, -0.75});
  Adam adam({p});
  adam.step();
  adam.step();
  EXPECT_EQ(p.data()[0], 0.25);
  EXPECT_EQ(p.data()[1], -0.75);
  EXPECT_EQ(adam.steps(), 2);
}

TEST(AdamTest, MomentBuffersMirrorParameters) {
  Tensor a = Tensor::parameter({2, 3}, std::vector<double>(6, 1.0));
  Tensor b = Tensor::parameter({4}, std::vector<double>(4, 1.0));
  Adam adam({a, b});
  EXPECT_EQ(adam.first_moment(0).size(), 6u);
  EXPECT_EQ(adam.second_moment(1).size(), 4u);
}

TEST(AdamTest, ShapeMismatchIsContractError) {
  Tensor a = Tensor::parameter({2}, {1.0, 2.0});
  Adam adam({a});
  EXPECT_THROW(adam.restore({{0.0}}, {{0.0, 0.0}}, 1), ContractError);
  EXPECT_THROW(adam.restore({{0.0, 0.0}, {0.0}}, {{0.0, 0.0}}, 1),
               ContractError);
  EXPECT_NO_THROW(adam.restore({{0.1, 0.1}}, {{0.2, 0.2}}, 3));
  EXPECT_EQ(adam.steps(), 3);
  EXPECT_THROW(Adam({Tensor({1}, {0.0})}), ContractError);
}

TEST(AdamTest, SmallLearningRateDecreasesLossOnFixedBatch) {
  const Dataset ds = two_view_dataset(8, 3, 11);
  N1Network net(tiny_n1_spec(3), 4);
  Adam adam(net.parameters(), AdamOptions{1e-4});
  const auto examples = ds.training_examples();
  auto batch_loss = [&] {
    std::vector<WeblyLoss> parts;
    for (const TrainingExample* ex : examples) {
      const Tensor out = net.forward(*ex, nullptr);
      parts.push_back({bce_multilabel(out, label_tensor(ex->labels)), {}});
    }
    return mean_over_batch(parts).total;
  };
  // Eval mode keeps batch-norm statistics fixed, so the objective is one
  // fixed function of the parameters.
  net.set_mode(Mode::kEval);
  int decreases = 0;
  double previous = batch_loss().item();
  for (int step = 0; step < 10; ++step) {
    Tensor loss = batch_loss();
    backward(loss);
    adam.step();
    const double now = batch_loss().item();
    if (now < previous) ++decreases;
    previous = now;
  }
  EXPECT_GE(decreases, 9);
}

struct Pair {
  std::unique_ptr<N1Network> n1;
  std::unique_ptr<N2Network> n2;
};

Pair make_pair(const Dataset& ds, std::uint64_t s1, std::uint64_t s2) {
  const std::size_t dim = ds.recordings().front().example.view2.numel();
  return {std::make_unique<N1Network>(tiny_n1_spec(ds.num_classes()), s1),
          std::make_unique<N2Network>(tiny_n2_spec(ds.num_classes(), dim), s2)};
}

TrainConfig small_config(std::uint64_t seed, std::size_t epochs = 2) {
  TrainConfig cfg;
  cfg.n_epochs = epochs;
  cfg.batch_size = 5;
  cfg.seed = seed;
  return cfg;
}

TEST(TrainTest, ZeroAlphaJointEqualsIndependentTraining) {
  const Dataset ds = two_view_dataset(24, 3, 21);
  const auto examples = ds.training_examples();

  Pair joint = make_pair(ds, 100, 200);
  TrainConfig cfg = small_config(9);
  cfg.alphas = {0.0};
  Network* both[] = {joint.n1.get(), joint.n2.get()};
  train(both, examples, cfg);

  Pair self = make_pair(ds, 100, 200);
  TrainConfig self_cfg = small_config(9);
  self_cfg.mode = TrainMode::kSelf;
  Network* only_n1[] = {self.n1.get()};
  Network* only_n2[] = {self.n2.get()};
  train(only_n1, examples, self_cfg);
  train(only_n2, examples, self_cfg);

  for (auto [a, b] :
       {std::pair<Network*, Network*>{joint.n1.get(), self.n1.get()},
        {joint.n2.get(), self.n2.get()}}) {
    const auto va = flat_state(*a);
    const auto vb = flat_state(*b);
    ASSERT_EQ(va.size(), vb.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) {
      worst = std::max(worst, std::abs(va[i] - vb[i]));
    }
    EXPECT_LE(worst, 1e-10);
  }
}

TEST(TrainTest, NonZeroAlphaCouplesTheNetworks) {
  const Dataset ds = two_view_dataset(24, 3, 21);
  const auto examples = ds.training_examples();
  Pair coupled = make_pair(ds, 100, 200);
  TrainConfig cfg = small_config(9);
  cfg.alphas = {1.0};
  Network* both[] = {coupled.n1.get(), coupled.n2.get()};
  train(both, examples, cfg);
  Pair self = make_pair(ds, 100, 200);
  TrainConfig self_cfg = small_config(9);
  self_cfg.mode = TrainMode::kSelf;
  Network* only_n1[] = {self.n1.get()};
  train(only_n1, examples, self_cfg);
  EXPECT_NE(flat_state(*coupled.n1), flat_state(*self.n1));
}

TEST(TrainTest, ZeroEpochsLeaveParametersUnchanged) {
  const Dataset ds = two_view_dataset(10, 3, 5);
  Pair p = make_pair(ds, 1, 2);
  const auto before = flat_state(*p.n1);
  TrainConfig cfg = small_config(3, 0);
  cfg.alphas = {0.5};
  Network* both[] = {p.n1.get(), p.n2.get()};
  const TrainResult r = train(both, ds.training_examples(), cfg);
  EXPECT_TRUE(r.epochs.empty());
  EXPECT_EQ(flat_state(*p.n1), before);
}

TEST(TrainTest, LogHasOneRecordPerEpoch) {
  const Dataset ds = two_view_dataset(10, 3, 5);
  Pair p = make_pair(ds, 1, 2);
  TrainConfig cfg = small_config(3, 3);
  cfg.alphas = {0.5};
  Network* both[] = {p.n1.get(), p.n2.get()};
  const TrainResult r = train(both, ds.training_examples(), cfg);
  ASSERT_EQ(r.epochs.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(r.epochs[e].epoch, e + 1);
    EXPECT_EQ(r.epochs[e].loss.per_network_bce.size(), 2u);
    EXPECT_EQ(r.epochs[e].loss.per_pair_divergence.size(), 1u);
    EXPECT_EQ(r.epochs[e].loss.total, r.epochs[e].loss.recompose());
  }
  const auto path =
      std::filesystem::temp_directory_path() / "weblynet_train_log.jsonl";
  write_training_log(r, path);
  std::ifstream in(path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    EXPECT_NE(line.find("\"per_pair_divergence\""), std::string::npos);
    ++lines;
  }
  EXPECT_EQ(lines, 3u);
  std::filesystem::remove(path);
}

TEST(TrainTest, DeterministicUnderFixedSeed) {
  const Dataset ds = two_view_dataset(16, 3, 8);
  TrainConfig cfg = small_config(42);
  cfg.alphas = {0.3};
  std::vector<std::vector<double>> states;
  for (int run = 0; run < 2; ++run) {
    Pair p = make_pair(ds, 7, 8);
    Network* both[] = {p.n1.get(), p.n2.get()};
    train(both, ds.training_examples(), cfg);
    auto s1 = flat_state(*p.n1);
    const auto s2 = flat_state(*p.n2);
    s1.insert(s1.end(), s2.begin(), s2.end());
    states.push_back(std::move(s1));
  }
  ASSERT_EQ(states[0].size(), states[1].size());
  for (std::size_t i = 0; i < states[0].size(); ++i) {
    ASSERT_EQ(states[0][i], states[1][i]) << "first difference at " << i;
  }
}

TEST(TrainTest, MissingViewFailsBeforeTraining) {
  const SyntheticWorld world(3, 1);
  const Dataset ds = world.generate(6, NoiseModel::none(3), 2);  // no view 2
  N1Network n1(tiny_n1_spec(3), 1);
  N2Network n2(tiny_n2_spec(3, 32), 2);
  const auto before = flat_state(n1);
  TrainConfig cfg = small_config(1);
  cfg.alphas = {0.1};
  Network* both[] = {&n1, &n2};
  EXPECT_THROW(train(both, ds.training_examples(), cfg), DataError);
  EXPECT_EQ(flat_state(n1), before);
}

TEST(TrainTest, ConfigContracts) {
  const Dataset ds = two_view_dataset(6, 3, 5);
  Pair p = make_pair(ds, 1, 2);
  const auto examples = ds.training_examples();
  Network* one[] = {p.n1.get()};
  Network* both[] = {p.n1.get(), p.n2.get()};
  TrainConfig joint = small_config(1);
  joint.alphas = {0.1};
  EXPECT_THROW(train(one, examples, joint), ContractError);
  joint.alphas = {};
  EXPECT_THROW(train(both, examples, joint), ContractError);
  TrainConfig self = small_config(1);
  self.mode = TrainMode::kSelf;
  EXPECT_THROW(train(both, examples, self), ContractError);
  joint.alphas = {0.1};
  joint.learning_rates = {1e-3};
  EXPECT_THROW(train(both, examples, joint), ContractError);
}

// N2 whose output is the constant sigmoid(logit) in every class.
std::unique_ptr<Network> constant_net(std::size_t classes, double p) {
  auto net = std::make_unique<N2Network>(tiny_n2_spec(classes, 4), 1);
  for (const auto& [name, param] : net->named_parameters()) {
    Tensor handle = param;  // shares storage with the network
    auto values = handle.mutable_data();
    const double v = name == "out.bias" ? std::log(p / (1.0 - p)) : 0.0;
    std::fill(values.begin(), values.end(), v);
  }
  net->set_mode(Mode::kEval);
  return net;
}

TrainingExample vector_example() {
  TrainingExample ex;
  ex.id = "r";
  ex.view1 = Tensor({1, 4}, std::vector<double>(4, 0.0));
  ex.view2 = Tensor({4}, {0.1, 0.2, 0.3, 0.4});
  ex.labels = {1};
  return ex;
}

TEST(PredictTest, AverageOfOutputs) {
  TrainedSystem sys;
  sys.networks.push_back(constant_net(1, 0.2));
  sys.networks.push_back(constant_net(1, 0.8));
  const TrainingExample ex = vector_example();
  EXPECT_NEAR(predict(sys, ex, Which::average())[0], 0.5, 1e-15);
  EXPECT_NEAR(predict(sys, ex, Which::network(0))[0], 0.2, 1e-15);
  EXPECT_NEAR(predict(sys, ex, Which::network(1))[0], 0.8, 1e-15);

  TrainedSystem swapped;
  swapped.networks.push_back(constant_net(1, 0.8));
  swapped.networks.push_back(constant_net(1, 0.2));
  EXPECT_EQ(predict(swapped, ex, Which::average()),
            predict(sys, ex, Which::average()));
}

TEST(PredictTest, IdenticalNetworksAverageToEither) {
  TrainedSystem sys;
  sys.networks.push_back(std::make_unique<N2Network>(tiny_n2_spec(2, 4), 5));
  sys.networks.push_back(std::make_unique<N2Network>(tiny_n2_spec(2, 4), 5));
  sys.set_mode(Mode::kEval);
  const TrainingExample ex = [] {
    TrainingExample e = vector_example();
    e.labels = {1, 0};
    return e;
  }();
  const auto avg = predict(sys, ex, Which::average());
  const auto one = predict(sys, ex, Which::network(0));
  for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(avg[c], one[c], 1e-15);
}

TEST(PredictTest, RequiresEvalMode) {
  TrainedSystem sys;
  sys.networks.push_back(constant_net(1, 0.3));
  sys.networks.front()->set_mode(Mode::kTrain);
  EXPECT_THROW(predict(sys, vector_example(), Which::network(0)),
               ContractError);
}

TEST(PredictTest, WhichParsing) {
  EXPECT_TRUE(Which::parse("average").is_average());
  EXPECT_EQ(Which::parse("n1").index(), 0u);
  EXPECT_EQ(Which::parse("n2").index(), 1u);
  EXPECT_EQ(Which::parse("n2").name(), "n2");
  EXPECT_THROW(Which::parse("n0"), ContractError);
  EXPECT_THROW(Which::parse("mean"), ContractError);
}

}  // namespace
}  // namespace weblynet
