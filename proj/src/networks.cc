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

#include "weblynet/networks.h"

#include <cmath>
#include <string>
#include <utility>

#include "json.hpp"
#include "random.h"
#include "weblynet/errors.h"

namespace weblynet {
namespace {

using json = nlohmann::json;

using internal::canonical;

// Kaiming-uniform for ReLU layers: U(-b, b) with b = sqrt(6 / fan_in).
std::vector<double> kaiming_uniform(std::size_t n, std::size_t fan_in,
                                    std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> v(n);
  for (double& x : v) x = (2.0 * canonical(rng) - 1.0) * bound;
  return v;
}

}  // namespace

std::string_view input_view_name(InputView view) {
  switch (view) {
    case InputView::kSegments:
      return "segments";
    case InputView::kTransfer:
      return "transfer";
    case InputView::kPooledSegments:
      return "pooled_segments";
  }
  return "unknown";
}

InputView parse_input_view(std::string_view name) {
  if (name == "segments") return InputView::kSegments;
  if (name == "transfer") return InputView::kTransfer;
  if (name == "pooled_segments") return InputView::kPooledSegments;
  throw ContractError("unknown input view '" + std::string(name) + "'");
}

std::size_t scale_width(std::size_t width, double scale) {
  if (!(scale > 0.0)) throw ContractError("width_scale must be positive");
  const auto scaled = static_cast<std::size_t>(
      std::llround(static_cast<double>(width) * scale));
  return scaled == 0 ? 1 : scaled;
}

std::size_t N1Spec::block_width(std::size_t block) const {
  return scale_width(block_filters.at(block), width_scale);
}

void N1Spec::validate() const {
  if (num_classes == 0) throw ContractError("N1Spec: num_classes must be > 0");
  if (f1_kernel_w == 0 || f1_filters == 0 || f2_filters == 0) {
    throw ContractError("N1Spec: layer sizes must be positive");
  }
  for (const std::size_t f : block_filters) {
    if (f == 0) throw ContractError("N1Spec: block filters must be positive");
  }
  if (embedding_dim % 16 != 0 || embedding_dim / 16 != f1_kernel_w) {
    throw ContractError(
        "N1Spec: embedding width " + std::to_string(embedding_dim) +
        " does not pool down to f1_kernel_w " + std::to_string(f1_kernel_w));
  }
  scale_width(1, width_scale);
}

std::size_t N2Spec::hidden_width(std::size_t layer) const {
  return scale_width(hidden.at(layer), width_scale);
}

void N2Spec::validate() const {
  if (num_classes == 0) throw ContractError("N2Spec: num_classes must be > 0");
  if (input_dim == 0) throw ContractError("N2Spec: input_dim must be > 0");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ContractError("N2Spec: dropout_p must lie in [0, 1)");
  }
  for (const std::size_t h : hidden) {
    if (h == 0) throw ContractError("N2Spec: hidden sizes must be positive");
  }
  scale_width(1, width_scale);
}

std::vector<Tensor> Network::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(t);
  return out;
}

void Network::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

Tensor& Network::add_parameter(std::string name, Shape shape,
                               std::vector<double> values) {
  params_.emplace_back(std::move(name),
                       Tensor::parameter(std::move(shape), std::move(values)));
  return params_.back().second;
}

std::vector<Tensor> Network::forward_batch(
    std::span<const TrainingExample* const> batch, std::mt19937_64* rng) {
  std::vector<Tensor> outs;
  outs.reserve(batch.size());
  for (const TrainingExample* ex : batch) outs.push_back(forward(*ex, rng));
  return outs;
}

std::vector<StateEntry> Network::parameter_state() {
  std::vector<StateEntry> out;
  for (auto& [name, t] : params_) {
    out.push_back({name, t.shape(), t.mutable_data()});
  }
  return out;
}

N1Network::N1Network(N1Spec spec, std::uint64_t seed)
    : Network(seed), spec_(std::move(spec)) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  auto add_conv = [&](const std::string& prefix, std::size_t in,
                      std::size_t out, Window2d kernel, Window2d pad) {
    const std::size_t fan_in = in * kernel.h * kernel.w;
    ConvLayer layer;
    layer.weight =
        &add_parameter(prefix + ".weight", {out, in, kernel.h, kernel.w},
                       kaiming_uniform(out * fan_in, fan_in, rng));
    layer.gamma = &add_parameter(prefix + ".bn.gamma", {out},
                                 std::vector<double>(out, 1.0));
    layer.beta = &add_parameter(prefix + ".bn.beta", {out},
                                std::vector<double>(out, 0.0));
    layer.bn.running_mean.assign(out, 0.0);
    layer.bn.running_var.assign(out, 1.0);
    layer.pad = pad;
    layers_.push_back(std::move(layer));
  };

  std::size_t channels = 1;
  for (std::size_t b = 0; b < 4; ++b) {
    const std::size_t width = spec_.block_width(b);
    for (std::size_t c = 0; c < 2; ++c) {
      add_conv("b" + std::to_string(b + 1) + ".conv" + std::to_string(c + 1),
               channels, width, {3, 3}, {1, 1});
      channels = width;
    }
  }
  add_conv("f1", channels, spec_.f1_width(), {1, spec_.f1_kernel_w}, {0, 0});
  add_conv("f2", spec_.f1_width(), spec_.f2_width(), {1, 1}, {0, 0});
  const std::size_t f2 = spec_.f2_width();
  c_weight_ = &add_parameter("c.weight", {spec_.num_classes, f2, 1, 1},
                             kaiming_uniform(spec_.num_classes * f2, f2, rng));
  c_bias_ = &add_parameter("c.bias", {spec_.num_classes},
                           std::vector<double>(spec_.num_classes, 0.0));
}

std::vector<Tensor> N1Network::trunk(std::span<const Tensor> xs) {
  const bool training = mode() == Mode::kTrain;
  std::vector<Tensor> hs;
  std::vector<std::size_t> offsets{0};
  for (const Tensor& x : xs) {
    if (x.rank() != 2 || x.dim(1) != spec_.embedding_dim) {
      throw DimensionError("N1 expects segments x " +
                           std::to_string(spec_.embedding_dim) +
                           " input, got " + shape_to_string(x.shape()));
    }
    hs.push_back(reshape(x, {1, x.dim(0), x.dim(1)}));
    offsets.push_back(offsets.back() + x.dim(0));
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    ConvLayer& layer = layers_[i];
    for (Tensor& h : hs) {
      h = conv2d(h, *layer.weight, Tensor(), {1, 1}, layer.pad);
    }
    // Batch statistics span every segment of every recording in the batch.
    Tensor joined = hs.size() == 1 ? hs[0] : concat_rows(hs);
    joined =
        relu(batch_norm(joined, *layer.gamma, *layer.beta, layer.bn, training));
    // The eight block convolutions pool after every second layer.
    if (i < 8 && i % 2 == 1) joined = max_pool2d(joined, {1, 2}, {1, 2});
    if (hs.size() == 1) {
      hs[0] = joined;
    } else {
      for (std::size_t r = 0; r < hs.size(); ++r) {
        hs[r] = slice_rows(joined, offsets[r], offsets[r + 1]);
      }
    }
  }
  return hs;
}

std::vector<N1Output> N1Network::forward_segments_batch(
    std::span<const Tensor> xs) {
  const std::vector<Tensor> features = trunk(xs);
  std::vector<N1Output> outs;
  for (std::size_t r = 0; r < xs.size(); ++r) {
    const std::size_t segments = xs[r].dim(0);
    Tensor logits = conv2d(features[r], *c_weight_, *c_bias_);
    Tensor segment_out =
        sigmoid(reshape(logits, {spec_.num_classes, segments}));
    Tensor recording_out = mean_axis(segment_out, 1);
    outs.push_back({std::move(segment_out), std::move(recording_out)});
  }
  return outs;
}

N1Output N1Network::forward_segments(const Tensor& x) {
  return std::move(forward_segments_batch(std::span<const Tensor>(&x, 1))[0]);
}

Tensor N1Network::forward(const TrainingExample& example, std::mt19937_64*) {
  return forward_segments(example.view1).recording_out;
}

std::vector<Tensor> N1Network::forward_batch(
    std::span<const TrainingExample* const> batch, std::mt19937_64*) {
  std::vector<Tensor> xs;
  for (const TrainingExample* ex : batch) xs.push_back(ex->view1);
  std::vector<Tensor> outs;
  for (N1Output& o : forward_segments_batch(xs)) {
    outs.push_back(std::move(o.recording_out));
  }
  return outs;
}

Tensor N1Network::extract_f2(const Tensor& x) {
  const Tensor input = x.detach();
  const Tensor features = trunk(std::span<const Tensor>(&input, 1))[0];
  return mean_axis(reshape(features, {spec_.f2_width(), x.dim(0)}), 1).detach();
}

std::string N1Network::spec_json() const {
  json j;
  j["kind"] = "n1";
  j["block_filters"] = spec_.block_filters;
  j["f1_filters"] = spec_.f1_filters;
  j["f2_filters"] = spec_.f2_filters;
  j["f1_kernel_w"] = spec_.f1_kernel_w;
  j["num_classes"] = spec_.num_classes;
  j["embedding_dim"] = spec_.embedding_dim;
  j["width_scale"] = spec_.width_scale;
  return j.dump();
}

std::vector<StateEntry> N1Network::state() {
  std::vector<StateEntry> out = parameter_state();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    // Parameter names are "<prefix>.weight"; strip the suffix.
    std::string prefix = named_parameters()[3 * i].first;
    prefix.resize(prefix.size() - std::string(".weight").size());
    auto& bn = layers_[i].bn;
    out.push_back({prefix + ".bn.running_mean",
                   {bn.running_mean.size()},
                   bn.running_mean});
    out.push_back(
        {prefix + ".bn.running_var", {bn.running_var.size()}, bn.running_var});
  }
  return out;
}

N2Network::N2Network(N2Spec spec, std::uint64_t seed)
    : Network(seed), spec_(std::move(spec)) {
  spec_.validate();
  std::mt19937_64 rng(seed);
  std::size_t in = spec_.input_dim;
  auto add_dense = [&](const std::string& name, std::size_t out) {
    Tensor* w = &add_parameter(name + ".weight", {in, out},
                               kaiming_uniform(in * out, in, rng));
    Tensor* b =
        &add_parameter(name + ".bias", {out}, std::vector<double>(out, 0.0));
    layers_.emplace_back(w, b);
    in = out;
  };
  for (std::size_t i = 0; i < 3; ++i) {
    add_dense("fc" + std::to_string(i + 1), spec_.hidden_width(i));
  }
  add_dense("out", spec_.num_classes);
}

Tensor N2Network::forward_vector(const Tensor& x, std::mt19937_64* rng) {
  if (x.numel() != spec_.input_dim) {
    throw DimensionError("N2 expects an input of length " +
                         std::to_string(spec_.input_dim) + ", got " +
                         shape_to_string(x.shape()));
  }
  const bool training = mode() == Mode::kTrain;
  if (training && spec_.dropout_p > 0.0 && rng == nullptr) {
    throw ContractError("N2 train-mode forward needs a dropout generator");
  }
  Tensor h = reshape(x, {1, spec_.input_dim});
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& [w, b] = layers_[i];
    h = relu(add_row_bias(matmul(h, *w), *b));
    if (training && i < 2) h = dropout(h, spec_.dropout_p, *rng);
  }
  const auto& [w, b] = layers_.back();
  return reshape(sigmoid(add_row_bias(matmul(h, *w), *b)), {spec_.num_classes});
}

Tensor select_vector_view(const TrainingExample& example, InputView view) {
  switch (view) {
    case InputView::kTransfer:
      if (!example.view2.defined()) {
        throw DataError("recording '" + example.id + "' has no view2");
      }
      return example.view2;
    case InputView::kPooledSegments:
      return mean_axis(example.view1, 0);
    case InputView::kSegments:
      break;
  }
  throw ContractError("segment view is not a vector view");
}

Tensor N2Network::forward(const TrainingExample& example,
                          std::mt19937_64* rng) {
  return forward_vector(select_vector_view(example, spec_.input_view), rng);
}

std::string N2Network::spec_json() const {
  json j;
  j["kind"] = "n2";
  j["hidden"] = spec_.hidden;
  j["dropout_p"] = spec_.dropout_p;
  j["num_classes"] = spec_.num_classes;
  j["input_dim"] = spec_.input_dim;
  j["width_scale"] = spec_.width_scale;
  j["input_view"] = input_view_name(spec_.input_view);
  return j.dump();
}

std::vector<StateEntry> N2Network::state() { return parameter_state(); }

std::unique_ptr<Network> make_network(std::string_view spec_json,
                                      std::uint64_t seed) {
  json j;
  try {
    j = json::parse(spec_json);
    const std::string kind = j.at("kind");
    if (kind == "n1") {
      N1Spec spec;
      spec.block_filters = j.at("block_filters");
      spec.f1_filters = j.at("f1_filters");
      spec.f2_filters = j.at("f2_filters");
      spec.f1_kernel_w = j.at("f1_kernel_w");
      spec.num_classes = j.at("num_classes");
      spec.embedding_dim = j.at("embedding_dim");
      spec.width_scale = j.at("width_scale");
      return std::make_unique<N1Network>(spec, seed);
    }
    if (kind == "n2") {
      N2Spec spec;
      spec.hidden = j.at("hidden");
      spec.dropout_p = j.at("dropout_p");
      spec.num_classes = j.at("num_classes");
      spec.input_dim = j.at("input_dim");
      spec.width_scale = j.at("width_scale");
      spec.input_view = parse_input_view(j.at("input_view").get<std::string>());
      return std::make_unique<N2Network>(spec, seed);
    }
    throw DataError("unknown network kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed network spec: ") + e.what());
  }
}

}  // namespace weblynet
