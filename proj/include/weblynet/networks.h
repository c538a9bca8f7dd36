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

#ifndef WEBLYNET_NETWORKS_H_
#define WEBLYNET_NETWORKS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "weblynet/data.h"
#include "weblynet/ops.h"
#include "weblynet/tensor.h"

namespace weblynet {

enum class Mode { kTrain, kEval };

// Which representation of a recording a network consumes.
enum class InputView {
  kSegments,        // view 1, segments x embedding
  kTransfer,        // view 2, transferred F2 features
  kPooledSegments,  // view 1 averaged over segments
};

std::string_view input_view_name(InputView view);
InputView parse_input_view(std::string_view name);

// Scales a layer width by `scale`, never below one unit.
std::size_t scale_width(std::size_t width, double scale);

// Segment CNN: four conv blocks over a 1 x N x embedding image, two
// time-distributed layers F1/F2, a sigmoid segment layer and mean pooling.
struct N1Spec {
  std::array<std::size_t, 4> block_filters{64, 128, 256, 256};
  std::size_t f1_filters = 1024;
  std::size_t f2_filters = 1024;
  std::size_t f1_kernel_w = 8;
  std::size_t num_classes = 0;
  std::size_t embedding_dim = 128;
  double width_scale = 1.0;

  std::size_t block_width(std::size_t block) const;
  std::size_t f1_width() const { return scale_width(f1_filters, width_scale); }
  std::size_t f2_width() const { return scale_width(f2_filters, width_scale); }
  // Throws ContractError when the four poolings do not leave exactly
  // f1_kernel_w columns.
  void validate() const;
};

// Transfer MLP: three ReLU hidden layers, dropout after the first two.
struct N2Spec {
  std::array<std::size_t, 3> hidden{2048, 1024, 1024};
  double dropout_p = 0.4;
  std::size_t num_classes = 0;
  std::size_t input_dim = 1024;
  double width_scale = 1.0;
  InputView input_view = InputView::kTransfer;

  std::size_t hidden_width(std::size_t layer) const;
  void validate() const;
};

// Named, shaped view onto parameter or buffer storage for checkpointing.
struct StateEntry {
  std::string name;
  Shape shape;
  std::span<double> values;
};

class Network {
 public:
  virtual ~Network() = default;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  virtual std::string_view kind() const = 0;
  virtual InputView input_view() const = 0;
  virtual std::size_t num_classes() const = 0;
  // Recording-level posteriors, shape [C]. `rng` drives dropout in train
  // mode and may be null otherwise.
  virtual Tensor forward(const TrainingExample& example,
                         std::mt19937_64* rng) = 0;
  // One output per example. In train mode batch-norm statistics are pooled
  // over the whole batch; the default runs examples one at a time.
  virtual std::vector<Tensor> forward_batch(
      std::span<const TrainingExample* const> batch, std::mt19937_64* rng);
  virtual std::string spec_json() const = 0;
  // Parameters followed by non-trainable buffers, in a fixed order.
  virtual std::vector<StateEntry> state() = 0;

  std::vector<Tensor> parameters() const;
  const std::deque<std::pair<std::string, Tensor>>& named_parameters() const {
    return params_;
  }
  void zero_grad();

  Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }
  std::uint64_t seed() const { return seed_; }

 protected:
  explicit Network(std::uint64_t seed) : seed_(seed) {}
  Tensor& add_parameter(std::string name, Shape shape,
                        std::vector<double> values);
  std::vector<StateEntry> parameter_state();

 private:
  // Deque: layers keep pointers into it.
  std::deque<std::pair<std::string, Tensor>> params_;
  Mode mode_ = Mode::kTrain;
  std::uint64_t seed_;
};

struct N1Output {
  Tensor segment_out;    // C x N
  Tensor recording_out;  // C
};

class N1Network final : public Network {
 public:
  N1Network(N1Spec spec, std::uint64_t seed);

  std::string_view kind() const override { return "n1"; }
  InputView input_view() const override { return InputView::kSegments; }
  std::size_t num_classes() const override { return spec_.num_classes; }
  Tensor forward(const TrainingExample& example, std::mt19937_64* rng) override;
  std::vector<Tensor> forward_batch(
      std::span<const TrainingExample* const> batch,
      std::mt19937_64* rng) override;
  std::string spec_json() const override;
  std::vector<StateEntry> state() override;

  // x: N x embedding_dim.
  N1Output forward_segments(const Tensor& x);
  std::vector<N1Output> forward_segments_batch(std::span<const Tensor> xs);
  // Post-ReLU F2 activations averaged over segments, length f2_width().
  Tensor extract_f2(const Tensor& x);

  const N1Spec& spec() const { return spec_; }

 private:
  struct ConvLayer {
    Tensor* weight;
    Tensor* gamma;
    Tensor* beta;
    BatchNormState bn;
    Window2d pad;
  };

  // Runs B1..F2 and returns the F2 activations of each input as
  // f2 x N_i x 1.
  std::vector<Tensor> trunk(std::span<const Tensor> xs);

  N1Spec spec_;
  std::vector<ConvLayer> layers_;
  Tensor* c_weight_ = nullptr;
  Tensor* c_bias_ = nullptr;
};

class N2Network final : public Network {
 public:
  N2Network(N2Spec spec, std::uint64_t seed);

  std::string_view kind() const override { return "n2"; }
  InputView input_view() const override { return spec_.input_view; }
  std::size_t num_classes() const override { return spec_.num_classes; }
  Tensor forward(const TrainingExample& example, std::mt19937_64* rng) override;
  std::string spec_json() const override;
  std::vector<StateEntry> state() override;

  // x: [input_dim].
  Tensor forward_vector(const Tensor& x, std::mt19937_64* rng);

  const N2Spec& spec() const { return spec_; }

 private:
  N2Spec spec_;
  std::vector<std::pair<Tensor*, Tensor*>> layers_;  // weight, bias
};

// Input vector an N2 network reads from `example` under `view`.
Tensor select_vector_view(const TrainingExample& example, InputView view);

// Rebuilds a network from its spec_json() echo with fresh parameters.
std::unique_ptr<Network> make_network(std::string_view spec_json,
                                      std::uint64_t seed);

// Named-tensor checkpoint: "WBNC", u32 format version, u64 seed, u32 length
// and bytes of the spec JSON, u32 entry count, then per entry u32 name
// length, name, u32 rank, u32 extents and little-endian doubles.
void save_checkpoint(Network& net, const std::filesystem::path& path);
std::unique_ptr<Network> load_checkpoint(const std::filesystem::path& path);

}  // namespace weblynet

#endif  // WEBLYNET_NETWORKS_H_
