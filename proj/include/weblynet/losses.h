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

#ifndef WEBLYNET_LOSSES_H_
#define WEBLYNET_LOSSES_H_

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "weblynet/data.h"
#include "weblynet/tensor.h"

namespace weblynet {

// Lower clamp for every log argument; BCE also clamps from above at 1 - eps.
inline constexpr double kLogEpsilon = 1e-7;

// Mean over classes of -y log p - (1 - y) log(1 - p), p clamped to
// [eps, 1 - eps].
Tensor bce_multilabel(const Tensor& p, const Tensor& y);

// Generalised KL: sum x log(x/y) - sum x + sum y, inputs clamped at eps.
Tensor generalized_kl(const Tensor& x, const Tensor& y);

// Symmetric divergence sum (a - b) log(a / b), inputs clamped at eps.
// Equals generalized_kl(a, b) + generalized_kl(b, a).
Tensor sym_gkl(const Tensor& a, const Tensor& b);

// Labels as a float tensor of shape [C].
Tensor label_tensor(const LabelVector& labels);

// Number of unordered network pairs, K(K-1)/2.
constexpr std::size_t pair_count(std::size_t k) { return k * (k - 1) / 2; }

// Pairs (i, j), i < j, in lexicographic order; alphas align to this order.
std::vector<std::pair<std::size_t, std::size_t>> network_pairs(std::size_t k);

// Expands a single shared weight to every pair.
std::vector<double> broadcast_alpha(double alpha, std::size_t k);

struct LossBreakdown {
  std::vector<double> per_network_bce;
  std::vector<double> per_pair_divergence;
  std::vector<double> alphas;
  double total = 0.0;

  // sum(bce) + sum(alpha * divergence).
  double recompose() const;
};

struct WeblyLoss {
  Tensor total;
  LossBreakdown breakdown;
};

// Per-network BCE against y plus alpha-weighted pairwise divergences of the
// K recording-level outputs.
WeblyLoss weblynet_loss(std::span<const Tensor> outs, const Tensor& y,
                        std::span<const double> alphas);

// Mean of per-recording losses over a minibatch; the breakdown is averaged
// field by field.
WeblyLoss mean_over_batch(std::span<const WeblyLoss> losses);

}  // namespace weblynet

#endif  // WEBLYNET_LOSSES_H_
