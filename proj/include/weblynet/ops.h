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

#ifndef WEBLYNET_OPS_H_
#define WEBLYNET_OPS_H_

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "weblynet/tensor.h"

namespace weblynet {

struct Window2d {
  std::size_t h = 1;
  std::size_t w = 1;
};

// Matrix product of a[m x k] and b[k x n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Cross-correlation of x[c_in x h x w] with filters[c_out x c_in x kh x kw]
// under zero padding. `bias`, when defined, has length c_out.
Tensor conv2d(const Tensor& x, const Tensor& filters, const Tensor& bias,
              Window2d stride = {1, 1}, Window2d pad = {0, 0});

// Windowed maximum over x[c x h x w]. The gradient of each window goes to
// its first maximal element in row-major order.
Tensor max_pool2d(const Tensor& x, Window2d window, Window2d stride);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);
// Values outside [lo, hi] are clamped and receive zero gradient.
Tensor clamp(const Tensor& x, double lo, double hi);

// Same-shape binary ops.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);

// x[m x n] + bias[n] broadcast over rows.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Mean over the given axis of a rank-2 tensor; the result has rank 1.
Tensor mean_axis(const Tensor& x, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);

// Joins c x h_i x w tensors along h; slice_rows takes rows [begin, end) back
// out.
Tensor concat_rows(std::span<const Tensor> xs);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

// Running statistics owned by a batch-norm layer.
struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

// Per-channel normalisation of x[c x h x w] followed by gamma/beta. In
// training mode the statistics come from x itself (biased variance) and the
// running estimates are blended in with `momentum` using the unbiased
// variance; in eval mode the running estimates are used.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool training);

// Inverted dropout: zeroes each element with probability p and scales the
// survivors by 1/(1-p). p == 0 returns x unchanged.
Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng);

}  // namespace weblynet

#endif  // WEBLYNET_OPS_H_
