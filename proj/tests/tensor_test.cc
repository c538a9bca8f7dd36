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

#include "weblynet/tensor.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "weblynet/errors.h"
#include "weblynet/ops.h"

namespace weblynet {
namespace {

std::vector<double> uniform_values(std::size_t n, std::mt19937_64& rng,
                                   double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

TEST(TensorTest, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  EXPECT_THROW(Tensor({0}, {}), DimensionError);
  Tensor t({2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_FALSE(t.requires_grad());
}

TEST(TensorTest, MatmulIdentity) {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 2}, {0.3, -2.0, 7.5, 4.25});
  Tensor out = matmul(eye, m);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out.data()[i], m.data()[i]);
}

TEST(TensorTest, MatmulHandEvaluated) {
  Tensor out = matmul(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2, 1}, {5, 6}));
  ASSERT_EQ(out.shape(), (Shape{2, 1}));
  EXPECT_EQ(out.data()[0], 17.0);
  EXPECT_EQ(out.data()[1], 39.0);
}

TEST(TensorTest, MatmulZeros) {
  std::mt19937_64 rng(3);
  Tensor out =
      matmul(Tensor::zeros({3, 4}), Tensor({4, 2}, uniform_values(8, rng)));
  ASSERT_EQ(out.shape(), (Shape{3, 2}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(TensorTest, MatmulShapeErrorNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3] x [2x3]"), std::string::npos) << msg;
  }
}

TEST(TensorTest, Conv2dAllOnesCenterSumsInput) {
  std::vector<double> in{1, 2, 3, 4, 5, 6, 7, 8, 9};
  Tensor out = conv2d(Tensor({1, 3, 3}, in),
                      Tensor({1, 1, 3, 3}, std::vector<double>(9, 1.0)),
                      Tensor(), {1, 1}, {1, 1});
  ASSERT_EQ(out.shape(), (Shape{1, 3, 3}));
  EXPECT_EQ(out.data()[4], 45.0);
  // Corner sees the 2x2 block {1,2,4,5}.
  EXPECT_EQ(out.data()[0], 12.0);
}

TEST(TensorTest, Conv2dUnitFilterIsIdentity) {
  std::mt19937_64 rng(5);
  Tensor x({1, 5, 5}, uniform_values(25, rng));
  Tensor out = conv2d(x, Tensor({1, 1, 1, 1}, {1.0}), Tensor());
  ASSERT_EQ(out.shape(), x.shape());
  for (std::size_t i = 0; i < 25; ++i) EXPECT_EQ(out.data()[i], x.data()[i]);
}

TEST(TensorTest, Conv2dWideKernelShape) {
  Tensor out =
      conv2d(Tensor::zeros({1, 1, 128}), Tensor::zeros({1, 1, 1, 8}), Tensor());
  EXPECT_EQ(out.shape(), (Shape{1, 1, 121}));
}

TEST(TensorTest, Conv2dKernelLargerThanPaddedInput) {
  EXPECT_THROW(conv2d(Tensor::zeros({1, 2, 2}), Tensor::zeros({1, 1, 5, 5}),
                      Tensor(), {1, 1}, {1, 1}),
               DimensionError);
}

TEST(TensorTest, Conv2dShapeFormulaProperty) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> small(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c_in = small(rng), c_out = small(rng);
    const std::size_t h = small(rng) + 2, w = small(rng) + 2;
    const Window2d kernel{small(rng), small(rng)};
    const Window2d stride{small(rng), small(rng)};
    const Window2d pad{small(rng) - 1, small(rng) - 1};
    Tensor x = Tensor::zeros({c_in, h, w});
    Tensor f = Tensor::zeros({c_out, c_in, kernel.h, kernel.w});
    if (kernel.h > h + 2 * pad.h || kernel.w > w + 2 * pad.w) {
      EXPECT_THROW(conv2d(x, f, Tensor(), stride, pad), DimensionError);
      continue;
    }
    Tensor out = conv2d(x, f, Tensor(), stride, pad);
    EXPECT_EQ(out.shape(),
              (Shape{c_out, (h + 2 * pad.h - kernel.h) / stride.h + 1,
                     (w + 2 * pad.w - kernel.w) / stride.w + 1}));
  }
}

TEST(TensorTest, MaxPoolWindowedMax) {
  Tensor out = max_pool2d(Tensor({1, 1, 4}, {1, 5, 3, 2}), {1, 2}, {1, 2});
  ASSERT_EQ(out.shape(), (Shape{1, 1, 2}));
  EXPECT_EQ(out.data()[0], 5.0);
  EXPECT_EQ(out.data()[1], 3.0);
}

TEST(TensorTest, MaxPoolConstantInputAndHalving) {
  Tensor out = max_pool2d(Tensor::filled({3, 2, 128}, 0.7), {1, 2}, {1, 2});
  EXPECT_EQ(out.shape(), (Shape{3, 2, 64}));
  for (double v : out.data()) EXPECT_EQ(v, 0.7);
}

TEST(TensorTest, MaxPoolOddWidthRejected) {
  EXPECT_THROW(max_pool2d(Tensor::zeros({1, 1, 5}), {1, 2}, {1, 2}),
               DimensionError);
}

TEST(TensorTest, MaxPoolTieRoutesToLowestIndex) {
  Tensor x = Tensor::parameter({1, 1, 4}, {2, 2, 1, 1});
  backward(sum(max_pool2d(x, {1, 2}, {1, 2})));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()),
            (std::vector<double>{1, 0, 1, 0}));
}

TEST(TensorTest, ElementwiseDefinitions) {
  Tensor r = relu(Tensor({2}, {-1.0, 2.0}));
  EXPECT_EQ(r.data()[0], 0.0);
  EXPECT_EQ(r.data()[1], 2.0);
  EXPECT_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  EXPECT_EQ(log(Tensor::scalar(1.0)).item(), 0.0);
  EXPECT_THROW(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
  EXPECT_THROW(mul(Tensor::zeros({2, 1}), Tensor::zeros({1, 2})),
               DimensionError);
  EXPECT_THROW(log(Tensor::scalar(0.0)), ContractError);
}

TEST(TensorTest, BackwardLinearCase) {
  Tensor w = Tensor::parameter({3}, {0.5, -1.0, 2.0});
  Tensor x({3}, {4.0, 5.0, 6.0});
  backward(sum(mul(w, x)));
  EXPECT_EQ(std::vector<double>(w.grad().begin(), w.grad().end()),
            (std::vector<double>{4.0, 5.0, 6.0}));
  EXPECT_FALSE(x.has_grad());
}

TEST(TensorTest, BackwardSigmoidAtZero) {
  Tensor w = Tensor::parameter({1}, {0.0});
  backward(sigmoid(w));
  EXPECT_DOUBLE_EQ(w.grad()[0], 0.25);
}

TEST(TensorTest, BackwardRequiresScalar) {
  Tensor w = Tensor::parameter({2}, {1.0, 2.0});
  EXPECT_THROW(backward(relu(w)), ContractError);
  EXPECT_THROW(backward(Tensor::scalar(1.0)), ContractError);
}

TEST(TensorTest, DetachedTensorReceivesNoGradient) {
  Tensor w = Tensor::parameter({2}, {1.0, 2.0});
  Tensor frozen = w.detach();
  backward(sum(mul(w, frozen)));
  EXPECT_FALSE(frozen.has_grad());
  EXPECT_EQ(w.grad()[1], 2.0);
}

TEST(TensorTest, GradientAccumulatesAcrossUses) {
  // loss = sum(w*w + w) uses w three times; rewrite: dloss/dw = 2w + 1.
  Tensor w = Tensor::parameter({3}, {0.5, -1.5, 3.0});
  backward(sum(add(mul(w, w), w)));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(w.grad()[i], 2.0 * w.data()[i] + 1.0);
  }
  // A second backward adds on top of the first.
  backward(sum(add(mul(w, w), w)));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(w.grad()[i], 2.0 * (2.0 * w.data()[i] + 1.0));
  }
}

TEST(TensorTest, GraphRecordsAreTopologicalAndUnique) {
  Tensor w = Tensor::parameter({2}, {1.0, 2.0});
  Tensor h = sigmoid(w);
  Tensor loss = sum(add(mul(h, h), h));
  Graph graph = Graph::trace(loss);
  ASSERT_EQ(graph.size(), 4u);  // sigmoid, mul, add, sum
  const auto records = graph.records();
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const auto& parent : records[i]->parents) {
      const auto it = std::find(records.begin(), records.end(), parent);
      if (it != records.end()) {
        EXPECT_LT(it - records.begin(), long(i));
      }
    }
  }
  EXPECT_EQ(records.back(), loss.node());
}

TEST(TensorTest, BatchNormEvalUsesRunningStats) {
  BatchNormState state{{1.0}, {4.0}, 0.1, 0.0};
  Tensor out = batch_norm(Tensor({1, 1, 2}, {3.0, 5.0}), Tensor({1}, {2.0}),
                          Tensor({1}, {0.5}), state,
                          /*training=*/false);
  EXPECT_DOUBLE_EQ(out.data()[0], 2.0 * (3.0 - 1.0) / 2.0 + 0.5);
  EXPECT_DOUBLE_EQ(out.data()[1], 2.0 * (5.0 - 1.0) / 2.0 + 0.5);
}

TEST(TensorTest, BatchNormTrainUpdatesRunningStats) {
  BatchNormState state{{0.0}, {1.0}, 0.1, 1e-5};
  batch_norm(Tensor({1, 1, 2}, {3.0, 5.0}), Tensor({1}, {1.0}),
             Tensor({1}, {0.0}), state, /*training=*/true);
  EXPECT_DOUBLE_EQ(state.running_mean[0], 0.4);
  // Unbiased variance of {3,5} is 2.
  EXPECT_DOUBLE_EQ(state.running_var[0], 0.9 + 0.2);
}

TEST(TensorTest, DropoutZeroProbabilityIsIdentity) {
  std::mt19937_64 rng(1);
  Tensor x({4}, {1, 2, 3, 4});
  Tensor y = dropout(x, 0.0, rng);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
  Tensor z = dropout(Tensor::filled({10000}, 1.0), 0.4, rng);
  std::size_t kept = 0;
  for (double v : z.data()) {
    if (v != 0.0) {
      ++kept;
      EXPECT_DOUBLE_EQ(v, 1.0 / 0.6);
    }
  }
  EXPECT_NEAR(static_cast<double>(kept) / 10000.0, 0.6, 0.03);
}

}  // namespace
}  // namespace weblynet
