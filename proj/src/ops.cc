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

#include "weblynet/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "random.h"
#include "weblynet/errors.h"

namespace weblynet {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

using internal::Node;

// dst (+)= a * b. Eigen's blocked GEMM packs its operands, so its result does
// not depend on where the buffers live; its matrix-vector and small-product
// kernels peel unaligned elements, which reorders sums between runs. Those
// shapes take a fixed-order loop instead.
template <typename A, typename B>
void multiply(MatrixMap dst, const A& a, const B& b, bool accumulate) {
  const Eigen::Index m = dst.rows(), n = dst.cols(), k = a.cols();
  if (m > 1 && n > 1 && m * n * k >= 4096) {
    if (accumulate) {
      dst.noalias() += a * b;
    } else {
      dst.noalias() = a * b;
    }
    return;
  }
  if (!accumulate) dst.setZero();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index p = 0; p < k; ++p) {
      const double s = a(i, p);
      for (Eigen::Index j = 0; j < n; ++j) dst(i, j) += s * b(p, j);
    }
  }
}

// Gradient buffer of parent `i`, or an empty span when it is not tracked.
std::span<double> parent_grad(Node& node, std::size_t i) {
  Node& parent = *node.parents[i];
  if (!parent.requires_grad) return {};
  return parent.grad_buffer();
}

const std::vector<double>& parent_value(const Node& node, std::size_t i) {
  return node.parents[i]->value;
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + " expects rank " +
                         std::to_string(rank) + ", got " +
                         shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shape mismatch " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

template <typename Fn, typename Deriv>
Tensor unary(const Tensor& x, std::string_view op, Fn fn, Deriv deriv) {
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(in[i]);
  return Tensor::from_op(
      x.shape(), std::move(out), {x}, op, [deriv](Node& node) {
        auto gx = parent_grad(node, 0);
        if (gx.empty()) return;
        const auto& xv = parent_value(node, 0);
        for (std::size_t i = 0; i < gx.size(); ++i) {
          gx[i] += node.grad[i] * deriv(xv[i], node.value[i]);
        }
      });
}

// Unfolds x[c x h x w] into a (c*kh*kw) x (oh*ow) patch matrix.
// Output columns [lo, hi) whose stride-1 tap kj lands inside the input.
std::pair<std::size_t, std::size_t> valid_columns(std::size_t kj,
                                                  std::size_t pad,
                                                  std::size_t w,
                                                  std::size_t ow) {
  const std::size_t lo = std::min(ow, pad > kj ? pad - kj : 0);
  const std::size_t hi = std::max(lo, std::min(ow, w + pad - kj));
  return {lo, hi};
}

void im2col(std::span<const double> x, std::size_t channels, std::size_t h,
            std::size_t w, Window2d kernel, Window2d stride, Window2d pad,
            std::size_t oh, std::size_t ow, std::span<double> cols) {
  const std::size_t patches = oh * ow;
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = x.data() + c * h * w;
    for (std::size_t ki = 0; ki < kernel.h; ++ki) {
      for (std::size_t kj = 0; kj < kernel.w; ++kj, ++row) {
        double* dst = cols.data() + row * patches;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy =
              static_cast<long>(oy * stride.h + ki) - static_cast<long>(pad.h);
          double* dst_row = dst + oy * ow;
          if (iy < 0 || iy >= static_cast<long>(h)) {
            std::fill(dst_row, dst_row + ow, 0.0);
            continue;
          }
          const double* src = plane + iy * w;
          if (stride.w == 1) {
            const auto [lo, hi] = valid_columns(kj, pad.w, w, ow);
            std::fill(dst_row, dst_row + lo, 0.0);
            std::copy(src + lo + kj - pad.w, src + hi + kj - pad.w,
                      dst_row + lo);
            std::fill(dst_row + hi, dst_row + ow, 0.0);
            continue;
          }
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox * stride.w + kj) -
                            static_cast<long>(pad.w);
            dst_row[ox] =
                (ix < 0 || ix >= static_cast<long>(w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters patch gradients back onto dx.
void col2im(std::span<const double> cols, std::size_t channels, std::size_t h,
            std::size_t w, Window2d kernel, Window2d stride, Window2d pad,
            std::size_t oh, std::size_t ow, std::span<double> dx) {
  const std::size_t patches = oh * ow;
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = dx.data() + c * h * w;
    for (std::size_t ki = 0; ki < kernel.h; ++ki) {
      for (std::size_t kj = 0; kj < kernel.w; ++kj, ++row) {
        const double* src = cols.data() + row * patches;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy =
              static_cast<long>(oy * stride.h + ki) - static_cast<long>(pad.h);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          double* dst = plane + iy * w;
          const double* src_row = src + oy * ow;
          if (stride.w == 1) {
            const auto [lo, hi] = valid_columns(kj, pad.w, w, ow);
            for (std::size_t ox = lo; ox < hi; ++ox) {
              dst[ox + kj - pad.w] += src_row[ox];
            }
            continue;
          }
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox * stride.w + kj) -
                            static_cast<long>(pad.w);
            if (ix >= 0 && ix < static_cast<long>(w)) dst[ix] += src_row[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree for " +
                         shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  multiply(MatrixMap(out.data(), m, n), ConstMatrixMap(a.data().data(), m, k),
           ConstMatrixMap(b.data().data(), k, n), false);
  return Tensor::from_op(
      {m, n}, std::move(out), {a, b}, "matmul", [m, k, n](Node& node) {
        const ConstMatrixMap dc(node.grad.data(), m, n);
        if (auto ga = parent_grad(node, 0); !ga.empty()) {
          multiply(
              MatrixMap(ga.data(), m, k), dc,
              ConstMatrixMap(parent_value(node, 1).data(), k, n).transpose(),
              true);
        }
        if (auto gb = parent_grad(node, 1); !gb.empty()) {
          multiply(
              MatrixMap(gb.data(), k, n),
              ConstMatrixMap(parent_value(node, 0).data(), m, k).transpose(),
              dc, true);
        }
      });
}

Tensor conv2d(const Tensor& x, const Tensor& filters, const Tensor& bias,
              Window2d stride, Window2d pad) {
  require_rank(x, 3, "conv2d input");
  require_rank(filters, 4, "conv2d filters");
  const std::size_t c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t c_out = filters.dim(0);
  const Window2d kernel{filters.dim(2), filters.dim(3)};
  if (filters.dim(1) != c_in) {
    throw DimensionError("conv2d: filters " + shape_to_string(filters.shape()) +
                         " do not match input " + shape_to_string(x.shape()));
  }
  if (stride.h == 0 || stride.w == 0) {
    throw DimensionError("conv2d: stride must be positive");
  }
  if (kernel.h > h + 2 * pad.h || kernel.w > w + 2 * pad.w) {
    throw DimensionError("conv2d: kernel " + shape_to_string(filters.shape()) +
                         " larger than padded input " +
                         shape_to_string(x.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != c_out)) {
    throw DimensionError("conv2d: bias " + shape_to_string(bias.shape()) +
                         " does not match " + std::to_string(c_out) +
                         " filters");
  }
  const std::size_t oh = (h + 2 * pad.h - kernel.h) / stride.h + 1;
  const std::size_t ow = (w + 2 * pad.w - kernel.w) / stride.w + 1;
  const std::size_t patch = c_in * kernel.h * kernel.w;
  const std::size_t positions = oh * ow;
  // 1x1 stride-1 unpadded filters read the input as its own patch matrix.
  const bool pointwise = kernel.h == 1 && kernel.w == 1 && pad.h == 0 &&
                         pad.w == 0 && stride.h == 1 && stride.w == 1;

  std::vector<double> cols;
  std::span<const double> patches = x.data();
  if (!pointwise) {
    cols.resize(patch * positions);
    im2col(x.data(), c_in, h, w, kernel, stride, pad, oh, ow, cols);
    patches = cols;
  }
  std::vector<double> out(c_out * positions);
  MatrixMap out_map(out.data(), c_out, positions);
  multiply(out_map, ConstMatrixMap(filters.data().data(), c_out, patch),
           ConstMatrixMap(patches.data(), patch, positions), false);
  if (bias.defined()) {
    out_map.colwise() += ConstVectorMap(bias.data().data(), c_out);
  }
  cols.clear();
  cols.shrink_to_fit();

  std::vector<Tensor> parents{x, filters};
  if (bias.defined()) parents.push_back(bias);
  return Tensor::from_op(
      {c_out, oh, ow}, std::move(out), std::move(parents), "conv2d",
      [=](Node& node) {
        const ConstMatrixMap dy(node.grad.data(), c_out, positions);
        const auto& xv = parent_value(node, 0);
        const auto& fv = parent_value(node, 1);
        if (auto gf = parent_grad(node, 1); !gf.empty()) {
          MatrixMap gf_map(gf.data(), c_out, patch);
          if (pointwise) {
            multiply(gf_map, dy,
                     ConstMatrixMap(xv.data(), patch, positions).transpose(),
                     true);
          } else {
            std::vector<double> unfolded(patch * positions);
            im2col(xv, c_in, h, w, kernel, stride, pad, oh, ow, unfolded);
            multiply(
                gf_map, dy,
                ConstMatrixMap(unfolded.data(), patch, positions).transpose(),
                true);
          }
        }
        if (auto gx = parent_grad(node, 0); !gx.empty()) {
          const ConstMatrixMap fmat(fv.data(), c_out, patch);
          if (pointwise) {
            multiply(MatrixMap(gx.data(), patch, positions), fmat.transpose(),
                     dy, true);
          } else {
            std::vector<double> dcols(patch * positions);
            multiply(MatrixMap(dcols.data(), patch, positions),
                     fmat.transpose(), dy, false);
            col2im(dcols, c_in, h, w, kernel, stride, pad, oh, ow, gx);
          }
        }
        if (node.parents.size() > 2) {
          if (auto gb = parent_grad(node, 2); !gb.empty()) {
            for (std::size_t co = 0; co < c_out; ++co) {
              const double* row = node.grad.data() + co * positions;
              double acc = 0.0;
              for (std::size_t p = 0; p < positions; ++p) acc += row[p];
              gb[co] += acc;
            }
          }
        }
      });
}

Tensor max_pool2d(const Tensor& x, Window2d window, Window2d stride) {
  require_rank(x, 3, "max_pool2d");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (window.h == 0 || window.w == 0 || stride.h == 0 || stride.w == 0) {
    throw DimensionError("max_pool2d: window and stride must be positive");
  }
  if (window.h > h || window.w > w || (h - window.h) % stride.h != 0 ||
      (w - window.w) % stride.w != 0) {
    throw DimensionError("max_pool2d: input " + shape_to_string(x.shape()) +
                         " is not tiled by window " + std::to_string(window.h) +
                         "x" + std::to_string(window.w) + " with stride " +
                         std::to_string(stride.h) + "x" +
                         std::to_string(stride.w));
  }
  const std::size_t oh = (h - window.h) / stride.h + 1;
  const std::size_t ow = (w - window.w) / stride.w + 1;
  std::vector<double> out(c * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  const auto in = x.data();
  std::size_t o = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = (ch * h + oy * stride.h) * w + ox * stride.w;
        for (std::size_t i = 0; i < window.h; ++i) {
          for (std::size_t j = 0; j < window.w; ++j) {
            const std::size_t idx =
                (ch * h + oy * stride.h + i) * w + ox * stride.w + j;
            if (in[idx] > in[best]) best = idx;
          }
        }
        argmax[o] = best;
        out[o] = in[best];
      }
    }
  }
  return Tensor::from_op({c, oh, ow}, std::move(out), {x}, "max_pool2d",
                         [argmax = std::move(argmax)](Node& node) {
                           auto gx = parent_grad(node, 0);
                           if (gx.empty()) return;
                           for (std::size_t i = 0; i < argmax.size(); ++i) {
                             gx[argmax[i]] += node.grad[i];
                           }
                         });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double s) { return s * (1.0 - s); });
}

Tensor log(const Tensor& x) {
  for (const double v : x.data()) {
    if (!(v > 0.0)) {
      throw ContractError("log of a non-positive value " + std::to_string(v));
    }
  }
  return unary(
      x, "log", [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  return unary(
      x, "clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v < lo || v > hi) ? 0.0 : 1.0; });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, "add",
                         [](Node& node) {
                           for (std::size_t p = 0; p < 2; ++p) {
                             auto g = parent_grad(node, p);
                             for (std::size_t i = 0; i < g.size(); ++i) {
                               g[i] += node.grad[i];
                             }
                           }
                         });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, "sub",
                         [](Node& node) {
                           auto ga = parent_grad(node, 0);
                           for (std::size_t i = 0; i < ga.size(); ++i) {
                             ga[i] += node.grad[i];
                           }
                           auto gb = parent_grad(node, 1);
                           for (std::size_t i = 0; i < gb.size(); ++i) {
                             gb[i] -= node.grad[i];
                           }
                         });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::from_op(a.shape(), std::move(out), {a, b}, "mul",
                         [](Node& node) {
                           const auto& av = parent_value(node, 0);
                           const auto& bv = parent_value(node, 1);
                           auto ga = parent_grad(node, 0);
                           for (std::size_t i = 0; i < ga.size(); ++i) {
                             ga[i] += node.grad[i] * bv[i];
                           }
                           auto gb = parent_grad(node, 1);
                           for (std::size_t i = 0; i < gb.size(); ++i) {
                             gb[i] += node.grad[i] * av[i];
                           }
                         });
}

Tensor scalar_mul(const Tensor& x, double factor) {
  return unary(
      x, "scalar_mul", [factor](double v) { return factor * v; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary(
      x, "add_scalar", [offset](double v) { return v + offset; },
      [](double, double) { return 1.0; });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_row_bias");
  require_rank(bias, 1, "add_row_bias bias");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.dim(0) != n) {
    throw DimensionError("add_row_bias: bias " + shape_to_string(bias.shape()) +
                         " vs rows of " + shape_to_string(x.shape()));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto bv = bias.data();
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r * n + j] += bv[j];
  }
  return Tensor::from_op({m, n}, std::move(out), {x, bias}, "add_row_bias",
                         [m, n](Node& node) {
                           auto gx = parent_grad(node, 0);
                           for (std::size_t i = 0; i < gx.size(); ++i) {
                             gx[i] += node.grad[i];
                           }
                           auto gb = parent_grad(node, 1);
                           if (gb.empty()) return;
                           for (std::size_t r = 0; r < m; ++r) {
                             for (std::size_t j = 0; j < n; ++j) {
                               gb[j] += node.grad[r * n + j];
                             }
                           }
                         });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (const double v : x.data()) total += v;
  return Tensor::from_op({1}, {total}, {x}, "sum", [](Node& node) {
    auto gx = parent_grad(node, 0);
    for (double& g : gx) g += node.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  return scalar_mul(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  require_rank(x, 2, "mean_axis");
  if (axis > 1) throw DimensionError("mean_axis: axis must be 0 or 1");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const std::size_t out_len = axis == 0 ? cols : rows;
  const double scale = 1.0 / static_cast<double>(axis == 0 ? rows : cols);
  std::vector<double> out(out_len, 0.0);
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[axis == 0 ? c : r] += in[r * cols + c];
    }
  }
  for (double& v : out) v *= scale;
  return Tensor::from_op({out_len}, std::move(out), {x}, "mean_axis",
                         [rows, cols, axis, scale](Node& node) {
                           auto gx = parent_grad(node, 0);
                           if (gx.empty()) return;
                           for (std::size_t r = 0; r < rows; ++r) {
                             for (std::size_t c = 0; c < cols; ++c) {
                               gx[r * cols + c] +=
                                   scale * node.grad[axis == 0 ? c : r];
                             }
                           }
                         });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) +
                         " as " + shape_to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::from_op(std::move(shape), std::move(out), {x}, "reshape",
                         [](Node& node) {
                           auto gx = parent_grad(node, 0);
                           for (std::size_t i = 0; i < gx.size(); ++i) {
                             gx[i] += node.grad[i];
                           }
                         });
}

Tensor concat_rows(std::span<const Tensor> xs) {
  if (xs.empty()) throw DimensionError("concat_rows: no inputs");
  for (const Tensor& x : xs) require_rank(x, 3, "concat_rows");
  const std::size_t c = xs[0].dim(0), w = xs[0].dim(2);
  std::vector<std::size_t> heights;
  std::size_t total = 0;
  for (const Tensor& x : xs) {
    if (x.dim(0) != c || x.dim(2) != w) {
      throw DimensionError("concat_rows: " + shape_to_string(x.shape()) +
                           " does not match " + shape_to_string(xs[0].shape()));
    }
    heights.push_back(x.dim(1));
    total += x.dim(1);
  }
  std::vector<double> out(c * total * w);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto in = xs[i].data();
    const std::size_t plane = heights[i] * w;
    for (std::size_t ch = 0; ch < c; ++ch) {
      std::copy_n(in.data() + ch * plane, plane,
                  out.data() + (ch * total + offset) * w);
    }
    offset += heights[i];
  }
  return Tensor::from_op(
      {c, total, w}, std::move(out), std::vector<Tensor>(xs.begin(), xs.end()),
      "concat_rows", [heights, c, total, w](Node& node) {
        std::size_t offset = 0;
        for (std::size_t i = 0; i < heights.size(); ++i) {
          auto gx = parent_grad(node, i);
          const std::size_t plane = heights[i] * w;
          if (!gx.empty()) {
            for (std::size_t ch = 0; ch < c; ++ch) {
              const double* src = node.grad.data() + (ch * total + offset) * w;
              for (std::size_t k = 0; k < plane; ++k) {
                gx[ch * plane + k] += src[k];
              }
            }
          }
          offset += heights[i];
        }
      });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 3, "slice_rows");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (begin >= end || end > h) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " +
                         shape_to_string(x.shape()));
  }
  const std::size_t rows = end - begin;
  std::vector<double> out(c * rows * w);
  const auto in = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::copy_n(in.data() + (ch * h + begin) * w, rows * w,
                out.data() + ch * rows * w);
  }
  return Tensor::from_op({c, rows, w}, std::move(out), {x}, "slice_rows",
                         [c, h, w, begin, rows](Node& node) {
                           auto gx = parent_grad(node, 0);
                           if (gx.empty()) return;
                           for (std::size_t ch = 0; ch < c; ++ch) {
                             const double* src =
                                 node.grad.data() + ch * rows * w;
                             double* dst = gx.data() + (ch * h + begin) * w;
                             for (std::size_t k = 0; k < rows * w; ++k)
                               dst[k] += src[k];
                           }
                         });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool training) {
  require_rank(x, 3, "batch_norm");
  const std::size_t c = x.dim(0);
  const std::size_t m = x.dim(1) * x.dim(2);
  if (gamma.numel() != c || beta.numel() != c ||
      state.running_mean.size() != c || state.running_var.size() != c) {
    throw DimensionError("batch_norm: parameters do not match " +
                         std::to_string(c) + " channels");
  }
  const auto in = x.data();
  const auto g = gamma.data();
  const auto b = beta.data();
  std::vector<double> xhat(in.size());
  std::vector<double> inv_std(c);
  std::vector<double> out(in.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = in.data() + ch * m;
    double mu, var;
    if (training) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += plane[i];
      mu = acc / static_cast<double>(m);
      double sq = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = plane[i] - mu;
        sq += d * d;
      }
      var = sq / static_cast<double>(m);
      const double unbiased = m > 1 ? sq / static_cast<double>(m - 1) : var;
      state.running_mean[ch] =
          (1.0 - state.momentum) * state.running_mean[ch] + state.momentum * mu;
      state.running_var[ch] = (1.0 - state.momentum) * state.running_var[ch] +
                              state.momentum * unbiased;
    } else {
      mu = state.running_mean[ch];
      var = state.running_var[ch];
    }
    inv_std[ch] = 1.0 / std::sqrt(var + state.eps);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t idx = ch * m + i;
      xhat[idx] = (plane[i] - mu) * inv_std[ch];
      out[idx] = g[ch] * xhat[idx] + b[ch];
    }
  }
  return Tensor::from_op(
      x.shape(), std::move(out), {x, gamma, beta}, "batch_norm",
      [c, m, training, xhat = std::move(xhat),
       inv_std = std::move(inv_std)](Node& node) {
        const auto& gv = parent_value(node, 1);
        auto gx = parent_grad(node, 0);
        auto ggamma = parent_grad(node, 1);
        auto gbeta = parent_grad(node, 2);
        const double inv_m = 1.0 / static_cast<double>(m);
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double* dy = node.grad.data() + ch * m;
          const double* xh = xhat.data() + ch * m;
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            sum_dy += dy[i];
            sum_dy_xhat += dy[i] * xh[i];
          }
          if (!ggamma.empty()) ggamma[ch] += sum_dy_xhat;
          if (!gbeta.empty()) gbeta[ch] += sum_dy;
          if (gx.empty()) continue;
          double* dx = gx.data() + ch * m;
          const double scale = gv[ch] * inv_std[ch];
          if (training) {
            // Batch statistics depend on x, so project out their directions.
            for (std::size_t i = 0; i < m; ++i) {
              dx[i] += scale *
                       (dy[i] - inv_m * sum_dy - xh[i] * inv_m * sum_dy_xhat);
            }
          } else {
            for (std::size_t i = 0; i < m; ++i) dx[i] += scale * dy[i];
          }
        }
      });
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ContractError("dropout probability must lie in [0, 1)");
  }
  if (p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.numel());
  for (double& v : mask) {
    v = internal::canonical(rng) < p ? 0.0 : keep_scale;
  }
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

}  // namespace weblynet
