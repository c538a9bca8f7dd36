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

#include "weblynet/losses.h"

#include <cmath>
#include <string>

#include "weblynet/errors.h"
#include "weblynet/ops.h"

namespace weblynet {
namespace {

void require_same_length(const Tensor& a, const Tensor& b, const char* what) {
  if (a.numel() != b.numel()) {
    throw DimensionError(std::string(what) + ": length mismatch " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

Tensor flat(const Tensor& t) {
  return t.rank() == 1 ? t : reshape(t, {t.numel()});
}

}  // namespace

Tensor bce_multilabel(const Tensor& p, const Tensor& y) {
  require_same_length(p, y, "bce_multilabel");
  const Tensor pc = clamp(flat(p), kLogEpsilon, 1.0 - kLogEpsilon);
  const Tensor yf = flat(y);
  const Tensor one_minus_y = add_scalar(scalar_mul(yf, -1.0), 1.0);
  const Tensor one_minus_p = add_scalar(scalar_mul(pc, -1.0), 1.0);
  const Tensor per_class =
      add(mul(yf, log(pc)), mul(one_minus_y, log(one_minus_p)));
  return scalar_mul(mean(per_class), -1.0);
}

Tensor generalized_kl(const Tensor& x, const Tensor& y) {
  require_same_length(x, y, "generalized_kl");
  const Tensor xc = clamp(flat(x), kLogEpsilon, HUGE_VAL);
  const Tensor yc = clamp(flat(y), kLogEpsilon, HUGE_VAL);
  return add(sub(sum(mul(xc, sub(log(xc), log(yc)))), sum(xc)), sum(yc));
}

Tensor sym_gkl(const Tensor& a, const Tensor& b) {
  require_same_length(a, b, "sym_gkl");
  const Tensor ac = clamp(flat(a), kLogEpsilon, HUGE_VAL);
  const Tensor bc = clamp(flat(b), kLogEpsilon, HUGE_VAL);
  return sum(mul(sub(ac, bc), sub(log(ac), log(bc))));
}

Tensor label_tensor(const LabelVector& labels) {
  const std::size_t n = labels.size();
  return Tensor({n}, std::vector<double>(labels.begin(), labels.end()));
}

std::vector<std::pair<std::size_t, std::size_t>> network_pairs(std::size_t k) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) pairs.emplace_back(i, j);
  }
  return pairs;
}

std::vector<double> broadcast_alpha(double alpha, std::size_t k) {
  return std::vector<double>(pair_count(k), alpha);
}

double LossBreakdown::recompose() const {
  double t = 0.0;
  for (const double v : per_network_bce) t += v;
  for (std::size_t p = 0; p < per_pair_divergence.size(); ++p) {
    t += alphas[p] * per_pair_divergence[p];
  }
  return t;
}

WeblyLoss weblynet_loss(std::span<const Tensor> outs, const Tensor& y,
                        std::span<const double> alphas) {
  const std::size_t k = outs.size();
  if (k == 0) throw ContractError("weblynet_loss needs at least one output");
  if (alphas.size() != pair_count(k)) {
    throw ContractError("weblynet_loss: " + std::to_string(k) +
                        " networks need " + std::to_string(pair_count(k)) +
                        " alphas, got " + std::to_string(alphas.size()));
  }
  for (const double a : alphas) {
    if (!(a >= 0.0)) throw ContractError("divergence weights must be >= 0");
  }
  WeblyLoss result;
  LossBreakdown& bd = result.breakdown;
  bd.alphas.assign(alphas.begin(), alphas.end());
  Tensor total;
  for (const Tensor& out : outs) {
    Tensor l = bce_multilabel(out, y);
    bd.per_network_bce.push_back(l.item());
    total = total.defined() ? add(total, l) : l;
  }
  const auto pairs = network_pairs(k);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    Tensor d = sym_gkl(outs[pairs[p].first], outs[pairs[p].second]);
    bd.per_pair_divergence.push_back(d.item());
    // A zero weight leaves the term out of the graph entirely.
    if (alphas[p] != 0.0) total = add(total, scalar_mul(d, alphas[p]));
  }
  bd.total = total.item();
  result.total = std::move(total);
  return result;
}

WeblyLoss mean_over_batch(std::span<const WeblyLoss> losses) {
  if (losses.empty()) throw ContractError("mean_over_batch of an empty batch");
  const double scale = 1.0 / static_cast<double>(losses.size());
  WeblyLoss out;
  LossBreakdown& bd = out.breakdown;
  bd.alphas = losses.front().breakdown.alphas;
  bd.per_network_bce.assign(losses.front().breakdown.per_network_bce.size(),
                            0.0);
  bd.per_pair_divergence.assign(
      losses.front().breakdown.per_pair_divergence.size(), 0.0);
  Tensor total;
  for (const WeblyLoss& l : losses) {
    total = total.defined() ? add(total, l.total) : l.total;
    for (std::size_t i = 0; i < bd.per_network_bce.size(); ++i) {
      bd.per_network_bce[i] += l.breakdown.per_network_bce[i];
    }
    for (std::size_t i = 0; i < bd.per_pair_divergence.size(); ++i) {
      bd.per_pair_divergence[i] += l.breakdown.per_pair_divergence[i];
    }
  }
  out.total = scalar_mul(total, scale);
  for (double& v : bd.per_network_bce) v *= scale;
  for (double& v : bd.per_pair_divergence) v *= scale;
  bd.total = out.total.item();
  return out;
}

}  // namespace weblynet
