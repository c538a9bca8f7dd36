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

#include "gradcheck.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace weblynet::testing {

GradCheckResult check_gradients(const std::function<Tensor()>& loss,
                                std::vector<Tensor> inputs,
                                const GradCheckOptions& options) {
  for (Tensor& t : inputs) t.zero_grad();
  backward(loss());
  std::vector<std::vector<double>> analytic;
  for (Tensor& t : inputs) {
    analytic.emplace_back(t.grad().begin(), t.grad().end());
    if (analytic.back().empty()) analytic.back().assign(t.numel(), 0.0);
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + options.step;
      const double up = loss().item();
      values[i] = saved - options.step;
      const double down = loss().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[k][i];
      const double diff = std::abs(a - numeric);
      ++result.checked;
      if (diff <= options.abs_tol) continue;
      const double rel = diff / std::max(std::abs(a), std::abs(numeric));
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        std::ostringstream out;
        out << "input " << k << "[" << i << "]: analytic " << a
            << " vs numeric " << numeric;
        result.worst = out.str();
      }
    }
  }
  for (Tensor& t : inputs) t.zero_grad();
  return result;
}

}  // namespace weblynet::testing
