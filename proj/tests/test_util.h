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

#ifndef WEBLYNET_TESTS_TEST_UTIL_H_
#define WEBLYNET_TESTS_TEST_UTIL_H_

#include <cstdint>
#include <memory>
#include <vector>

#include "weblynet/data.h"
#include "weblynet/networks.h"

namespace weblynet::testing {

// Small spec sizes that keep unit tests fast.
N1Spec tiny_n1_spec(std::size_t num_classes);
N2Spec tiny_n2_spec(std::size_t num_classes, std::size_t input_dim,
                    InputView view = InputView::kTransfer);

// Synthetic recordings with view 2 attached from a randomly initialised N1.
Dataset two_view_dataset(std::size_t n, std::size_t num_classes,
                         std::uint64_t seed, double fp_rate = 0.0);

// Every parameter and buffer value of a network, flattened.
std::vector<double> flat_state(Network& net);

}  // namespace weblynet::testing

#endif  // WEBLYNET_TESTS_TEST_UTIL_H_
