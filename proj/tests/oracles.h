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

// Independent plain-double oracles shared by the unit tests and the
// acceptance runner.

#ifndef WEBLYNET_TESTS_ORACLES_H_
#define WEBLYNET_TESTS_ORACLES_H_

#include <cstdint>
#include <random>
#include <vector>

namespace weblynet::testing {

// Log-uniform values over several decades in (0, 1].
std::vector<double> positive_values(std::size_t n, std::mt19937_64& rng);

// sum_i (a_i - b_i) log(a_i / b_i).
double sym_gkl_oracle(const std::vector<double>& a,
                      const std::vector<double>& b);

// sum_i x_i log(x_i / y_i) - x_i + y_i.
double gkl_oracle(const std::vector<double>& x, const std::vector<double>& y);

// O(n^2) average precision from the definition: the rank of item i is one
// plus the number of items ordered before it (higher score, or equal score
// and earlier position); AP averages hits-so-far / rank over relevant items.
double brute_force_ap(const std::vector<double>& scores,
                      const std::vector<std::uint8_t>& rel);

}  // namespace weblynet::testing

#endif  // WEBLYNET_TESTS_ORACLES_H_
