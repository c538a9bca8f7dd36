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

#ifndef WEBLYNET_EVAL_H_
#define WEBLYNET_EVAL_H_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "weblynet/data.h"
#include "weblynet/optim.h"

namespace weblynet {

// Non-interpolated AP: mean of precision@k over the ranks k of relevant
// items, items ordered by descending score with ties kept in input order.
// Throws MetricError when nothing is relevant.
double average_precision(std::span<const double> scores,
                         std::span<const std::uint8_t> relevance);

struct ClassAP {
  std::string class_name;
  double ap = 0.0;
};

struct EvalReport {
  std::string system_name;
  std::size_t n_test = 0;
  std::vector<ClassAP> per_class_ap;
  // Classes with no positive test recording; not part of the MAP.
  std::vector<std::string> excluded_classes;
  double map = 0.0;

  // Arithmetic mean of per_class_ap in stored order.
  double recompute_map() const;
};

// Builds a report from a score matrix (one row per recording).
EvalReport evaluate_scores(const std::vector<std::vector<double>>& scores,
                           const Dataset& test, std::string system_name);

// Scores every test recording with predict(system, ., which). Networks must
// already be in eval mode.
EvalReport evaluate(const TrainedSystem& system, const Dataset& test,
                    Which which, std::string system_name = "");

// CSV: header "system,class,ap", one row per class, then a "MAP" row.
std::string report_csv(const EvalReport& report);
void write_report_csv(const EvalReport& report,
                      const std::filesystem::path& path);

}  // namespace weblynet

#endif  // WEBLYNET_EVAL_H_
