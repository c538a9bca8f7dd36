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

#include "weblynet/eval.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

#include "weblynet/errors.h"

namespace weblynet {

double average_precision(std::span<const double> scores,
                         std::span<const std::uint8_t> relevance) {
  if (scores.size() != relevance.size()) {
    throw ContractError("average_precision: " + std::to_string(scores.size()) +
                        " scores vs " + std::to_string(relevance.size()) +
                        " relevance flags");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(
      order.begin(), order.end(),
      [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (relevance[order[rank]] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0)
    throw MetricError("average precision undefined: no relevant items");
  return sum / static_cast<double>(hits);
}

double EvalReport::recompute_map() const {
  if (per_class_ap.empty()) return 0.0;
  double sum = 0.0;
  for (const ClassAP& c : per_class_ap) sum += c.ap;
  return sum / static_cast<double>(per_class_ap.size());
}

EvalReport evaluate_scores(const std::vector<std::vector<double>>& scores,
                           const Dataset& test, std::string system_name) {
  const auto& recs = test.recordings();
  if (scores.size() != recs.size()) {
    throw ContractError("evaluate: one score row per test recording needed");
  }
  const std::size_t num_classes = test.class_names().size();
  EvalReport report;
  report.system_name = std::move(system_name);
  report.n_test = recs.size();
  std::vector<double> column(recs.size());
  std::vector<std::uint8_t> relevance(recs.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if (scores[i].size() != num_classes) {
        throw ContractError("evaluate: score row has wrong class count");
      }
      column[i] = scores[i][c];
      relevance[i] = recs[i].example.labels[c];
    }
    try {
      report.per_class_ap.push_back(
          {test.class_names()[c], average_precision(column, relevance)});
    } catch (const MetricError&) {
      report.excluded_classes.push_back(test.class_names()[c]);
    }
  }
  report.map = report.recompute_map();
  return report;
}

EvalReport evaluate(const TrainedSystem& system, const Dataset& test,
                    Which which, std::string system_name) {
  std::vector<std::vector<double>> scores;
  scores.reserve(test.size());
  for (const Recording& r : test.recordings()) {
    scores.push_back(predict(system, r.example, which));
  }
  if (system_name.empty()) system_name = which.name();
  return evaluate_scores(scores, test, std::move(system_name));
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string report_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "system,class,ap\n";
  for (const ClassAP& c : report.per_class_ap) {
    out << report.system_name << "," << c.class_name << ","
        << format_double(c.ap) << "\n";
  }
  out << report.system_name << ",MAP," << format_double(report.map) << "\n";
  return out.str();
}

void write_report_csv(const EvalReport& report,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write report " + path.string());
  out << report_csv(report);
}

}  // namespace weblynet
