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

#ifndef WEBLYNET_ERRORS_H_
#define WEBLYNET_ERRORS_H_

#include <stdexcept>
#include <string>
#include <utility>

namespace weblynet {

// Shapes or lengths that do not fit together.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition on arguments or call order was violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed or missing input data (manifests, feature files, checkpoints).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric that is undefined for its input, e.g. AP with no relevant items.
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A pipeline stage failed; the message names the stage and seed.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "' failed: " + what),
        stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace weblynet

#endif  // WEBLYNET_ERRORS_H_
