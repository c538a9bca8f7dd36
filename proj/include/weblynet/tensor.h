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

#ifndef WEBLYNET_TENSOR_H_
#define WEBLYNET_TENSOR_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace weblynet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace internal {

struct Node;
using BackwardFn = std::function<void(Node&)>;

// One value in the differentiation graph. Leaves have no parents; op nodes
// carry a closure that reads `grad` and accumulates into the parents.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
  std::string_view op = "leaf";

  bool is_leaf() const { return parents.empty(); }
  // Zero-initialised gradient buffer of this node, allocated on first use.
  std::span<double> grad_buffer();
};

}  // namespace internal

// Dense row-major array of doubles, optionally attached to a reverse-mode
// differentiation graph. Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;
  // Detached constant; product(shape) must equal values.size().
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  // Leaf that accumulates gradient during backward.
  static Tensor parameter(Shape shape, std::vector<double> values);

  // Builds an op result. The node is attached to the graph only when some
  // parent requires grad; otherwise `backward` is dropped.
  static Tensor from_op(Shape shape, std::vector<double> values,
                        std::vector<Tensor> parents, std::string_view op,
                        internal::BackwardFn backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // In-place access for optimizers and loaders. Never mutate a tensor whose
  // value was saved by a pending backward closure.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Value copy with no graph history and no gradient.
  Tensor detach() const;
  std::string_view op_name() const;

  const std::shared_ptr<internal::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<internal::Node> node)
      : node_(std::move(node)) {}

  std::shared_ptr<internal::Node> node_;
};

// Operation records reachable from a root, parents before children.
class Graph {
 public:
  static Graph trace(const Tensor& root);

  std::size_t size() const { return records_.size(); }
  std::span<const std::shared_ptr<internal::Node>> records() const {
    return records_;
  }

  // Seeds the root gradient with 1 and runs every record once, last first.
  void run_backward();

 private:
  std::shared_ptr<internal::Node> root_;
  std::vector<std::shared_ptr<internal::Node>> records_;
};

// Populates d(loss)/d(leaf) for every parameter leaf reachable from `loss`.
// Gradients add onto whatever the leaves already hold.
void backward(const Tensor& loss);

}  // namespace weblynet

#endif  // WEBLYNET_TENSOR_H_
