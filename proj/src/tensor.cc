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

#include <algorithm>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "weblynet/errors.h"

namespace weblynet {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (const std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << "x";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

namespace internal {

std::span<double> Node::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

}  // namespace internal

namespace {

std::shared_ptr<internal::Node> make_node(Shape shape,
                                          std::vector<double> values) {
  for (const std::size_t extent : shape) {
    if (extent == 0) {
      throw DimensionError("tensor extents must be positive, got " +
                           shape_to_string(shape));
    }
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto node = std::make_shared<internal::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return node;
}

const internal::Node& checked(const std::shared_ptr<internal::Node>& node) {
  if (!node) throw ContractError("use of an undefined tensor");
  return *node;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values)
    : node_(make_node(std::move(shape), std::move(values))) {}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::from_op(Shape shape, std::vector<double> values,
                       std::vector<Tensor> parents, std::string_view op,
                       internal::BackwardFn backward) {
  auto node = make_node(std::move(shape), std::move(values));
  node->op = op;
  const bool tracked =
      std::any_of(parents.begin(), parents.end(),
                  [](const Tensor& p) { return p.requires_grad(); });
  if (tracked) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (Tensor& p : parents) node->parents.push_back(std::move(p.node_));
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).value.size(); }

std::span<const double> Tensor::data() const { return checked(node_).value; }

std::span<double> Tensor::mutable_data() {
  checked(node_);
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " +
                         shape_to_string(shape()));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const {
  return node_ != nullptr && node_->requires_grad;
}

bool Tensor::has_grad() const {
  return node_ != nullptr && node_->grad.size() == node_->value.size();
}

std::span<const double> Tensor::grad() const { return checked(node_).grad; }

std::span<double> Tensor::mutable_grad() {
  checked(node_);
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  checked(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  const internal::Node& n = checked(node_);
  return Tensor(n.shape, n.value);
}

std::string_view Tensor::op_name() const { return checked(node_).op; }

Graph Graph::trace(const Tensor& root) {
  Graph graph;
  graph.root_ = root.node();
  if (!graph.root_ || !graph.root_->requires_grad || graph.root_->is_leaf()) {
    return graph;
  }

  // Iterative post-order DFS; a node is emitted after all of its parents.
  std::unordered_set<const internal::Node*> visited{graph.root_.get()};
  std::vector<std::pair<std::shared_ptr<internal::Node>, std::size_t>> stack;
  stack.emplace_back(graph.root_, 0);
  while (!stack.empty()) {
    auto& [node, next_parent] = stack.back();
    if (next_parent < node->parents.size()) {
      const auto& parent = node->parents[next_parent++];
      if (parent->requires_grad && !parent->is_leaf() &&
          visited.insert(parent.get()).second) {
        stack.emplace_back(parent, 0);
      }
      continue;
    }
    graph.records_.push_back(std::move(node));
    stack.pop_back();
  }
  return graph;
}

void Graph::run_backward() {
  if (!root_) throw ContractError("backward on an undefined tensor");
  for (const auto& record : records_) {
    record->grad.assign(record->value.size(), 0.0);
  }
  if (root_->is_leaf()) {
    if (root_->requires_grad) root_->grad_buffer()[0] += 1.0;
    return;
  }
  root_->grad[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    internal::Node& node = **it;
    node.backward(node);
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw ContractError("backward on an undefined tensor");
  if (loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward on a tensor that is not attached to a graph");
  }
  Graph::trace(loss).run_backward();
}

}  // namespace weblynet
