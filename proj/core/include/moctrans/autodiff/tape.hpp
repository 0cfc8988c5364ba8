/*
 * Copyright 2026 The MO-CTranS Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "moctrans/autodiff/tensor.hpp"

namespace moct::ad {

enum class OpKind {
  Constant,
  Input,
  Parameter,
  Conv2d,
  BatchNorm2d,
  Relu,
  Add,
  BroadcastAdd,
  Mul,
  Scale,
  Sum,
  MaxPool2d,
  Linear,
  Softmax,
  LayerNorm,
  Attention,
  PatchPartition,
  PatchMerge,
  ConcatRows,
  AddRows,
  SliceRows,
  CrossEntropy,
  SoftDice,
  WeightedMean,
  Custom,
};

std::string_view op_name(OpKind kind);

template <typename T>
class Tape;

// Handle to a value recorded on a tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, int id) : tape_(tape), id_(id) {}

  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape; }
  std::size_t dim(std::size_t axis) const { return value().shape.at(axis); }
  // Empty until backward reached this node.
  std::span<const T> grad() const { return tape_->grad_of(id_); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

  int id() const { return id_; }
  Tape<T>* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  int id_ = -1;
};

// Linear record of operations. Nodes are appended in execution order so the
// record is topologically sorted; backward replays it in reverse.
template <typename T>
class Tape {
 public:
  // Called with the node's upstream gradient; accumulates into input grads
  // through Tape::accumulate.
  using BackwardFn = std::function<void(Tape&, std::span<const T> upstream)>;

  struct Node {
    OpKind kind = OpKind::Constant;
    std::vector<int> inputs;
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    std::vector<T>* external_grad = nullptr;
    std::vector<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var<T> constant(Tensor<T> value) { return push(OpKind::Constant, {}, std::move(value), false, {}); }

  Var<T> input(Tensor<T> value, bool requires_grad = true) {
    return push(OpKind::Input, {}, std::move(value), requires_grad && grad_enabled_, {});
  }

  // Enrolls an externally owned parameter without copying it. Gradients are
  // added into `p.grad` when backward runs.
  Var<T> param(Parameter<T>& p) {
    Node node;
    node.kind = OpKind::Parameter;
    node.external = &p.value;
    node.requires_grad = p.requires_grad && grad_enabled_;
    if (node.requires_grad) {
      if (p.grad.size() != p.value.size()) p.zero_grad();
      node.external_grad = &p.grad;
    }
    nodes_.push_back(std::move(node));
    return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
  }

  // Records an operation output. The backward closure is dropped when no
  // input requires a gradient.
  Var<T> record(OpKind kind, std::vector<int> inputs, Tensor<T> value, BackwardFn backward) {
    bool needs = false;
    for (int id : inputs) needs = needs || requires_grad(id);
    if (!needs) backward = nullptr;
    return push(kind, std::move(inputs), std::move(value), needs, std::move(backward));
  }

  const Tensor<T>& value(int id) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(id));
    return n.external != nullptr ? *n.external : n.value;
  }
  bool requires_grad(int id) const { return nodes_.at(static_cast<std::size_t>(id)).requires_grad; }
  std::span<const T> grad_of(int id) const { return nodes_.at(static_cast<std::size_t>(id)).grad; }

  // Adds `g` into the gradient of node `id`; no-op for nodes that do not
  // require gradients.
  void accumulate(int id, std::span<const T> g) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    if (n.grad.empty()) n.grad.assign(value(id).size(), T(0));
    for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
  }

  // Direct access for kernels that scatter into an input gradient.
  std::span<T> grad_buffer(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return {};
    if (n.grad.empty()) n.grad.assign(value(id).size(), T(0));
    return n.grad;
  }

  void backward(const Var<T>& loss) {
    if (loss.tape() != this) throw ShapeError("backward: loss is not recorded on this tape");
    const std::size_t root = static_cast<std::size_t>(loss.id());
    if (value(loss.id()).size() != 1) {
      throw ShapeError("backward: loss must be scalar, got shape " + to_string(value(loss.id()).shape));
    }
    if (!nodes_[root].requires_grad) return;
    for (Node& n : nodes_) n.grad.clear();
    nodes_[root].grad.assign(1, T(1));
    for (std::size_t i = root + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, std::span<const T>(n.grad));
      if (n.external_grad != nullptr) {
        std::vector<T>& dst = *n.external_grad;
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  void clear() { nodes_.clear(); }

 private:
  Var<T> push(OpKind kind, std::vector<int> inputs, Tensor<T> value, bool needs, BackwardFn backward) {
    Node node;
    node.kind = kind;
    node.inputs = std::move(inputs);
    node.value = std::move(value);
    node.requires_grad = needs;
    node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
  }

  bool grad_enabled_;
  std::vector<Node> nodes_;
};

}  // namespace moct::ad
