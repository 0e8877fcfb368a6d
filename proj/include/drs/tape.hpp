/*
 * Copyright 2026 The DRS Authors
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

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "drs/tensor.hpp"

namespace drs {

template <typename T>
class BasicTape;

/// Handle to a value recorded on a tape. Cheap to copy; valid while the tape lives.
template <typename T>
class BasicVar {
 public:
  BasicVar() = default;

  const BasicTensor<T>& value() const { return tape_->value(*this); }
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t i) const { return value().dim(i); }
  bool requires_grad() const { return tape_->requires_grad(*this); }
  BasicTape<T>* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class BasicTape<T>;
  BasicVar(BasicTape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  BasicTape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only record of operations. Nodes are stored in creation order, which is
/// a topological order; backward() walks them once in reverse.
template <typename T>
class BasicTape {
 public:
  using Tensor = BasicTensor<T>;
  using Var = BasicVar<T>;
  // Receives the upstream gradient and one slot per parent (null when the parent
  // needs no gradient). Implementations accumulate into the slots.
  using BackwardFn =
      std::function<void(const Tensor& grad_out, std::span<Tensor* const> parent_grads)>;

  explicit BasicTape(bool recording = true) : recording_(recording) {
#ifndef NDEBUG
    check_finite_ = true;
#endif
  }

  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  bool recording() const noexcept { return recording_; }
  void set_check_finite(bool on) noexcept { check_finite_ = on; }

  Var leaf(Tensor value, bool requires_grad = false) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad && recording_;
    return push(std::move(node));
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var parameter(Tensor value) { return leaf(std::move(value), true); }

  /// Records an op result. `backward` is dropped if no parent needs a gradient.
  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    if (check_finite_ && !node.value.all_finite()) {
      throw NumericalError("non-finite value produced by op");
    }
    for (const Var& p : parents) {
      check_owned(p);
      node.requires_grad = node.requires_grad || nodes_[p.id_].requires_grad;
    }
    if (node.requires_grad && recording_) {
      node.parents.reserve(parents.size());
      for (const Var& p : parents) node.parents.push_back(p.id_);
      node.backward = std::move(backward);
    } else {
      node.requires_grad = false;
    }
    return push(std::move(node));
  }

  const Tensor& value(const Var& v) const {
    check_owned(v);
    return nodes_[v.id_].value;
  }

  bool requires_grad(const Var& v) const {
    check_owned(v);
    return nodes_[v.id_].requires_grad;
  }

  /// Gradient of the last backward() target w.r.t. v; zeros if v was not reached.
  Tensor grad(const Var& v) const {
    check_owned(v);
    const Node& node = nodes_[v.id_];
    return node.grad ? *node.grad : zeros_like(node.value);
  }

  void backward(const Var& loss) {
    if (loss.tape_ != this) throw std::invalid_argument("backward: tensor not on this tape");
    check_owned(loss);
    if (nodes_[loss.id_].value.size() != 1) {
      throw ShapeError("backward: loss must be scalar, got " +
                       to_string(nodes_[loss.id_].value.shape()));
    }
    for (Node& n : nodes_) n.grad.reset();
    nodes_[loss.id_].grad = ones_like(nodes_[loss.id_].value);

    std::vector<Tensor*> slots;
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.grad || !node.backward) continue;
      slots.assign(node.parents.size(), nullptr);
      for (std::size_t j = 0; j < node.parents.size(); ++j) {
        Node& parent = nodes_[node.parents[j]];
        if (!parent.requires_grad) continue;
        if (!parent.grad) parent.grad = zeros_like(parent.value);
        slots[j] = &*parent.grad;
      }
      node.backward(*node.grad, slots);
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::optional<Tensor> grad;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  Var push(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
  }

  void check_owned(const Var& v) const {
    if (v.tape_ != this || v.id_ >= nodes_.size()) {
      throw std::invalid_argument("tensor not on this tape");
    }
  }

  std::vector<Node> nodes_;
  bool recording_ = true;
  bool check_finite_ = false;
};

using Tape = BasicTape<float>;
using Var = BasicVar<float>;

}  // namespace drs
