// Copyright 2026 The kmunet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kmunet/error.hpp"

namespace kmunet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace detail {

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until something accumulates into it
  bool requires_grad = false;
};

}  // namespace detail

// Dense row-major array with an optional gradient buffer. Tensor is a cheap
// handle: copies share storage. Values are not changed after an operation
// produced them; only leaf parameters are updated in place by optimizers.
//
// T is float for training and double for gradient checking.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape) : Tensor(shape, std::vector<T>(shape_numel(shape), T{0})) {}

  Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<detail::TensorNode<T>>()) {
    for (std::size_t d : shape) {
      if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
    }
    if (shape_numel(shape) != values.size()) {
      throw DimensionError("shape " + shape_string(shape) + " needs " + std::to_string(shape_numel(shape)) +
                           " values, got " + std::to_string(values.size()));
    }
    node_->shape = std::move(shape);
    node_->values = std::move(values);
  }

  static Tensor full(Shape shape, T value) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value));
  }

  static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }

  bool defined() const { return node_ != nullptr; }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->values.size(); }

  std::span<const T> values() const { return node_->values; }
  // For freshly created outputs and for optimizer updates of leaves.
  std::span<T> mutable_values() { return node_->values; }
  const T* data() const { return node_->values.data(); }

  T item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
    return node_->values[0];
  }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tensor& set_requires_grad(bool flag) {
    node_->requires_grad = flag;
    return *this;
  }

  bool has_grad() const { return node_ && !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }

  // Zero-initialised on first use.
  std::span<T> grad_accumulator() const {
    if (node_->grad.empty()) node_->grad.assign(node_->values.size(), T{0});
    return node_->grad;
  }

  void zero_grad() const { node_->grad.clear(); }

  Tensor detached() const { return Tensor(shape(), node_->values); }

  // Identity of the underlying storage.
  const void* id() const { return node_.get(); }

 private:
  std::shared_ptr<detail::TensorNode<T>> node_;
};

// Ordered record of the differentiable operations executed while the tape is
// active on the current thread. Entries are appended as operations run, so
// inputs always precede the operations that consume them.
template <typename T>
class Tape {
 public:
  // Receives the accumulated gradient of the operation's output and adds
  // contributions into the gradients of its inputs.
  using BackwardFn = std::function<void(std::span<const T> output_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::vector<Tensor<T>> inputs, Tensor<T> output, BackwardFn backward) {
    if (consumed_) throw ContractError("tape already ran backward; create a new tape");
    entries_.push_back(Entry{std::move(inputs), std::move(output), std::move(backward)});
  }

  std::size_t size() const { return entries_.size(); }

  // Seeds d(loss)/d(loss) = 1 and runs every backward rule in reverse order.
  // A tape can run backward once; its entries are released afterwards.
  void backward(Tensor<T> loss) {
    if (consumed_) throw ContractError("backward already ran on this tape");
    if (loss.numel() != 1) throw ContractError("backward needs a scalar loss, got " + shape_string(loss.shape()));
    consumed_ = true;
    loss.grad_accumulator()[0] += T{1};
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      if (it->output.has_grad()) it->backward(it->output.grad());
    }
    entries_.clear();
  }

 private:
  struct Entry {
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
  bool consumed_ = false;
};

template <typename T>
Tape<T>*& active_tape() {
  thread_local Tape<T>* tape = nullptr;
  return tape;
}

// Makes `tape` the active tape of this thread for the guard's lifetime.
template <typename T>
class Recording {
 public:
  explicit Recording(Tape<T>& tape) : previous_(active_tape<T>()) { active_tape<T>() = &tape; }
  ~Recording() { active_tape<T>() = previous_; }
  Recording(const Recording&) = delete;
  Recording& operator=(const Recording&) = delete;

 private:
  Tape<T>* previous_;
};

void check_finite_or_throw(std::span<const float> values, const char* op);
void check_finite_or_throw(std::span<const double> values, const char* op);

// Registers `output` as produced from `inputs`. When a tape is active and any
// input requires a gradient, the output is marked as requiring one and the
// backward rule is recorded. Building blocks outside numerics use this to
// define fused operations.
template <typename T, typename Fn>
Tensor<T> attach(const char* op, Tensor<T> output, std::vector<Tensor<T>> inputs, Fn&& backward) {
#ifndef NDEBUG
  check_finite_or_throw(output.values(), op);
#else
  (void)op;
#endif
  Tape<T>* tape = active_tape<T>();
  if (tape == nullptr) return output;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return output;
  output.set_requires_grad(true);
  tape->record(std::move(inputs), output, typename Tape<T>::BackwardFn(std::forward<Fn>(backward)));
  return output;
}

}  // namespace kmunet
