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

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "drs/tensor.hpp"

namespace drs {

enum class OptimizerKind { sgd, adam };

/// Per-parameter buffers. SGD uses `first` as momentum; Adam uses both moments.
template <typename T>
struct BasicOptimizerState {
  OptimizerKind kind = OptimizerKind::sgd;
  double momentum = 0.9;
  double weight_decay = 5e-4;  // L2 added to the gradient, SGD only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<BasicTensor<T>> first;
  std::vector<BasicTensor<T>> second;
  std::uint64_t step = 0;
};

using OptimizerState = BasicOptimizerState<float>;

namespace detail {

template <typename T>
void check_step_shapes(std::span<const BasicTensor<T>> params,
                       std::span<const BasicTensor<T>> grads,
                       std::vector<BasicTensor<T>>& buffer) {
  if (params.size() != grads.size()) {
    throw ShapeError("optimizer: " + std::to_string(params.size()) + " params but " +
                     std::to_string(grads.size()) + " grads");
  }
  if (buffer.empty()) {
    for (const auto& p : params) buffer.push_back(zeros_like(p));
  }
  if (buffer.size() != params.size()) throw ShapeError("optimizer: state size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() || buffer[i].shape() != params[i].shape()) {
      throw ShapeError("optimizer: shape mismatch at parameter " + std::to_string(i));
    }
  }
}

}  // namespace detail

template <typename T>
void sgd_step(std::span<BasicTensor<T>> params, std::span<const BasicTensor<T>> grads,
              BasicOptimizerState<T>& state, double lr) {
  detail::check_step_shapes<T>(params, grads, state.first);
  const T mu = static_cast<T>(state.momentum);
  const T wd = static_cast<T>(state.weight_decay);
  const T rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto buf = state.first[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      const T d = g[j] + wd * p[j];
      buf[j] = mu * buf[j] + d;
      p[j] -= rate * buf[j];
    }
  }
  ++state.step;
}

template <typename T>
void adam_step(std::span<BasicTensor<T>> params, std::span<const BasicTensor<T>> grads,
               BasicOptimizerState<T>& state, double lr) {
  detail::check_step_shapes<T>(params, grads, state.first);
  detail::check_step_shapes<T>(params, grads, state.second);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(state.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(state.beta2, t));
  const T eps = static_cast<T>(state.epsilon);
  const T rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto m = state.first[i].data();
    auto v = state.second[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (T{1} - b1) * g[j];
      v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
      const T mhat = m[j] / correction1;
      const T vhat = v[j] / correction2;
      p[j] -= rate * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template <typename T>
void optimizer_step(std::span<BasicTensor<T>> params, std::span<const BasicTensor<T>> grads,
                    BasicOptimizerState<T>& state, double lr) {
  if (state.kind == OptimizerKind::sgd) {
    sgd_step(params, grads, state, lr);
  } else {
    adam_step(params, grads, state, lr);
  }
}

/// Step decay: lr * factor^(number of milestones <= epoch), epochs counted from 0.
inline double step_decay_lr(double base_lr, std::span<const std::size_t> milestones,
                            double factor, std::size_t epoch) {
  double lr = base_lr;
  for (std::size_t m : milestones) {
    if (epoch >= m) lr *= factor;
  }
  return lr;
}

}  // namespace drs
