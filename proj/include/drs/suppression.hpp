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

// Discriminative region suppression: cap each channel of a feature map at a
// fraction of its own maximum.
//
//   x_max = extractor(x)          per-channel global max
//   g     = controller(x)         control values in [0,1]
//   tau   = x_max * g             upper bound, expanded over H x W
//   out   = min(x, tau)

#pragma once

#include <limits>
#include <optional>
#include <string>

#include "drs/ops.hpp"

namespace drs {

enum class ControllerMode { learnable, constant };

inline std::string to_string(ControllerMode mode) {
  return mode == ControllerMode::learnable ? "learnable" : "constant";
}

inline ControllerMode parse_controller_mode(const std::string& s) {
  if (s == "learnable") return ControllerMode::learnable;
  if (s == "constant") return ControllerMode::constant;
  throw std::invalid_argument("unknown controller mode '" + s + "'");
}

/// Serializable part of a plug-in site's configuration.
struct DrsSettings {
  ControllerMode mode = ControllerMode::constant;
  double delta = 0.55;

  friend bool operator==(const DrsSettings&, const DrsSettings&) = default;
};

/// Controller FC: weight [K,K], bias [K].
template <typename T>
struct ControllerParams {
  BasicVar<T> weight;
  BasicVar<T> bias;
};

template <typename T>
struct DrsConfig {
  ControllerMode mode = ControllerMode::constant;
  double delta = 0.55;
  std::optional<ControllerParams<T>> controller;

  static DrsConfig constant(double delta) { return {ControllerMode::constant, delta, {}}; }
  static DrsConfig learnable(BasicVar<T> weight, BasicVar<T> bias) {
    return {ControllerMode::learnable, 0.0, ControllerParams<T>{weight, bias}};
  }

  void validate(std::size_t channels) const {
    if (mode == ControllerMode::constant) {
      if (!(delta >= 0.0 && delta <= 1.0)) {
        throw std::invalid_argument("DRS delta must lie in [0,1], got " +
                                    std::to_string(delta));
      }
      return;
    }
    if (!controller) throw std::invalid_argument("learnable DRS requires controller params");
    if (controller->weight.shape() != Shape{channels, channels} ||
        controller->bias.shape() != Shape{channels}) {
      throw ShapeError("DRS controller expects weight [" + std::to_string(channels) + "," +
                       std::to_string(channels) + "] and bias [" +
                       std::to_string(channels) + "], got " +
                       to_string(controller->weight.shape()) + " and " +
                       to_string(controller->bias.shape()));
    }
  }
};

/// Per-channel maxima: [N,K,H,W] -> [N,K,1,1].
template <typename T>
BasicVar<T> extract_max(const BasicVar<T>& x) {
  return global_max_pool(x);
}

/// g = sigmoid(FC(GAP(x))), one value per sample and channel.
template <typename T>
BasicVar<T> control_learnable(const BasicVar<T>& x, const DrsConfig<T>& cfg) {
  if (cfg.mode != ControllerMode::learnable) {
    throw std::invalid_argument("control_learnable called with constant-mode config");
  }
  detail::require_rank(x, 4, "control_learnable");
  const std::size_t n = x.dim(0), k = x.dim(1);
  cfg.validate(k);
  auto pooled = reshape(global_avg_pool(x), Shape{n, k});
  auto logits = fully_connected(pooled, cfg.controller->weight, cfg.controller->bias);
  return sigmoid(reshape(logits, Shape{n, k, 1, 1}));
}

/// Constant control values; never tracked for gradients.
template <typename T>
BasicVar<T> control_constant(BasicTape<T>& tape, std::size_t k, std::size_t n,
                             const DrsConfig<T>& cfg) {
  if (cfg.mode != ControllerMode::constant) {
    throw std::invalid_argument("control_constant called with learnable-mode config");
  }
  cfg.validate(k);
  return tape.constant(BasicTensor<T>(Shape{n, k, 1, 1}, static_cast<T>(cfg.delta)));
}

/// tau = x_max * g. Channels whose maximum is not positive get an unreachable
/// bound, so they pass through min() unchanged.
template <typename T>
BasicVar<T> upper_bound(const BasicVar<T>& x_max, const BasicVar<T>& g) {
  if (x_max.shape() != g.shape()) {
    throw ShapeError("upper_bound: control values " + to_string(g.shape()) +
                     " do not match channel maxima " + to_string(x_max.shape()));
  }
  auto tau = mul(x_max, g);
  const auto& mv = x_max.value();
  BasicTensor<T> offset(mv.shape(), T{0});
  bool any = false;
  for (std::size_t i = 0; i < mv.size(); ++i) {
    if (!(mv[i] > T{0})) {
      offset[i] = std::numeric_limits<T>::max();
      any = true;
    }
  }
  if (any) tau = add(tau, x_max.tape()->constant(std::move(offset)));
  return tau;
}

/// min(x, x_max * g) with tau broadcast over H x W.
template <typename T>
BasicVar<T> suppress(const BasicVar<T>& x, const BasicVar<T>& g) {
  detail::require_rank(x, 4, "suppress");
  if (g.shape() != Shape{x.dim(0), x.dim(1), 1, 1}) {
    throw ShapeError("suppress: control values " + to_string(g.shape()) +
                     " do not match feature map " + to_string(x.shape()));
  }
  return minimum(x, upper_bound(extract_max(x), g));
}

template <typename T>
BasicVar<T> control_values(const BasicVar<T>& x, const DrsConfig<T>& cfg) {
  detail::require_rank(x, 4, "drs");
  return cfg.mode == ControllerMode::learnable
             ? control_learnable(x, cfg)
             : control_constant(*x.tape(), x.dim(1), x.dim(0), cfg);
}

template <typename T>
BasicVar<T> drs_forward(const BasicVar<T>& x, const DrsConfig<T>& cfg) {
  return suppress(x, control_values(x, cfg));
}

}  // namespace drs
