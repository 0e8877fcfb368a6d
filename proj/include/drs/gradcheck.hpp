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

// Central-difference gradient checking in 64-bit.

#pragma once

#include <functional>

#include "drs/ops.hpp"
#include "drs/rng.hpp"

namespace drs {

using CheckTape = BasicTape<double>;
using CheckVar = BasicVar<double>;
using CheckTensor = BasicTensor<double>;

/// Op under test: builds its output from the given input vars.
using GradCheckOp = std::function<CheckVar(CheckTape&, std::span<const CheckVar>)>;
/// Draws one set of inputs.
using InputSampler = std::function<std::vector<CheckTensor>(Rng&)>;
/// Rejects points too close to a kink (ties in min/max, zero for relu).
using AcceptPredicate = std::function<bool(std::span<const CheckTensor>)>;

struct GradCheckOptions {
  double step = 1e-3;
  int max_resamples = 1000;
  AcceptPredicate accept;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  int resamples = 0;
};

inline InputSampler uniform_inputs(std::vector<Shape> shapes, double lo = -1.0,
                                   double hi = 1.0) {
  return [shapes = std::move(shapes), lo, hi](Rng& rng) {
    std::vector<CheckTensor> inputs;
    for (const auto& s : shapes) {
      CheckTensor t(s);
      for (auto& v : t.data()) v = uniform(rng, lo, hi);
      inputs.push_back(std::move(t));
    }
    return inputs;
  };
}

namespace detail {

inline double projected_output(const GradCheckOp& op, const std::vector<CheckTensor>& inputs,
                               const CheckTensor& weights) {
  CheckTape tape(false);
  std::vector<CheckVar> vars;
  for (const auto& t : inputs) vars.push_back(tape.constant(t));
  const auto& out = op(tape, vars).value();
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * weights[i];
  return acc;
}

}  // namespace detail

/// Compares backward() against central differences of sum(w * op(inputs)) for a
/// random projection w. Returns max |analytic - numeric| / max(1, |numeric|).
inline GradCheckResult grad_check(const GradCheckOp& op, const InputSampler& sampler,
                                  std::uint64_t seed, const GradCheckOptions& options = {}) {
  Rng rng(seed);
  GradCheckResult result;
  std::vector<CheckTensor> inputs = sampler(rng);
  while (options.accept && !options.accept(inputs)) {
    if (++result.resamples > options.max_resamples) {
      throw std::runtime_error("grad_check: no acceptable sample point found");
    }
    inputs = sampler(rng);
  }

  CheckTape tape;
  std::vector<CheckVar> vars;
  for (const auto& t : inputs) vars.push_back(tape.parameter(t));
  const CheckVar out = op(tape, vars);
  CheckTensor weights(out.shape());
  for (auto& w : weights.data()) w = uniform(rng, -1.0, 1.0);
  const CheckVar loss = sum(mul(out, tape.constant(weights)));
  tape.backward(loss);

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const CheckTensor analytic = tape.grad(vars[i]);
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      auto perturbed = inputs;
      perturbed[i][j] = inputs[i][j] + options.step;
      const double plus = detail::projected_output(op, perturbed, weights);
      perturbed[i][j] = inputs[i][j] - options.step;
      const double minus = detail::projected_output(op, perturbed, weights);
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double err = std::abs(analytic[j] - numeric) / std::max(1.0, std::abs(numeric));
      result.max_rel_error = std::max(result.max_rel_error, err);
    }
  }
  return result;
}

inline GradCheckResult grad_check(const GradCheckOp& op, std::vector<Shape> input_shapes,
                                  std::uint64_t seed, const GradCheckOptions& options = {}) {
  return grad_check(op, uniform_inputs(std::move(input_shapes)), seed, options);
}

}  // namespace drs
