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

// The release gradient suite: every differentiable op plus composed DRS blocks,
// each checked over several seeds.

#pragma once

#include "drs/gradcheck.hpp"
#include "drs/suppression.hpp"

namespace drs {

struct GradCheckCase {
  std::string name;
  GradCheckOp op;
  InputSampler sampler;
  AcceptPredicate accept;
};

struct GradCheckReport {
  std::string name;
  double max_rel_error = 0.0;
  bool passed = false;
};

inline constexpr double kGradCheckTolerance = 1e-3;
inline constexpr double kTieMargin = 1e-2;

namespace detail {

inline bool away_from_zero(const CheckTensor& t, double margin = kTieMargin) {
  return std::all_of(t.data().begin(), t.data().end(),
                     [margin](double v) { return std::abs(v) > margin; });
}

// Every window (or whole plane when k == 0) has a unique maximum by `margin`.
inline bool unique_window_max(const CheckTensor& x, std::size_t k, std::size_t stride,
                              double margin = kTieMargin) {
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t kh = k ? k : h, kw = k ? k : w;
  const std::size_t sh = k ? stride : h, sw = k ? stride : w;
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i + kh <= h; i += sh) {
      for (std::size_t j = 0; j + kw <= w; j += sw) {
        double best = -1e300, second = -1e300;
        for (std::size_t a = 0; a < kh; ++a) {
          for (std::size_t b = 0; b < kw; ++b) {
            const double v = x[(p * h + i + a) * w + j + b];
            if (v > best) {
              second = best;
              best = v;
            } else if (v > second) {
              second = v;
            }
          }
        }
        if (best - second <= margin) return false;
      }
    }
  }
  return true;
}

inline CheckVar drs_block(CheckTape& tape, std::span<const CheckVar> in) {
  (void)tape;
  return drs_forward(in[0], DrsConfig<double>::learnable(in[1], in[2]));
}

// The learnable DRS block is smooth when no element sits near its channel bound
// and channel maxima are unique.
inline bool drs_block_smooth(std::span<const CheckTensor> in) {
  if (!unique_window_max(in[0], 0, 0)) return false;
  CheckTape tape(false);
  const auto x = tape.constant(in[0]);
  const auto g = control_learnable(x, DrsConfig<double>::learnable(tape.constant(in[1]),
                                                                   tape.constant(in[2])));
  const auto tau = upper_bound(extract_max(x), g).value();
  const std::size_t area = in[0].dim(2) * in[0].dim(3);
  for (std::size_t i = 0; i < in[0].size(); ++i) {
    if (std::abs(in[0][i] - tau[i / area]) <= kTieMargin) return false;
  }
  return true;
}

inline InputSampler mixed_inputs(std::vector<std::pair<Shape, std::pair<double, double>>> specs) {
  return [specs = std::move(specs)](Rng& rng) {
    std::vector<CheckTensor> out;
    for (const auto& [shape, range] : specs) {
      CheckTensor t(shape);
      for (auto& v : t.data()) v = uniform(rng, range.first, range.second);
      out.push_back(std::move(t));
    }
    return out;
  };
}

}  // namespace detail

inline std::vector<GradCheckCase> standard_gradcheck_cases() {
  using detail::mixed_inputs;
  std::vector<GradCheckCase> cases;
  auto binary_case = [&](std::string name, auto fn, Shape a, Shape b, AcceptPredicate accept = {}) {
    cases.push_back({std::move(name),
                     [fn](CheckTape&, std::span<const CheckVar> in) { return fn(in[0], in[1]); },
                     uniform_inputs({std::move(a), std::move(b)}), std::move(accept)});
  };
  binary_case("add", [](auto a, auto b) { return add(a, b); }, {2, 3, 4, 4}, {2, 3, 1, 1});
  binary_case("sub", [](auto a, auto b) { return sub(a, b); }, {2, 3}, {1, 3});
  binary_case("mul", [](auto a, auto b) { return mul(a, b); }, {2, 3, 4, 4}, {1, 3, 1, 4});
  binary_case("minimum", [](auto a, auto b) { return minimum(a, b); }, {2, 3, 4, 4},
              {2, 3, 1, 1}, [](std::span<const CheckTensor> in) {
                const std::size_t area = 16;
                for (std::size_t i = 0; i < in[0].size(); ++i) {
                  if (std::abs(in[0][i] - in[1][i / area]) <= kTieMargin) return false;
                }
                return true;
              });

  cases.push_back({"relu", [](CheckTape&, std::span<const CheckVar> in) { return relu(in[0]); },
                   uniform_inputs({{2, 3, 4, 4}}),
                   [](std::span<const CheckTensor> in) { return detail::away_from_zero(in[0]); }});
  cases.push_back({"sigmoid",
                   [](CheckTape&, std::span<const CheckVar> in) { return sigmoid(in[0]); },
                   uniform_inputs({{2, 3, 4, 4}}, -4.0, 4.0), {}});
  cases.push_back({"reshape+sum",
                   [](CheckTape&, std::span<const CheckVar> in) {
                     return sum(reshape(in[0], Shape{6, 4}));
                   },
                   uniform_inputs({{2, 3, 4}}), {}});
  cases.push_back({"conv2d",
                   [](CheckTape&, std::span<const CheckVar> in) {
                     return conv2d(in[0], in[1], in[2], 1, 1);
                   },
                   uniform_inputs({{1, 2, 5, 5}, {3, 2, 3, 3}, {3}}), {}});
  cases.push_back({"conv2d/stride2",
                   [](CheckTape&, std::span<const CheckVar> in) {
                     return conv2d(in[0], in[1], in[2], 2, 0);
                   },
                   uniform_inputs({{2, 2, 7, 7}, {2, 2, 3, 3}, {2}}), {}});
  cases.push_back({"maxpool2d",
                   [](CheckTape&, std::span<const CheckVar> in) { return maxpool2d(in[0], 2, 2); },
                   uniform_inputs({{2, 2, 4, 4}}),
                   [](std::span<const CheckTensor> in) {
                     return detail::unique_window_max(in[0], 2, 2);
                   }});
  cases.push_back({"global_avg_pool",
                   [](CheckTape&, std::span<const CheckVar> in) { return global_avg_pool(in[0]); },
                   uniform_inputs({{2, 3, 4, 4}}), {}});
  cases.push_back({"global_max_pool",
                   [](CheckTape&, std::span<const CheckVar> in) { return global_max_pool(in[0]); },
                   uniform_inputs({{2, 3, 4, 4}}),
                   [](std::span<const CheckTensor> in) {
                     return detail::unique_window_max(in[0], 0, 0);
                   }});
  cases.push_back({"fully_connected",
                   [](CheckTape&, std::span<const CheckVar> in) {
                     return fully_connected(in[0], in[1], in[2]);
                   },
                   uniform_inputs({{2, 3}, {3, 4}, {4}}), {}});
  cases.push_back({"bce_loss",
                   [](CheckTape& tape, std::span<const CheckVar> in) {
                     CheckTensor target(Shape{2, 4});
                     for (std::size_t i = 0; i < target.size(); ++i) target[i] = (i * 7 % 3) == 0;
                     return bce_loss(in[0], tape.constant(target));
                   },
                   mixed_inputs({{{2, 4}, {0.05, 0.95}}}), {}});
  cases.push_back({"mse_loss",
                   [](CheckTape&, std::span<const CheckVar> in) { return mse_loss(in[0], in[1]); },
                   uniform_inputs({{2, 4}, {2, 4}}), {}});
  cases.push_back({"drs/learnable",
                   [](CheckTape& tape, std::span<const CheckVar> in) {
                     return detail::drs_block(tape, in);
                   },
                   mixed_inputs({{{2, 3, 4, 4}, {0.0, 1.0}}, {{3, 3}, {-1.0, 1.0}}, {{3}, {-1.0, 1.0}}}),
                   detail::drs_block_smooth});
  cases.push_back({"drs/constant",
                   [](CheckTape&, std::span<const CheckVar> in) {
                     return drs_forward(in[0], DrsConfig<double>::constant(0.55));
                   },
                   mixed_inputs({{{2, 3, 4, 4}, {0.0, 1.0}}}),
                   [](std::span<const CheckTensor> in) {
                     if (!detail::unique_window_max(in[0], 0, 0)) return false;
                     const std::size_t area = 16;
                     for (std::size_t p = 0; p < in[0].size() / area; ++p) {
                       double mx = 0.0;
                       for (std::size_t i = 0; i < area; ++i) mx = std::max(mx, in[0][p * area + i]);
                       for (std::size_t i = 0; i < area; ++i) {
                         if (std::abs(in[0][p * area + i] - 0.55 * mx) <= kTieMargin) return false;
                       }
                     }
                     return true;
                   }});
  // conv -> relu -> GAP -> FC -> sigmoid -> BCE, all parameters checked
  cases.push_back(
      {"composite/classifier",
       [](CheckTape& tape, std::span<const CheckVar> in) {
         auto h = relu(conv2d(in[0], in[1], in[2], 1, 1));
         auto pooled = reshape(global_avg_pool(h), Shape{2, 3});
         auto p = sigmoid(fully_connected(pooled, in[3], in[4]));
         CheckTensor target(Shape{2, 2}, 0.0);
         target[0] = 1.0;
         target[3] = 1.0;
         return bce_loss(p, tape.constant(target));
       },
       uniform_inputs({{2, 2, 5, 5}, {3, 2, 3, 3}, {3}, {3, 2}, {2}}),
       [](std::span<const CheckTensor> in) {
         CheckTape tape(false);
         const auto z = conv2d(tape.constant(in[0]), tape.constant(in[1]), tape.constant(in[2]), 1, 1);
         return detail::away_from_zero(z.value());
       }});
  return cases;
}

/// Runs each case over `seeds` seeds; a case passes when every seed stays below tolerance.
inline std::vector<GradCheckReport> run_gradcheck_suite(const std::vector<GradCheckCase>& cases,
                                                        std::size_t seeds = 5,
                                                        std::uint64_t base_seed = 1,
                                                        double tolerance = kGradCheckTolerance) {
  std::vector<GradCheckReport> reports;
  for (const auto& c : cases) {
    GradCheckReport r{c.name, 0.0, true};
    GradCheckOptions options;
    options.accept = c.accept;
    for (std::size_t s = 0; s < seeds; ++s) {
      const auto res = grad_check(c.op, c.sampler, derive_seed(base_seed, s), options);
      r.max_rel_error = std::max(r.max_rel_error, res.max_rel_error);
    }
    r.passed = r.max_rel_error < tolerance;
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace drs
