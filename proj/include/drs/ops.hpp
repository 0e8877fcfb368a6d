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

// Differentiable operations over BasicTape. Each op computes its forward value
// eagerly and records a backward rule that accumulates into parent gradients.

#pragma once

#include <cmath>
#include <limits>

#include "drs/tape.hpp"

namespace drs {

namespace detail {

template <typename T>
void require_same_tape(const BasicVar<T>& a, const BasicVar<T>& b) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw std::invalid_argument("operands live on different tapes");
  }
}

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": rank mismatch " + to_string(a) + " vs " +
                     to_string(b));
  }
  Shape out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i] || b[i] == 1) {
      out[i] = a[i];
    } else if (a[i] == 1) {
      out[i] = b[i];
    } else {
      throw ShapeError(std::string(op) + ": shapes not broadcastable " + to_string(a) +
                       " vs " + to_string(b));
    }
  }
  return out;
}

// Row-major strides of `in` viewed in `out`'s index space; 0 on expanded dims.
inline std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t s = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    strides[i] = (in[i] == out[i]) ? s : 0;
    s *= in[i];
  }
  return strides;
}

// Calls f(out_index, a_index, b_index) for every element of `out`.
template <typename F>
void for_each_broadcast(const Shape& out, const Shape& a, const Shape& b, F&& f) {
  const auto sa = broadcast_strides(a, out);
  const auto sb = broadcast_strides(b, out);
  const std::size_t rank = out.size();
  const std::size_t inner = out[rank - 1];
  const std::size_t ia_step = sa[rank - 1];
  const std::size_t ib_step = sb[rank - 1];
  std::vector<std::size_t> counter(rank, 0);
  const std::size_t total = numel(out);
  std::size_t ia = 0, ib = 0;
  for (std::size_t base = 0; base < total; base += inner) {
    std::size_t xa = ia, xb = ib;
    for (std::size_t j = 0; j < inner; ++j, xa += ia_step, xb += ib_step) {
      f(base + j, xa, xb);
    }
    // advance outer counters
    for (std::size_t d = rank - 1; d-- > 0;) {
      ++counter[d];
      ia += sa[d];
      ib += sb[d];
      if (counter[d] < out[d]) break;
      ia -= sa[d] * counter[d];
      ib -= sb[d] * counter[d];
      counter[d] = 0;
    }
  }
}

// Elementwise binary op with singleton broadcasting.
// da(x, y) and db(x, y) are the local partial derivatives.
template <typename T, typename Fwd, typename Da, typename Db>
BasicVar<T> binary(const char* name, const BasicVar<T>& a, const BasicVar<T>& b, Fwd fwd,
                   Da da, Db db) {
  require_same_tape(a, b);
  BasicTape<T>* tape = a.tape();
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
  BasicTensor<T> out(out_shape);
  {
    const auto& av = a.value();
    const auto& bv = b.value();
    if (av.shape() == bv.shape()) {
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
    } else {
      for_each_broadcast(out_shape, av.shape(), bv.shape(),
                         [&](std::size_t o, std::size_t i, std::size_t j) {
                           out[o] = fwd(av[i], bv[j]);
                         });
    }
  }
  return tape->record(
      std::move(out), {a, b},
      [a, b, out_shape, da, db](const BasicTensor<T>& g, std::span<BasicTensor<T>* const> slots) {
        const auto& av = a.value();
        const auto& bv = b.value();
        for_each_broadcast(out_shape, av.shape(), bv.shape(),
                           [&](std::size_t o, std::size_t i, std::size_t j) {
                             if (slots[0]) (*slots[0])[i] += g[o] * da(av[i], bv[j]);
                             if (slots[1]) (*slots[1])[j] += g[o] * db(av[i], bv[j]);
                           });
      });
}

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* A, const T* B, T* C) {
  for (std::size_t i = 0; i < m; ++i) {
    T* c = C + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T a = A[i * k + p];
      const T* b = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += a * b[j];
    }
  }
}

// C[m x n] += A[m x k] * B^T, B is n x k
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* A, const T* B, T* C) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* a = A + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* b = B + j * k;
      T acc{0};
      for (std::size_t p = 0; p < k; ++p) acc += a[p] * b[p];
      C[i * n + j] += acc;
    }
  }
}

// C[m x n] += A^T * B, A is k x m, B is k x n
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* A, const T* B, T* C) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* b = B + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T a = A[p * m + i];
      T* c = C + i * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += a * b[j];
    }
  }
}

struct ConvGeometry {
  std::size_t in_channels, height, width;
  std::size_t kh, kw, stride, padding;
  std::size_t out_h, out_w;

  std::size_t patch() const { return in_channels * kh * kw; }
  std::size_t pixels() const { return out_h * out_w; }
};

// col[(c*kh + i)*kw + j][oh*out_w + ow] = x[c][oh*s + i - p][ow*s + j - p]
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* row = col + ((c * g.kh + i) * g.kw + j) * g.pixels();
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + i) -
                                    static_cast<std::ptrdiff_t>(g.padding);
          T* dst = row + oh * g.out_w;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) {
            std::fill(dst, dst + g.out_w, T{0});
            continue;
          }
          const T* src = x + (c * g.height + static_cast<std::size_t>(ih)) * g.width;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + j) -
                                      static_cast<std::ptrdiff_t>(g.padding);
            dst[ow] = (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width))
                          ? T{0}
                          : src[static_cast<std::size_t>(iw)];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* dx) {
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* row = col + ((c * g.kh + i) * g.kw + j) * g.pixels();
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride + i) -
                                    static_cast<std::ptrdiff_t>(g.padding);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.height)) continue;
          T* dst = dx + (c * g.height + static_cast<std::size_t>(ih)) * g.width;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride + j) -
                                      static_cast<std::ptrdiff_t>(g.padding);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.width)) continue;
            dst[static_cast<std::size_t>(iw)] += row[oh * g.out_w + ow];
          }
        }
      }
    }
  }
}

template <typename T>
void require_rank(const BasicVar<T>& x, std::size_t rank, const char* op) {
  if (x.shape().size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got " + to_string(x.shape()));
  }
}

}  // namespace detail

template <typename T>
BasicVar<T> add(const BasicVar<T>& a, const BasicVar<T>& b) {
  return detail::binary(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{1}; });
}

template <typename T>
BasicVar<T> sub(const BasicVar<T>& a, const BasicVar<T>& b) {
  return detail::binary(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{-1}; });
}

template <typename T>
BasicVar<T> mul(const BasicVar<T>& a, const BasicVar<T>& b) {
  return detail::binary(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

/// Elementwise min. Ties send the whole gradient to `a`.
template <typename T>
BasicVar<T> minimum(const BasicVar<T>& a, const BasicVar<T>& b) {
  return detail::binary(
      "minimum", a, b, [](T x, T y) { return y < x ? y : x; },
      [](T x, T y) { return x <= y ? T{1} : T{0}; },
      [](T x, T y) { return y < x ? T{1} : T{0}; });
}

template <typename T>
BasicVar<T> relu(const BasicVar<T>& x) {
  const auto& xv = x.value();
  BasicTensor<T> out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > T{0} ? xv[i] : T{0};
  return x.tape()->record(std::move(out), {x},
                          [x](const BasicTensor<T>& g, std::span<BasicTensor<T>* const> s) {
                            const auto& xv = x.value();
                            auto& gx = *s[0];
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              if (xv[i] > T{0}) gx[i] += g[i];
                            }
                          });
}

template <typename T>
T sigmoid_scalar(T v) {
  if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
  const T e = std::exp(v);
  return e / (T{1} + e);
}

template <typename T>
BasicVar<T> sigmoid(const BasicVar<T>& x) {
  const auto& xv = x.value();
  BasicTensor<T> out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(xv[i]);
  return x.tape()->record(std::move(out), {x},
                          [x](const BasicTensor<T>& g, std::span<BasicTensor<T>* const> s) {
                            const auto& xv = x.value();
                            auto& gx = *s[0];
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              const T y = sigmoid_scalar(xv[i]);
                              gx[i] += g[i] * y * (T{1} - y);
                            }
                          });
}

template <typename T>
BasicVar<T> reshape(const BasicVar<T>& x, Shape shape) {
  auto out = x.value().reshaped(std::move(shape));
  return x.tape()->record(std::move(out), {x},
                          [](const BasicTensor<T>& g, std::span<BasicTensor<T>* const> s) {
                            auto& gx = *s[0];
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                          });
}

template <typename T>
BasicVar<T> sum(const BasicVar<T>& x) {
  double acc = 0.0;
  for (T v : x.value().data()) acc += static_cast<double>(v);
  return x.tape()->record(BasicTensor<T>::scalar(static_cast<T>(acc)), {x},
                          [](const BasicTensor<T>& g, std::span<BasicTensor<T>* const> s) {
                            auto& gx = *s[0];
                            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
                          });
}

/// Cross-correlation with zero padding. x: [N,Kin,H,W], weight: [Kout,Kin,kh,kw], bias: [Kout].
template <typename T>
BasicVar<T> conv2d(const BasicVar<T>& x, const BasicVar<T>& weight, const BasicVar<T>& bias,
                   std::size_t stride = 1, std::size_t padding = 0) {
  detail::require_same_tape(x, weight);
  detail::require_same_tape(x, bias);
  detail::require_rank(x, 4, "conv2d");
  detail::require_rank(weight, 4, "conv2d weight");
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws[1] != xs[1]) {
    throw ShapeError("conv2d: channel mismatch, input " + to_string(xs) + " weight " +
                     to_string(ws));
  }
  if (bias.shape() != Shape{ws[0]}) {
    throw ShapeError("conv2d: bias shape " + to_string(bias.shape()) + " for " +
                     std::to_string(ws[0]) + " output channels");
  }
  const std::size_t ph = xs[2] + 2 * padding;
  const std::size_t pw = xs[3] + 2 * padding;
  if (ph < ws[2] || pw < ws[3]) throw ShapeError("conv2d: non-positive output size");
  detail::ConvGeometry geo{xs[1], xs[2], xs[3], ws[2], ws[3], stride, padding,
                           (ph - ws[2]) / stride + 1, (pw - ws[3]) / stride + 1};
  const std::size_t batch = xs[0];
  const std::size_t kout = ws[0];

  BasicTensor<T> out(Shape{batch, kout, geo.out_h, geo.out_w});
  std::vector<T> col(geo.patch() * geo.pixels());
  const auto& xv = x.value();
  const auto& wv = weight.value();
  const auto& bv = bias.value();
  const std::size_t in_plane = geo.in_channels * geo.height * geo.width;
  const std::size_t out_plane = kout * geo.pixels();
  for (std::size_t n = 0; n < batch; ++n) {
    detail::im2col(geo, xv.data().data() + n * in_plane, col.data());
    T* o = out.data().data() + n * out_plane;
    for (std::size_t k = 0; k < kout; ++k) {
      std::fill(o + k * geo.pixels(), o + (k + 1) * geo.pixels(), bv[k]);
    }
    detail::gemm_nn(kout, geo.pixels(), geo.patch(), wv.data().data(), col.data(), o);
  }

  return x.tape()->record(
      std::move(out), {x, weight, bias},
      [x, weight, geo, batch, kout, in_plane, out_plane](
          const BasicTensor<T>& g, std::span<BasicTensor<T>* const> s) {
        const auto& xv = x.value();
        const auto& wv = weight.value();
        std::vector<T> col(geo.patch() * geo.pixels());
        std::vector<T> dcol(s[0] ? col.size() : 0);
        for (std::size_t n = 0; n < batch; ++n) {
          const T* go = g.data().data() + n * out_plane;
          if (s[2]) {
            auto& gb = *s[2];
            for (std::size_t k = 0; k < kout; ++k) {
              T acc{0};
              for (std::size_t p = 0; p < geo.pixels(); ++p) acc += go[k * geo.pixels() + p];
              gb[k] += acc;
            }
          }
          if (s[1]) {
            detail::im2col(geo, xv.data().data() + n * in_plane, col.data());
            detail::gemm_nt(kout, geo.patch(), geo.pixels(), go, col.data(),
                            s[1]->data().data());
          }
          if (s[0]) {
            std::fill(dcol.begin(), dcol.end(), T{0});
            detail::gemm_tn(geo.patch(), geo.pixels(), kout, wv.data().data(), go, dcol.data());
            detail::col2im(geo, dcol.data(), s[0]->data().data() + n * in_plane);
          }
        }
      });
}

/// Max pooling over k x k windows. Gradient goes to the first maximum in row-major scan.
template <typename T>
BasicVar<T> maxpool2d(const BasicVar<T>& x, std::size_t k, std::size_t stride) {
  detail::require_rank(x, 4, "maxpool2d");
  const Shape& xs = x.shape();
  if (k == 0 || stride == 0 || xs[2] < k || xs[3] < k) {
    throw ShapeError("maxpool2d: non-positive output size for " + to_string(xs));
  }
  const std::size_t oh = (xs[2] - k) / stride + 1;
  const std::size_t ow = (xs[3] - k) / stride + 1;
  const std::size_t planes = xs[0] * xs[1];
  BasicTensor<T> out(Shape{xs[0], xs[1], oh, ow});
  std::vector<std::size_t> argmax(out.size());
  const auto& xv = x.value();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xv.data().data() + p * xs[2] * xs[3];
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = (i * stride) * xs[3] + j * stride;
        for (std::size_t di = 0; di < k; ++di) {
          for (std::size_t dj = 0; dj < k; ++dj) {
            const std::size_t idx = (i * stride + di) * xs[3] + j * stride + dj;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const std::size_t o = (p * oh + i) * ow + j;
        out[o] = src[best];
        argmax[o] = p * xs[2] * xs[3] + best;
      }
    }
  }
  return x.tape()->record(std::move(out), {x},
                          [argmax = std::move(argmax)](const BasicTensor<T>& g,
                                                       std::span<BasicTensor<T>* const> s) {
                            auto& gx = *s[0];
                            for (std::size_t o = 0; o < g.size(); ++o) gx[argmax[o]] += g[o];
                          });
}

/// Mean over H x W: [N,K,H,W] -> [N,K,1,1].
template <typename T>
BasicVar<T> global_avg_pool(const BasicVar<T>& x) {
  detail::require_rank(x, 4, "global_avg_pool");
  const Shape& xs = x.shape();
  const std::size_t planes = xs[0] * xs[1];
  const std::size_t area = xs[2] * xs[3];
  BasicTensor<T> out(Shape{xs[0], xs[1], 1, 1});
  const auto& xv = x.value();
  for (std::size_t p = 0; p < planes; ++p) {
    T acc{0};
    for (std::size_t i = 0; i < area; ++i) acc += xv[p * area + i];
    out[p] = acc / static_cast<T>(area);
  }
  return x.tape()->record(std::move(out), {x},
                          [planes, area](const BasicTensor<T>& g,
                                         std::span<BasicTensor<T>* const> s) {
                            auto& gx = *s[0];
                            for (std::size_t p = 0; p < planes; ++p) {
                              const T share = g[p] / static_cast<T>(area);
                              for (std::size_t i = 0; i < area; ++i) gx[p * area + i] += share;
                            }
                          });
}

/// Max over H x W: [N,K,H,W] -> [N,K,1,1]. Gradient goes to the first maximum in scan order.
template <typename T>
BasicVar<T> global_max_pool(const BasicVar<T>& x) {
  detail::require_rank(x, 4, "global_max_pool");
  const Shape& xs = x.shape();
  const std::size_t planes = xs[0] * xs[1];
  const std::size_t area = xs[2] * xs[3];
  BasicTensor<T> out(Shape{xs[0], xs[1], 1, 1});
  std::vector<std::size_t> argmax(planes);
  const auto& xv = x.value();
  for (std::size_t p = 0; p < planes; ++p) {
    std::size_t best = p * area;
    for (std::size_t i = 1; i < area; ++i) {
      if (xv[p * area + i] > xv[best]) best = p * area + i;
    }
    out[p] = xv[best];
    argmax[p] = best;
  }
  return x.tape()->record(std::move(out), {x},
                          [argmax = std::move(argmax)](const BasicTensor<T>& g,
                                                       std::span<BasicTensor<T>* const> s) {
                            auto& gx = *s[0];
                            for (std::size_t p = 0; p < g.size(); ++p) gx[argmax[p]] += g[p];
                          });
}

/// x: [N,K], weight: [K,M], bias: [M] -> [N,M].
template <typename T>
BasicVar<T> fully_connected(const BasicVar<T>& x, const BasicVar<T>& weight,
                            const BasicVar<T>& bias) {
  detail::require_same_tape(x, weight);
  detail::require_same_tape(x, bias);
  detail::require_rank(x, 2, "fully_connected");
  detail::require_rank(weight, 2, "fully_connected weight");
  const std::size_t n = x.dim(0), k = x.dim(1), m = weight.dim(1);
  if (weight.dim(0) != k || bias.shape() != Shape{m}) {
    throw ShapeError("fully_connected: dimension mismatch x " + to_string(x.shape()) +
                     " weight " + to_string(weight.shape()) + " bias " +
                     to_string(bias.shape()));
  }
  BasicTensor<T> out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = bias.value()[j];
  }
  detail::gemm_nn(n, m, k, x.value().data().data(), weight.value().data().data(),
                  out.data().data());
  return x.tape()->record(
      std::move(out), {x, weight, bias},
      [x, weight, n, k, m](const BasicTensor<T>& g, std::span<BasicTensor<T>* const> s) {
        if (s[0]) {
          detail::gemm_nt(n, k, m, g.data().data(), weight.value().data().data(),
                          s[0]->data().data());
        }
        if (s[1]) {
          detail::gemm_tn(k, m, n, x.value().data().data(), g.data().data(),
                          s[1]->data().data());
        }
        if (s[2]) {
          auto& gb = *s[2];
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
          }
        }
      });
}

inline constexpr double kBceEpsilon = 1e-7;

/// Mean binary cross-entropy; predictions are clamped to [eps, 1 - eps].
template <typename T>
BasicVar<T> bce_loss(const BasicVar<T>& pred, const BasicVar<T>& target) {
  detail::require_same_tape(pred, target);
  if (pred.shape() != target.shape()) {
    throw ShapeError("bce_loss: shape mismatch " + to_string(pred.shape()) + " vs " +
                     to_string(target.shape()));
  }
  const auto& p = pred.value();
  const auto& t = target.value();
  const T lo = static_cast<T>(kBceEpsilon);
  const T hi = T{1} - lo;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = std::clamp(p[i], lo, hi);
    acc -= t[i] * std::log(pi) + (1.0 - t[i]) * std::log(1.0 - pi);
  }
  const double count = static_cast<double>(p.size());
  return pred.tape()->record(
      BasicTensor<T>::scalar(static_cast<T>(acc / count)), {pred, target},
      [pred, target, lo, hi, count](const BasicTensor<T>& g,
                                    std::span<BasicTensor<T>* const> s) {
        const auto& p = pred.value();
        const auto& t = target.value();
        for (std::size_t i = 0; i < p.size(); ++i) {
          const T pi = std::clamp(p[i], lo, hi);
          const T scale = g[0] / static_cast<T>(count);
          if (s[0]) (*s[0])[i] += scale * (pi - t[i]) / (pi * (T{1} - pi));
          if (s[1]) (*s[1])[i] += scale * (std::log(T{1} - pi) - std::log(pi));
        }
      });
}

template <typename T>
BasicVar<T> mse_loss(const BasicVar<T>& pred, const BasicVar<T>& target) {
  detail::require_same_tape(pred, target);
  if (pred.shape() != target.shape()) {
    throw ShapeError("mse_loss: shape mismatch " + to_string(pred.shape()) + " vs " +
                     to_string(target.shape()));
  }
  const auto& p = pred.value();
  const auto& t = target.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - t[i];
    acc += d * d;
  }
  const double count = static_cast<double>(p.size());
  return pred.tape()->record(
      BasicTensor<T>::scalar(static_cast<T>(acc / count)), {pred, target},
      [pred, target, count](const BasicTensor<T>& g, std::span<BasicTensor<T>* const> s) {
        const auto& p = pred.value();
        const auto& t = target.value();
        const T scale = T{2} * g[0] / static_cast<T>(count);
        for (std::size_t i = 0; i < p.size(); ++i) {
          const T d = p[i] - t[i];
          if (s[0]) (*s[0])[i] += scale * d;
          if (s[1]) (*s[1])[i] -= scale * d;
        }
      });
}

}  // namespace drs
