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

// Brute-force reference implementations shared by the unit tests and the
// acceptance runner. Deliberately naive: direct loops, no shared helpers with
// the library code they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "drs/data.hpp"
#include "drs/labeling.hpp"
#include "drs/rng.hpp"
#include "drs/tensor.hpp"

namespace oracle {

using drs::Shape;

template <typename T>
drs::BasicTensor<T> random_tensor(drs::Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  drs::BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(drs::uniform(rng, lo, hi));
  return t;
}

inline drs::Tensor conv2d(const drs::Tensor& x, const drs::Tensor& w, const drs::Tensor& b,
                          std::size_t stride, std::size_t pad) {
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
  const std::size_t ow = (wd + 2 * pad - kw) / stride + 1;
  drs::Tensor out(Shape{n, cout, oh, ow});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double acc = b[o];
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t dy = 0; dy < kh; ++dy)
              for (std::size_t dx = 0; dx < kw; ++dx) {
                const long sy = static_cast<long>(y * stride + dy) - static_cast<long>(pad);
                const long sx = static_cast<long>(xx * stride + dx) - static_cast<long>(pad);
                if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(wd))
                  continue;
                acc += static_cast<double>(x.at(i, c, sy, sx)) * w.at(o, c, dy, dx);
              }
          out.at(i, o, y, xx) = static_cast<float>(acc);
        }
  return out;
}

inline drs::Tensor maxpool2d(const drs::Tensor& x, std::size_t k, std::size_t stride) {
  const std::size_t oh = (x.dim(2) - k) / stride + 1, ow = (x.dim(3) - k) / stride + 1;
  drs::Tensor out(Shape{x.dim(0), x.dim(1), oh, ow});
  for (std::size_t n = 0; n < x.dim(0); ++n)
    for (std::size_t c = 0; c < x.dim(1); ++c)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          float m = -INFINITY;
          for (std::size_t dy = 0; dy < k; ++dy)
            for (std::size_t dx = 0; dx < k; ++dx)
              m = std::max(m, x.at(n, c, y * stride + dy, xx * stride + dx));
          out.at(n, c, y, xx) = m;
        }
  return out;
}

inline drs::Tensor global_pool(const drs::Tensor& x, bool average) {
  drs::Tensor out(Shape{x.dim(0), x.dim(1), 1, 1});
  for (std::size_t n = 0; n < x.dim(0); ++n)
    for (std::size_t c = 0; c < x.dim(1); ++c) {
      double acc = 0.0;
      float m = -INFINITY;
      for (std::size_t y = 0; y < x.dim(2); ++y)
        for (std::size_t xx = 0; xx < x.dim(3); ++xx) {
          acc += x.at(n, c, y, xx);
          m = std::max(m, x.at(n, c, y, xx));
        }
      out.at(n, c, 0, 0) =
          average ? static_cast<float>(acc / static_cast<double>(x.dim(2) * x.dim(3))) : m;
    }
  return out;
}

inline drs::Tensor fully_connected(const drs::Tensor& x, const drs::Tensor& w,
                                   const drs::Tensor& b) {
  const std::size_t n = x.dim(0), k = x.dim(1), m = w.dim(1);
  drs::Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = b[j];
      for (std::size_t p = 0; p < k; ++p) acc += static_cast<double>(x[i * k + p]) * w[p * m + j];
      out[i * m + j] = static_cast<float>(acc);
    }
  return out;
}

/// min(x, x_max * delta) channel by channel.
inline drs::Tensor suppress_constant(const drs::Tensor& x, float delta) {
  drs::Tensor out = x;
  const std::size_t area = x.dim(2) * x.dim(3);
  for (std::size_t p = 0; p < x.dim(0) * x.dim(1); ++p) {
    float m = x[p * area];
    for (std::size_t i = 1; i < area; ++i) m = std::max(m, x[p * area + i]);
    const float tau = m * delta;
    for (std::size_t i = 0; i < area; ++i) out[p * area + i] = std::min(x[p * area + i], tau);
  }
  return out;
}

/// mIoU through a full confusion matrix.
inline double miou(const std::vector<drs::LabelMap>& preds, const std::vector<drs::LabelMap>& gts,
                   std::size_t classes) {
  std::vector<std::vector<std::uint64_t>> cm(256, std::vector<std::uint64_t>(256, 0));
  for (std::size_t s = 0; s < preds.size(); ++s)
    for (std::size_t i = 0; i < preds[s].size(); ++i)
      ++cm[gts[s].values[i]][preds[s].values[i]];
  double total = 0.0;
  int counted = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::uint64_t gt_count = 0, pred_count = 0;
    for (std::size_t j = 0; j < 256; ++j) {
      gt_count += cm[c][j];
      if (j != drs::kIgnoreLabel) pred_count += cm[j][c];
    }
    const std::uint64_t inter = cm[c][c];
    const std::uint64_t uni = gt_count + pred_count - inter;
    if (uni == 0) continue;
    total += static_cast<double>(inter) / static_cast<double>(uni);
    ++counted;
  }
  return counted ? total / counted : 0.0;
}

inline drs::LabelMap pseudo_label(const drs::Tensor& maps, const std::vector<std::uint8_t>& present,
                                  const drs::ScalarMap& saliency, float alpha, float beta) {
  const std::size_t c = maps.dim(0), h = maps.dim(1), w = maps.dim(2);
  drs::LabelMap out(h, w, drs::kIgnoreLabel);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      int best = -1;
      for (std::size_t k = 0; k < c; ++k) {
        const float v = maps[(k * h + y) * w + x];
        if (!present[k] || !(v > alpha)) continue;
        if (best < 0 || v > maps[(static_cast<std::size_t>(best) * h + y) * w + x])
          best = static_cast<int>(k);
      }
      if (best >= 0)
        out(y, x) = static_cast<std::uint8_t>(best + 1);
      else if (saliency(y, x) < beta)
        out(y, x) = 0;
    }
  return out;
}

/// Bilinear sample at continuous source coordinates, half-pixel centers.
inline double bilinear_at(const drs::Tensor& m, std::size_t k, double sy, double sx) {
  const std::size_t h = m.dim(1), w = m.dim(2);
  sy = std::max(0.0, sy);
  sx = std::max(0.0, sx);
  const double fy0 = std::floor(sy), fx0 = std::floor(sx);
  const std::size_t y0 = std::min(static_cast<std::size_t>(fy0), h - 1);
  const std::size_t x0 = std::min(static_cast<std::size_t>(fx0), w - 1);
  const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double ty = sy - static_cast<double>(y0), tx = sx - static_cast<double>(x0);
  auto px = [&](std::size_t y, std::size_t x) { return static_cast<double>(m[(k * h + y) * w + x]); };
  return (1 - ty) * ((1 - tx) * px(y0, x0) + tx * px(y0, x1)) +
         ty * ((1 - tx) * px(y1, x0) + tx * px(y1, x1));
}

inline double coverage(const drs::Tensor& maps, const drs::LabelMap& gt, double thr) {
  std::size_t objects = 0, hit = 0;
  for (std::size_t y = 0; y < gt.height; ++y)
    for (std::size_t x = 0; x < gt.width; ++x) {
      const auto v = gt(y, x);
      if (v == 0 || v == drs::kIgnoreLabel) continue;
      ++objects;
      if (maps[((v - 1u) * gt.height + y) * gt.width + x] > thr) ++hit;
    }
  return objects ? static_cast<double>(hit) / static_cast<double>(objects) : 0.0;
}

inline drs::LabelMap random_labels(drs::Rng& rng, std::size_t h, std::size_t w,
                                   std::size_t classes, double ignore_rate) {
  drs::LabelMap m(h, w, 0);
  for (auto& v : m.values)
    v = drs::bernoulli(rng, ignore_rate) ? drs::kIgnoreLabel
                                         : static_cast<std::uint8_t>(drs::uniform_index(rng, classes));
  return m;
}

}  // namespace oracle
