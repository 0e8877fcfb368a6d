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

// Pseudo segmentation labels from localization maps and saliency, plus metrics.

#pragma once

#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "drs/data.hpp"

namespace drs {

struct CueConfig {
  double alpha = 0.2;   // object cue: map value above alpha
  double beta = 0.06;   // background cue: saliency below beta

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
    if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0,1)");
  }

  friend bool operator==(const CueConfig&, const CueConfig&) = default;
};

/// Bilinear upsampling with half-pixel centers (align_corners = false).
/// m: [C,h,w] -> [C,H,W].
inline Tensor upsample_bilinear(const Tensor& m, std::size_t out_h, std::size_t out_w) {
  if (m.rank() != 3) throw ShapeError("upsample_bilinear expects [C,h,w], got " + to_string(m.shape()));
  const std::size_t c = m.dim(0), h = m.dim(1), w = m.dim(2);
  if (out_h < h || out_w < w) {
    throw std::invalid_argument("upsample_bilinear: downscaling " + to_string(m.shape()) +
                                " to " + std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  Tensor out(Shape{c, out_h, out_w});
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  auto source = [](std::size_t dst, double scale, std::size_t n, std::size_t& i0,
                   std::size_t& i1, double& frac) {
    const double src = std::max(0.0, (static_cast<double>(dst) + 0.5) * scale - 0.5);
    i0 = std::min(static_cast<std::size_t>(src), n - 1);
    i1 = std::min(i0 + 1, n - 1);
    frac = src - static_cast<double>(i0);
  };
  for (std::size_t y = 0; y < out_h; ++y) {
    std::size_t y0, y1;
    double fy;
    source(y, sy, h, y0, y1, fy);
    for (std::size_t x = 0; x < out_w; ++x) {
      std::size_t x0, x1;
      double fx;
      source(x, sx, w, x0, x1, fx);
      for (std::size_t k = 0; k < c; ++k) {
        const float* p = m.data().data() + k * h * w;
        const double top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
        const double bottom = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
        out[(k * out_h + y) * out_w + x] = static_cast<float>(top * (1.0 - fy) + bottom * fy);
      }
    }
  }
  return out;
}

/// Per pixel, in order: (1) the strongest present class whose map exceeds alpha
/// (lowest index on ties) -> class + 1; (2) saliency below beta -> 0;
/// (3) otherwise 255 (ignore). maps: [C,H,W] at image resolution.
inline LabelMap generate_pseudo_label(const Tensor& maps, const std::vector<std::uint8_t>& present,
                                      const ScalarMap& saliency, const CueConfig& cue) {
  cue.validate();
  if (maps.rank() != 3 || maps.dim(0) != present.size()) {
    throw ShapeError("generate_pseudo_label: maps " + to_string(maps.shape()) + " vs " +
                     std::to_string(present.size()) + " classes");
  }
  const std::size_t c = maps.dim(0), h = maps.dim(1), w = maps.dim(2);
  if (saliency.height != h || saliency.width != w) {
    throw ShapeError("generate_pseudo_label: saliency geometry does not match maps");
  }
  LabelMap label(h, w, kIgnoreLabel);
  const float alpha = static_cast<float>(cue.alpha);
  const float beta = static_cast<float>(cue.beta);
  for (std::size_t i = 0; i < h * w; ++i) {
    std::optional<std::size_t> best;
    float best_value = 0.0f;
    for (std::size_t k = 0; k < c; ++k) {
      if (!present[k]) continue;
      const float v = maps[k * h * w + i];
      if (v > alpha && (!best || v > best_value)) {
        best = k;
        best_value = v;
      }
    }
    if (best) {
      label.values[i] = static_cast<std::uint8_t>(*best + 1);
    } else if (saliency.values[i] < beta) {
      label.values[i] = 0;
    }
  }
  return label;
}

struct MiouResult {
  std::vector<std::uint64_t> intersection;
  std::vector<std::uint64_t> union_;
  std::vector<std::optional<double>> iou;  // empty when the class never appears
  double mean = 0.0;
};

/// Dataset-level IoU per class (accumulated counts), ignoring gt == 255 pixels.
/// Mean is over classes with a non-empty union.
inline MiouResult miou(std::span<const LabelMap> preds, std::span<const LabelMap> gts,
                       std::size_t num_classes) {
  if (preds.size() != gts.size()) throw ShapeError("miou: prediction/gt count mismatch");
  MiouResult r;
  r.intersection.assign(num_classes, 0);
  r.union_.assign(num_classes, 0);
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto& p = preds[s];
    const auto& g = gts[s];
    if (p.height != g.height || p.width != g.width) {
      throw ShapeError("miou: geometry mismatch at sample " + std::to_string(s));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const std::uint8_t gv = g.values[i];
      if (gv == kIgnoreLabel) continue;
      const std::uint8_t pv = p.values[i];
      if (pv == gv) {
        if (gv < num_classes) {
          ++r.intersection[gv];
          ++r.union_[gv];
        }
      } else {
        if (gv < num_classes) ++r.union_[gv];
        if (pv < num_classes) ++r.union_[pv];
      }
    }
  }
  double total = 0.0;
  std::size_t counted = 0;
  r.iou.resize(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (r.union_[k] == 0) continue;
    r.iou[k] = static_cast<double>(r.intersection[k]) / static_cast<double>(r.union_[k]);
    total += *r.iou[k];
    ++counted;
  }
  r.mean = counted ? total / static_cast<double>(counted) : 0.0;
  return r;
}

/// Fraction of ground-truth object pixels whose own class map exceeds threshold.
/// maps: [C,H,W]; returns nullopt when the mask has no object pixels.
inline std::optional<double> object_coverage(const Tensor& maps, const LabelMap& gt,
                                             double threshold) {
  if (maps.rank() != 3 || maps.dim(1) != gt.height || maps.dim(2) != gt.width) {
    throw ShapeError("object_coverage: geometry mismatch");
  }
  const std::size_t c = maps.dim(0), area = gt.size();
  std::size_t objects = 0, covered = 0;
  for (std::size_t i = 0; i < area; ++i) {
    const std::uint8_t v = gt.values[i];
    if (v == 0 || v == kIgnoreLabel || v > c) continue;
    ++objects;
    if (maps[(v - 1u) * area + i] > threshold) ++covered;
  }
  if (objects == 0) return std::nullopt;
  return static_cast<double>(covered) / static_cast<double>(objects);
}

/// Plain-text table followed by a machine-readable "miou=<value>" line.
inline void write_miou_report(std::ostream& os, const MiouResult& r,
                              const std::vector<std::string>& class_names) {
  os << std::left << std::setw(14) << "class" << "iou\n";
  for (std::size_t k = 0; k < r.iou.size(); ++k) {
    const std::string name = k < class_names.size() ? class_names[k] : "class" + std::to_string(k);
    os << std::setw(14) << name;
    if (r.iou[k]) {
      os << std::fixed << std::setprecision(6) << *r.iou[k] << '\n';
    } else {
      os << "n/a\n";
    }
  }
  std::ostringstream value;
  value << std::setprecision(17) << r.mean;
  os << "miou=" << value.str() << '\n';
}

}  // namespace drs
