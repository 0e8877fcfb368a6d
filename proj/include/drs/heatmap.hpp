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

#include "drs/colormap_table.hpp"
#include "drs/pnm.hpp"

namespace drs {

inline std::array<std::uint8_t, 3> heat_color(float v) {
  return kHeatmapColors[to_byte(v)];
}

/// Color-maps a single [H,W] map (values in [0,1]). With `image` ([3,H,W]) the
/// colors are blended 50/50 over it.
inline RgbImage render_heatmap(const Tensor& map, const Tensor* image = nullptr) {
  if (map.rank() != 2) throw ShapeError("render_heatmap expects [H,W], got " + to_string(map.shape()));
  const std::size_t h = map.dim(0), w = map.dim(1);
  if (image && (image->rank() != 3 || image->dim(1) != h || image->dim(2) != w)) {
    throw ShapeError("render_heatmap: image does not match map geometry");
  }
  RgbImage out{h, w, std::vector<std::uint8_t>(h * w * 3)};
  for (std::size_t i = 0; i < h * w; ++i) {
    const auto color = heat_color(map[i]);
    for (std::size_t c = 0; c < 3; ++c) {
      if (image) {
        const int blended = (color[c] + to_byte((*image)[c * h * w + i]) + 1) / 2;
        out.rgb[i * 3 + c] = static_cast<std::uint8_t>(blended);
      } else {
        out.rgb[i * 3 + c] = color[c];
      }
    }
  }
  return out;
}

}  // namespace drs
