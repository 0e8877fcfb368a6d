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

// Synthetic weakly-labelled dataset and the training-time augmentation pipeline.

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "drs/pnm.hpp"
#include "drs/rng.hpp"

namespace drs {

inline constexpr std::uint8_t kIgnoreLabel = 255;
inline constexpr std::size_t kMaxToyClasses = 8;

/// One image with its image-level labels. Mask values: 0 background, c+1 for
/// class c, 255 ignore.
struct Sample {
  Tensor image{Shape{3, 1, 1}};
  std::vector<std::uint8_t> labels;
  LabelMap gt_mask;
  ScalarMap saliency;

  std::size_t height() const { return image.dim(1); }
  std::size_t width() const { return image.dim(2); }

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Multi-hot presence vector derived from a mask.
inline std::vector<std::uint8_t> labels_from_mask(const LabelMap& mask, std::size_t classes) {
  std::vector<std::uint8_t> labels(classes, 0);
  for (std::uint8_t v : mask.values) {
    if (v != 0 && v != kIgnoreLabel && v <= classes) labels[v - 1] = 1;
  }
  return labels;
}

struct AugmentConfig {
  std::size_t crop_side = 51;
  double flip_prob = 0.5;
  double brightness = 0.2;
  double contrast = 0.2;
  double saturation = 0.2;

  /// Crop at 80% of the generated side.
  static AugmentConfig for_side(std::size_t side) {
    AugmentConfig cfg;
    cfg.crop_side = side * 4 / 5;
    return cfg;
  }

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (crop_side == 0) throw std::invalid_argument("augment: crop side must be positive");
    if (!prob(flip_prob)) throw std::invalid_argument("augment: flip probability outside [0,1]");
    if (!prob(brightness) || !prob(contrast) || !prob(saturation)) {
      throw std::invalid_argument("augment: jitter amplitudes must lie in [0,1]");
    }
  }

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

namespace detail {

struct ClassLook {
  std::array<float, 3> color;
};

inline constexpr std::array<ClassLook, kMaxToyClasses> kClassLooks{{
    {{0.90f, 0.15f, 0.10f}},  // red circle
    {{0.10f, 0.80f, 0.20f}},  // green square
    {{0.15f, 0.25f, 0.95f}},  // blue triangle
    {{0.95f, 0.85f, 0.10f}},  // yellow diamond
    {{0.85f, 0.10f, 0.85f}},  // magenta cross
    {{0.10f, 0.85f, 0.90f}},  // cyan ring
    {{0.95f, 0.55f, 0.05f}},  // orange ellipse
    {{0.50f, 0.15f, 0.75f}},  // purple hexagon
}};

// Shape membership in normalized object coordinates u, v in [-1, 1].
inline bool inside_shape(std::size_t cls, double u, double v) {
  const double au = std::abs(u), av = std::abs(v);
  switch (cls) {
    case 0: return u * u + v * v <= 1.0;
    case 1: return std::max(au, av) <= 0.85;
    case 2: return v >= -0.9 && v <= 0.9 && au <= (v + 0.9) / 1.8;
    case 3: return au + av <= 1.0;
    case 4: return (au <= 0.38 && av <= 0.95) || (av <= 0.38 && au <= 0.95);
    case 5: {
      const double r2 = u * u + v * v;
      return r2 <= 1.0 && r2 >= 0.3;
    }
    case 6: return u * u + (v / 0.6) * (v / 0.6) <= 1.0;
    default: return av <= 0.87 && au * 0.87 + av * 0.5 <= 0.87;
  }
}

inline constexpr double kHeadRadius = 0.3;  // in object radii
inline constexpr double kBodyTint = 0.1;
inline constexpr std::array<double, 3> kBodyColor{0.80, 0.75, 0.70};

struct PlacedObject {
  std::size_t cls;
  double cx, cy, radius;
  double head_u, head_v;  // location of the distinctive patch
};

inline ScalarMap box_blur(const ScalarMap& in, std::size_t radius) {
  ScalarMap out(in.height, in.width);
  const auto r = static_cast<std::ptrdiff_t>(radius);
  for (std::size_t y = 0; y < in.height; ++y) {
    for (std::size_t x = 0; x < in.width; ++x) {
      double acc = 0.0;
      int count = 0;
      for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
        for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
          const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
          const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
          if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(in.height) ||
              xx >= static_cast<std::ptrdiff_t>(in.width)) {
            continue;
          }
          acc += in(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
          ++count;
        }
      }
      out(y, x) = static_cast<float>(acc / count);
    }
  }
  return out;
}

inline Sample render_toy_sample(std::size_t classes, std::size_t side, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t wanted = classes == 1 ? 1 : 1 + uniform_index(rng, 2);

  std::vector<PlacedObject> objects;
  std::vector<std::size_t> pool(classes);
  for (std::size_t c = 0; c < classes; ++c) pool[c] = c;
  const double s = static_cast<double>(side);
  for (std::size_t i = 0; i < wanted; ++i) {
    const std::size_t pick = uniform_index(rng, pool.size());
    PlacedObject obj{pool[pick], 0, 0, 0, 0, 0};
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      obj.radius = wanted == 1 ? uniform(rng, 0.26 * s, 0.36 * s) : uniform(rng, 0.17 * s, 0.23 * s);
      obj.cx = uniform(rng, obj.radius, s - obj.radius);
      obj.cy = uniform(rng, obj.radius, s - obj.radius);
      placed = true;
      for (const auto& other : objects) {
        const double d = std::hypot(obj.cx - other.cx, obj.cy - other.cy);
        if (d < obj.radius + other.radius + 2.0) placed = false;
      }
    }
    if (!placed) break;
    const double angle = uniform(rng, 0.0, 6.283185307179586);
    obj.head_u = 0.6 * std::cos(angle);
    obj.head_v = 0.6 * std::sin(angle);
    objects.push_back(obj);
  }

  Sample sample;
  sample.image = Tensor(Shape{3, side, side});
  sample.gt_mask = LabelMap(side, side, 0);
  const std::size_t area = side * side;

  // textured background
  const double base = uniform(rng, 0.15, 0.35);
  std::array<double, 3> tint{};
  for (auto& t : tint) t = uniform(rng, -0.05, 0.05);
  const double fx = uniform(rng, 0.05, 0.2), fy = uniform(rng, 0.05, 0.2);
  const double phase = uniform(rng, 0.0, 6.283185307179586);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double wave = 0.1 * std::sin(fx * x + fy * y + phase);
      const double noise = uniform(rng, -0.05, 0.05);
      for (std::size_t c = 0; c < 3; ++c) {
        sample.image[c * area + y * side + x] = static_cast<float>(base + wave + noise + tint[c]);
      }
    }
  }

  // objects: a weakly tinted striped body and a small saturated head that carries
  // most of the class evidence
  for (const auto& obj : objects) {
    const auto& color = kClassLooks[obj.cls].color;
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        const double u = (x + 0.5 - obj.cx) / obj.radius;
        const double v = (y + 0.5 - obj.cy) / obj.radius;
        if (!inside_shape(obj.cls, u, v)) continue;
        sample.gt_mask(y, x) = static_cast<std::uint8_t>(obj.cls + 1);
        const bool head = std::hypot(u - obj.head_u, v - obj.head_v) <= kHeadRadius;
        const bool stripe = ((x + y) / 2) % 2 == 0;
        const double texture = (stripe ? 0.08 : -0.08) + uniform(rng, -0.03, 0.03);
        for (std::size_t c = 0; c < 3; ++c) {
          const double value = head ? (stripe ? color[c] : 1.0)
                                    : kBodyTint * color[c] + (1.0 - kBodyTint) * kBodyColor[c] + texture;
          sample.image[c * area + y * side + x] = static_cast<float>(value);
        }
      }
    }
  }
  for (auto& v : sample.image.data()) v = from_byte(to_byte(v));

  // object pixels touching a different label become ignore
  LabelMap marked = sample.gt_mask;
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const std::uint8_t v = sample.gt_mask(y, x);
      if (v == 0) continue;
      const bool edge = (y > 0 && sample.gt_mask(y - 1, x) != v) ||
                        (y + 1 < side && sample.gt_mask(y + 1, x) != v) ||
                        (x > 0 && sample.gt_mask(y, x - 1) != v) ||
                        (x + 1 < side && sample.gt_mask(y, x + 1) != v);
      if (edge) marked(y, x) = kIgnoreLabel;
    }
  }
  sample.gt_mask = std::move(marked);
  sample.labels = labels_from_mask(sample.gt_mask, classes);

  // oracle saliency: smoothed foreground indicator plus noise, 8-bit quantized
  ScalarMap fg(side, side, 0.0f);
  for (std::size_t i = 0; i < area; ++i) fg.values[i] = sample.gt_mask.values[i] != 0 ? 1.0f : 0.0f;
  sample.saliency = box_blur(fg, 1);
  for (auto& v : sample.saliency.values) {
    v = from_byte(to_byte(static_cast<float>(v + uniform(rng, -0.1, 0.1))));
  }
  return sample;
}

}  // namespace detail

inline std::string toy_class_name(std::size_t cls) {
  static constexpr std::array<const char*, kMaxToyClasses> names{
      "circle", "square", "triangle", "diamond", "cross", "ring", "ellipse", "hexagon"};
  if (cls >= names.size()) throw std::out_of_range("toy class index out of range");
  return names[cls];
}

/// Probability that a given class appears in a generated image.
inline double toy_class_presence_probability(std::size_t classes) {
  return classes == 1 ? 1.0 : 1.5 / static_cast<double>(classes);
}

/// Sample i is rendered from derive_seed(seed, i), so samples are independent.
inline std::vector<Sample> gen_toy_dataset(std::size_t count, std::size_t classes,
                                           std::size_t side, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("gen_toy_dataset: count must be positive");
  if (classes == 0 || classes > kMaxToyClasses) {
    throw std::invalid_argument("gen_toy_dataset: classes must be in [1, 8]");
  }
  if (side < 32) throw std::invalid_argument("gen_toy_dataset: side must be >= 32");
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(detail::render_toy_sample(classes, side, derive_seed(seed, i)));
  }
  return out;
}

namespace detail {

// Reflect-pad index into [0, n).
inline std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * n - 2);
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < static_cast<std::ptrdiff_t>(n) ? i : period - i);
}

}  // namespace detail

/// Random crop + horizontal flip shared by image, mask and saliency; color jitter on
/// the image only. Labels are recomputed from the cropped mask.
inline Sample augment(const Sample& s, const AugmentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const std::size_t h = s.height(), w = s.width();
  const std::size_t crop = cfg.crop_side;
  // Smaller images are reflection-padded, centered.
  const std::ptrdiff_t pad_y = h < crop ? static_cast<std::ptrdiff_t>((crop - h) / 2) : 0;
  const std::ptrdiff_t pad_x = w < crop ? static_cast<std::ptrdiff_t>((crop - w) / 2) : 0;
  const std::size_t oy = h > crop ? uniform_index(rng, h - crop + 1) : 0;
  const std::size_t ox = w > crop ? uniform_index(rng, w - crop + 1) : 0;
  const bool flip = bernoulli(rng, cfg.flip_prob);
  const double brightness = 1.0 + uniform(rng, -cfg.brightness, cfg.brightness);
  const double contrast = 1.0 + uniform(rng, -cfg.contrast, cfg.contrast);
  const double saturation = 1.0 + uniform(rng, -cfg.saturation, cfg.saturation);

  Sample out;
  out.image = Tensor(Shape{3, crop, crop});
  out.gt_mask = LabelMap(crop, crop);
  out.saliency = ScalarMap(crop, crop);
  const std::size_t in_area = h * w, area = crop * crop;
  for (std::size_t y = 0; y < crop; ++y) {
    for (std::size_t x = 0; x < crop; ++x) {
      const std::size_t xx = flip ? crop - 1 - x : x;
      const std::size_t sy =
          detail::reflect(static_cast<std::ptrdiff_t>(oy + y) - pad_y, h);
      const std::size_t sx =
          detail::reflect(static_cast<std::ptrdiff_t>(ox + xx) - pad_x, w);
      for (std::size_t c = 0; c < 3; ++c) {
        out.image[c * area + y * crop + x] = s.image[c * in_area + sy * w + sx];
      }
      out.gt_mask(y, x) = s.gt_mask(sy, sx);
      out.saliency(y, x) = s.saliency(sy, sx);
    }
  }

  if (cfg.brightness > 0 || cfg.contrast > 0 || cfg.saturation > 0) {
    auto& img = out.image;
    for (auto& v : img.data()) v = static_cast<float>(v * brightness);
    double mean = 0.0;
    for (std::size_t i = 0; i < area; ++i) {
      mean += 0.299 * img[i] + 0.587 * img[area + i] + 0.114 * img[2 * area + i];
    }
    mean /= static_cast<double>(area);
    for (auto& v : img.data()) v = static_cast<float>((v - mean) * contrast + mean);
    for (std::size_t i = 0; i < area; ++i) {
      const double gray = 0.299 * img[i] + 0.587 * img[area + i] + 0.114 * img[2 * area + i];
      for (std::size_t c = 0; c < 3; ++c) {
        float& v = img[c * area + i];
        v = static_cast<float>(gray + (v - gray) * saturation);
      }
    }
    for (auto& v : img.data()) v = std::clamp(v, 0.0f, 1.0f);
  }
  out.labels = labels_from_mask(out.gt_mask, s.labels.size());
  return out;
}

}  // namespace drs
