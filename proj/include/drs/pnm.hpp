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

// Binary portable pixmap (P6) and graymap (P5) I/O, 8-bit only.

#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "drs/tensor_io.hpp"

namespace drs {

/// Row-major 2-D array.
template <typename T>
struct Grid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> values;

  Grid() = default;
  Grid(std::size_t h, std::size_t w, T fill = T{}) : height(h), width(w), values(h * w, fill) {}

  T& operator()(std::size_t y, std::size_t x) { return values[y * width + x]; }
  const T& operator()(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  std::size_t size() const noexcept { return values.size(); }

  friend bool operator==(const Grid&, const Grid&) = default;
};

using LabelMap = Grid<std::uint8_t>;
using ScalarMap = Grid<float>;

struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> rgb;  // interleaved

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

inline std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

inline float from_byte(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }

namespace detail {

inline std::size_t read_header_int(std::istream& is) {
  int c = is.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = is.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = is.get();
  }
  if (c == EOF || !std::isdigit(c)) throw FormatError("malformed PNM header");
  std::size_t v = 0;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + static_cast<std::size_t>(c - '0');
    if (v > 1u << 24) throw FormatError("PNM header value too large");
    c = is.get();
  }
  if (c == EOF || !std::isspace(c)) throw FormatError("malformed PNM header");
  return v;
}

struct PnmHeader {
  std::size_t width, height, maxval;
};

inline PnmHeader read_pnm_header(std::istream& is, char kind) {
  char magic[2] = {0, 0};
  if (!is.read(magic, 2) || magic[0] != 'P' || magic[1] != kind) {
    throw FormatError(std::string("expected P") + kind + " magic");
  }
  PnmHeader h{};
  h.width = read_header_int(is);
  h.height = read_header_int(is);
  h.maxval = read_header_int(is);
  if (h.width == 0 || h.height == 0) throw FormatError("PNM image has zero size");
  if (h.maxval == 0 || h.maxval > 255) {
    throw FormatError("unsupported PNM maxval " + std::to_string(h.maxval));
  }
  return h;
}

inline void read_payload(std::istream& is, std::vector<std::uint8_t>& out) {
  if (!is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()))) {
    throw FormatError("PNM payload truncated");
  }
}

}  // namespace detail

inline void write_ppm(std::ostream& os, const RgbImage& img) {
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.rgb.data()),
           static_cast<std::streamsize>(img.rgb.size()));
}

inline RgbImage read_ppm(std::istream& is) {
  const auto h = detail::read_pnm_header(is, '6');
  RgbImage img{h.height, h.width, std::vector<std::uint8_t>(h.width * h.height * 3)};
  detail::read_payload(is, img.rgb);
  if (h.maxval != 255) {
    for (auto& b : img.rgb) b = static_cast<std::uint8_t>(std::lround(b * 255.0 / h.maxval));
  }
  return img;
}

inline void write_pgm(std::ostream& os, const LabelMap& map) {
  os << "P5\n" << map.width << ' ' << map.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(map.values.data()),
           static_cast<std::streamsize>(map.values.size()));
}

/// Raw gray levels. `maxval` receives the header's maximum value.
inline LabelMap read_pgm(std::istream& is, std::size_t* maxval = nullptr) {
  const auto h = detail::read_pnm_header(is, '5');
  LabelMap map(h.height, h.width);
  detail::read_payload(is, map.values);
  if (maxval) *maxval = h.maxval;
  return map;
}

inline void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_ppm(os, img);
}

inline RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_ppm(is);
}

inline void write_pgm(const std::filesystem::path& path, const LabelMap& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_pgm(os, map);
}

inline LabelMap read_pgm(const std::filesystem::path& path, std::size_t* maxval = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_pgm(is, maxval);
}

/// Grayscale map scaled to [0,1] by the file's maxval.
inline ScalarMap load_saliency(const std::filesystem::path& path, std::size_t expected_height = 0,
                               std::size_t expected_width = 0) {
  std::size_t maxval = 255;
  const LabelMap raw = read_pgm(path, &maxval);
  if (expected_height && (raw.height != expected_height || raw.width != expected_width)) {
    throw FormatError("saliency " + path.string() + " is " + std::to_string(raw.height) + "x" +
                      std::to_string(raw.width) + ", image is " +
                      std::to_string(expected_height) + "x" + std::to_string(expected_width));
  }
  ScalarMap out(raw.height, raw.width);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.values[i] = maxval == 255 ? from_byte(raw.values[i])
                                  : static_cast<float>(raw.values[i]) / static_cast<float>(maxval);
  }
  return out;
}

inline LabelMap quantize(const ScalarMap& map) {
  LabelMap out(map.height, map.width);
  for (std::size_t i = 0; i < map.size(); ++i) out.values[i] = to_byte(map.values[i]);
  return out;
}

/// [3,H,W] tensor in [0,1] -> interleaved 8-bit RGB.
inline RgbImage to_rgb(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw ShapeError("to_rgb expects [3,H,W], got " + to_string(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2);
  RgbImage img{h, w, std::vector<std::uint8_t>(h * w * 3)};
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < h * w; ++i) img.rgb[i * 3 + c] = to_byte(image[c * h * w + i]);
  }
  return img;
}

inline Tensor from_rgb(const RgbImage& img) {
  Tensor t(Shape{3, img.height, img.width});
  const std::size_t area = img.height * img.width;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < area; ++i) t[c * area + i] = from_byte(img.rgb[i * 3 + c]);
  }
  return t;
}

}  // namespace drs
