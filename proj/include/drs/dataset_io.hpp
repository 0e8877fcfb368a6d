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

// Dataset directory layout:
//   images/NNNN.ppm  masks/NNNN.pgm  saliency/NNNN.pgm
//   labels.txt       one line per sample: "NNNN <C-bit multi-hot>"
//   manifest.txt     key=value generation parameters

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "drs/data.hpp"

namespace drs {

namespace fs = std::filesystem;

inline std::string sample_id(std::size_t index) {
  std::ostringstream oss;
  oss << std::setw(4) << std::setfill('0') << index;
  return oss.str();
}

inline std::string format_labels(const std::vector<std::uint8_t>& labels) {
  std::string bits;
  for (auto b : labels) bits.push_back(b ? '1' : '0');
  return bits;
}

inline void write_dataset(const fs::path& dir, const std::vector<Sample>& samples,
                          const std::map<std::string, std::string>& manifest) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  fs::create_directories(dir / "saliency");
  std::ofstream labels(dir / "labels.txt");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto id = sample_id(i);
    const auto& s = samples[i];
    write_ppm(dir / "images" / (id + ".ppm"), to_rgb(s.image));
    write_pgm(dir / "masks" / (id + ".pgm"), s.gt_mask);
    write_pgm(dir / "saliency" / (id + ".pgm"), quantize(s.saliency));
    labels << id << ' ' << format_labels(s.labels) << '\n';
  }
  std::ofstream man(dir / "manifest.txt");
  for (const auto& [k, v] : manifest) man << k << '=' << v << '\n';
  if (!labels || !man) throw FormatError("failed writing dataset to " + dir.string());
}

inline std::vector<Sample> read_dataset(const fs::path& dir) {
  std::ifstream labels(dir / "labels.txt");
  if (!labels) throw FormatError("dataset missing labels.txt in " + dir.string());
  std::vector<Sample> out;
  std::string line;
  while (std::getline(labels, line)) {
    if (line.empty()) continue;
    std::istringstream iss(line);
    std::string id, bits;
    if (!(iss >> id >> bits)) throw FormatError("malformed labels.txt line: " + line);
    Sample s;
    s.image = from_rgb(read_ppm(dir / "images" / (id + ".ppm")));
    s.gt_mask = read_pgm(dir / "masks" / (id + ".pgm"));
    s.saliency = load_saliency(dir / "saliency" / (id + ".pgm"), s.height(), s.width());
    if (s.gt_mask.height != s.height() || s.gt_mask.width != s.width()) {
      throw FormatError("mask " + id + " does not match its image size");
    }
    for (char b : bits) {
      if (b != '0' && b != '1') throw FormatError("malformed label bits for " + id);
      s.labels.push_back(b == '1' ? 1 : 0);
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw FormatError("dataset in " + dir.string() + " is empty");
  return out;
}

}  // namespace drs
