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

// Flat key=value experiment configuration with section prefixes, e.g.
//
//   seed = 2026
//   data.count = 200
//   net.drs_layers = 1,1,1,1,1,1
//   cls.decay_epochs = 5,10
//
// Blank lines and lines starting with '#' are skipped.

#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "drs/labeling.hpp"
#include "drs/train.hpp"

namespace drs {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DataParams {
  std::size_t count = 200;
  std::size_t classes = 4;
  std::size_t side = 64;
  double train_fraction = 0.8;

  friend bool operator==(const DataParams&, const DataParams&) = default;
};

enum class RefinerInit { classifier, scratch };

struct ExperimentConfig {
  std::uint64_t seed = 2026;
  DataParams data;
  NetworkConfig net;
  AugmentConfig aug = AugmentConfig::for_side(64);
  TrainSchedule cls;
  TrainSchedule ref;
  RefinerInit refiner_init = RefinerInit::classifier;
  // the backbone is first trained without DRS on a disjoint toy set of
  // pretrain_count samples (0 skips it), then fine-tuned with DRS under cls
  std::size_t pretrain_count = 400;
  TrainSchedule pre;
  CueConfig cue;
  std::string out = "run";

  ExperimentConfig() {
    net.drs_flags.fill(true);
    net.drs = {ControllerMode::constant, 0.55};
    cls.optimizer = OptimizerKind::sgd;
    pre.optimizer = OptimizerKind::sgd;
    pre.lr = 1e-2;
    cls.lr = 1e-3;
    ref.optimizer = OptimizerKind::adam;
    ref.lr = 1e-4;
  }

  // Independent seed streams for each stage.
  std::uint64_t data_seed() const { return derive_seed(seed, std::string("data")); }
  std::uint64_t cls_init_seed() const { return derive_seed(seed, std::string("cls.init")); }
  std::uint64_t ref_init_seed() const { return derive_seed(seed, std::string("ref.init")); }
  std::uint64_t pretrain_data_seed() const { return derive_seed(seed, std::string("pretrain.data")); }
  std::uint64_t pretrain_init_seed() const { return derive_seed(seed, std::string("pretrain.init")); }

  TrainSchedule cls_schedule() const {
    TrainSchedule s = cls;
    s.seed = derive_seed(seed, std::string("cls.train"));
    return s;
  }
  TrainSchedule pretrain_schedule() const {
    TrainSchedule s = pre;
    s.seed = derive_seed(seed, std::string("pretrain.train"));
    return s;
  }
  TrainSchedule ref_schedule() const {
    TrainSchedule s = ref;
    s.seed = derive_seed(seed, std::string("ref.train"));
    return s;
  }

  void validate() const {
    net.validate();
    aug.validate();
    pre.validate();
    cls.validate();
    ref.validate();
    cue.validate();
    if (data.count == 0 || data.classes == 0 || data.classes > kMaxToyClasses || data.side < 32) {
      throw ConfigError("data: need count >= 1, 1 <= classes <= 8, side >= 32");
    }
    if (!(data.train_fraction > 0.0 && data.train_fraction <= 1.0)) {
      throw ConfigError("data.train_fraction must lie in (0,1]");
    }
    if (net.num_classes != data.classes) {
      throw ConfigError("net.classes must equal data.classes");
    }
    if (aug.crop_side < (std::size_t{1} << net.pooled_stages)) {
      throw ConfigError("aug.crop too small for net.pooled_stages");
    }
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream iss(s);
  while (std::getline(iss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename N>
N parse_number(const std::string& key, const std::string& text) {
  N value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

inline bool parse_flag(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "on") return true;
  if (text == "0" || text == "false" || text == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + text + "'");
}

inline std::string format_double(double v) {
  std::ostringstream oss;
  oss << std::setprecision(17) << v;
  return oss.str();
}

template <typename Range, typename F>
std::string join(const Range& r, F&& fmt) {
  std::string out;
  bool first = true;
  for (const auto& v : r) {
    if (!first) out += ',';
    out += fmt(v);
    first = false;
  }
  return out;
}

inline OptimizerKind parse_optimizer(const std::string& key, const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("config key '" + key + "': unknown optimizer '" + s + "'");
}

inline void apply_schedule_key(TrainSchedule& s, const std::string& key, const std::string& field,
                               const std::string& value) {
  if (field == "optimizer") {
    s.optimizer = parse_optimizer(key, value);
  } else if (field == "lr") {
    s.lr = parse_number<double>(key, value);
  } else if (field == "decay_epochs") {
    s.decay_epochs.clear();
    for (const auto& v : split_list(value)) s.decay_epochs.push_back(parse_number<std::size_t>(key, v));
  } else if (field == "decay_factor") {
    s.decay_factor = parse_number<double>(key, value);
  } else if (field == "batch") {
    s.batch_size = parse_number<std::size_t>(key, value);
  } else if (field == "epochs") {
    s.epochs = parse_number<std::size_t>(key, value);
  } else if (field == "momentum") {
    s.momentum = parse_number<double>(key, value);
  } else if (field == "weight_decay") {
    s.weight_decay = parse_number<double>(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace detail

inline void apply_config_key(ExperimentConfig& cfg, const std::string& key,
                             const std::string& value) {
  using namespace detail;
  const auto dot = key.find('.');
  const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
  const std::string field = dot == std::string::npos ? key : key.substr(dot + 1);
  if (section.empty()) {
    if (field == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, value);
    } else if (field == "out") {
      cfg.out = value;
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  } else if (section == "data") {
    if (field == "count") cfg.data.count = parse_number<std::size_t>(key, value);
    else if (field == "classes") cfg.data.classes = parse_number<std::size_t>(key, value);
    else if (field == "side") cfg.data.side = parse_number<std::size_t>(key, value);
    else if (field == "train_fraction") cfg.data.train_fraction = parse_number<double>(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  } else if (section == "net") {
    if (field == "widths") {
      const auto items = split_list(value);
      if (items.size() != kStages) throw ConfigError("net.widths needs 6 entries");
      for (std::size_t i = 0; i < kStages; ++i) cfg.net.widths[i] = parse_number<std::size_t>(key, items[i]);
    } else if (field == "drs_layers") {
      const auto items = split_list(value);
      if (items.size() != kStages) throw ConfigError("net.drs_layers needs 6 entries");
      for (std::size_t i = 0; i < kStages; ++i) cfg.net.drs_flags[i] = parse_flag(key, items[i]);
    } else if (field == "controller") {
      try {
        cfg.net.drs.mode = parse_controller_mode(value);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    } else if (field == "delta") {
      cfg.net.drs.delta = parse_number<double>(key, value);
    } else if (field == "classes") {
      cfg.net.num_classes = parse_number<std::size_t>(key, value);
    } else if (field == "pooled_stages") {
      cfg.net.pooled_stages = parse_number<std::size_t>(key, value);
    } else if (field == "input_side") {
      cfg.net.input_side = parse_number<std::size_t>(key, value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  } else if (section == "aug") {
    if (field == "crop") cfg.aug.crop_side = parse_number<std::size_t>(key, value);
    else if (field == "flip_prob") cfg.aug.flip_prob = parse_number<double>(key, value);
    else if (field == "brightness") cfg.aug.brightness = parse_number<double>(key, value);
    else if (field == "contrast") cfg.aug.contrast = parse_number<double>(key, value);
    else if (field == "saturation") cfg.aug.saturation = parse_number<double>(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  } else if (section == "cls") {
    apply_schedule_key(cfg.cls, key, field, value);
  } else if (section == "ref") {
    if (field == "init") {
      if (value == "classifier") cfg.refiner_init = RefinerInit::classifier;
      else if (value == "scratch") cfg.refiner_init = RefinerInit::scratch;
      else throw ConfigError("ref.init must be 'classifier' or 'scratch'");
    } else {
      apply_schedule_key(cfg.ref, key, field, value);
    }
  } else if (section == "pretrain") {
    if (field == "count") cfg.pretrain_count = parse_number<std::size_t>(key, value);
    else apply_schedule_key(cfg.pre, key, field, value);
  } else if (section == "cue") {
    if (field == "alpha") cfg.cue.alpha = parse_number<double>(key, value);
    else if (field == "beta") cfg.cue.beta = parse_number<double>(key, value);
    else throw ConfigError("unknown config key '" + key + "'");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Parses on top of the defaults, so a config only needs the keys it changes.
/// Setting data.side also rescales aug.crop unless aug.crop is given explicitly.
inline ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig cfg;
  std::map<std::string, std::string> entries;
  std::vector<std::string> order;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    if (entries.count(key)) throw ConfigError("duplicate config key '" + key + "'");
    entries[key] = detail::trim(line.substr(eq + 1));
    order.push_back(key);
  }
  for (const auto& key : order) apply_config_key(cfg, key, entries[key]);
  if (entries.count("data.side")) {
    if (!entries.count("aug.crop")) cfg.aug.crop_side = AugmentConfig::for_side(cfg.data.side).crop_side;
    if (!entries.count("net.input_side")) cfg.net.input_side = cfg.data.side;
  }
  if (entries.count("data.classes") && !entries.count("net.classes")) {
    cfg.net.num_classes = cfg.data.classes;
  }
  return cfg;
}

inline ExperimentConfig parse_config(const std::string& text) {
  std::istringstream iss(text);
  return parse_config(iss);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  return parse_config(is);
}

inline std::string format_config(const ExperimentConfig& cfg) {
  using detail::format_double;
  using detail::join;
  std::ostringstream os;
  auto num = [](auto v) { return std::to_string(v); };
  auto schedule = [&](const char* p, const TrainSchedule& s, bool with_init) {
    os << p << ".optimizer = " << (s.optimizer == OptimizerKind::sgd ? "sgd" : "adam") << '\n'
       << p << ".lr = " << format_double(s.lr) << '\n'
       << p << ".decay_epochs = " << join(s.decay_epochs, num) << '\n'
       << p << ".decay_factor = " << format_double(s.decay_factor) << '\n'
       << p << ".batch = " << s.batch_size << '\n'
       << p << ".epochs = " << s.epochs << '\n'
       << p << ".momentum = " << format_double(s.momentum) << '\n'
       << p << ".weight_decay = " << format_double(s.weight_decay) << '\n';
    if (with_init) {
      os << p << ".init = " << (cfg.refiner_init == RefinerInit::classifier ? "classifier" : "scratch")
         << '\n';
    }
  };
  os << "seed = " << cfg.seed << '\n'
     << "out = " << cfg.out << '\n'
     << "data.count = " << cfg.data.count << '\n'
     << "data.classes = " << cfg.data.classes << '\n'
     << "data.side = " << cfg.data.side << '\n'
     << "data.train_fraction = " << format_double(cfg.data.train_fraction) << '\n'
     << "net.widths = " << join(cfg.net.widths, num) << '\n'
     << "net.drs_layers = " << join(cfg.net.drs_flags, [](bool b) { return std::string(b ? "1" : "0"); }) << '\n'
     << "net.controller = " << to_string(cfg.net.drs.mode) << '\n'
     << "net.delta = " << format_double(cfg.net.drs.delta) << '\n'
     << "net.classes = " << cfg.net.num_classes << '\n'
     << "net.pooled_stages = " << cfg.net.pooled_stages << '\n'
     << "net.input_side = " << cfg.net.input_side << '\n'
     << "aug.crop = " << cfg.aug.crop_side << '\n'
     << "aug.flip_prob = " << format_double(cfg.aug.flip_prob) << '\n'
     << "aug.brightness = " << format_double(cfg.aug.brightness) << '\n'
     << "aug.contrast = " << format_double(cfg.aug.contrast) << '\n'
     << "aug.saturation = " << format_double(cfg.aug.saturation) << '\n';
  os << "pretrain.count = " << cfg.pretrain_count << '\n';
  schedule("pretrain", cfg.pre, false);
  schedule("cls", cfg.cls, false);
  schedule("ref", cfg.ref, true);
  os << "cue.alpha = " << format_double(cfg.cue.alpha) << '\n'
     << "cue.beta = " << format_double(cfg.cue.beta) << '\n';
  return os.str();
}

}  // namespace drs
