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

// Six-stage mini-VGG classifier with optional DRS after each stage's ReLU, the
// DRS-free refinement network, and class localization maps.

#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>

#include "drs/rng.hpp"
#include "drs/suppression.hpp"
#include "drs/tensor_io.hpp"

namespace drs {

inline constexpr std::size_t kStages = 6;

struct NetworkConfig {
  std::array<std::size_t, kStages> widths{16, 16, 32, 32, 48, 48};
  std::array<bool, kStages> drs_flags{};
  DrsSettings drs;
  std::size_t num_classes = 4;
  std::size_t input_side = 64;
  std::size_t pooled_stages = 1;  // 2x2 max-pool after layer1..layer<pooled_stages>

  bool any_drs() const {
    return std::any_of(drs_flags.begin(), drs_flags.end(), [](bool b) { return b; });
  }

  void validate() const {
    if (num_classes == 0) throw std::invalid_argument("network: class count must be >= 1");
    if (pooled_stages > kStages) throw std::invalid_argument("network: pooled_stages must be <= 6");
    for (std::size_t w : widths) {
      if (w == 0) throw std::invalid_argument("network: stage widths must be positive");
    }
    if (drs.mode == ControllerMode::constant && !(drs.delta >= 0.0 && drs.delta <= 1.0)) {
      throw std::invalid_argument("network: DRS delta must lie in [0,1]");
    }
  }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Spatial side of F for a given input side.
inline std::size_t output_side(std::size_t input_side, std::size_t pooled_stages) {
  std::size_t s = input_side;
  for (std::size_t i = 0; i < pooled_stages; ++i) s /= 2;
  return s;
}

inline std::string stage_name(std::size_t i) { return "layer" + std::to_string(i + 1); }

/// Named parameters in a fixed order, each tagged with the site it belongs to.
template <typename T>
class BasicParameterStore {
 public:
  void add(std::string name, std::string site, BasicTensor<T> value) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    index_[name] = tensors_.size();
    names_.push_back(std::move(name));
    sites_.push_back(std::move(site));
    tensors_.push_back(std::move(value));
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t size() const noexcept { return tensors_.size(); }

  const BasicTensor<T>& at(const std::string& name) const { return tensors_[lookup(name)]; }
  BasicTensor<T>& at(const std::string& name) { return tensors_[lookup(name)]; }

  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<std::string>& sites() const noexcept { return sites_; }
  std::span<BasicTensor<T>> tensors() noexcept { return tensors_; }
  std::span<const BasicTensor<T>> tensors() const noexcept { return tensors_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  template <typename U>
  BasicParameterStore<U> cast() const {
    BasicParameterStore<U> out;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      out.add(names_[i], sites_[i], tensors_[i].template cast<U>());
    }
    return out;
  }

  friend bool operator==(const BasicParameterStore& a, const BasicParameterStore& b) {
    return a.names_ == b.names_ && a.sites_ == b.sites_ && a.tensors_ == b.tensors_;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
  }

  std::vector<std::string> names_;
  std::vector<std::string> sites_;
  std::vector<BasicTensor<T>> tensors_;
  std::map<std::string, std::size_t> index_;
};

using ParameterStore = BasicParameterStore<float>;

/// Parameters registered on a tape, addressable by name.
template <typename T>
class AttachedParams {
 public:
  AttachedParams(BasicTape<T>& tape, const BasicParameterStore<T>& store, bool trainable) {
    for (std::size_t i = 0; i < store.size(); ++i) {
      const auto& name = store.names()[i];
      vars_.emplace(name, tape.leaf(store.tensors()[i], trainable));
      order_.push_back(name);
    }
  }

  const BasicVar<T>& operator[](const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return vars_.count(name) != 0; }

  /// Gradients in store order.
  std::vector<BasicTensor<T>> grads(const BasicTape<T>& tape) const {
    std::vector<BasicTensor<T>> out;
    out.reserve(order_.size());
    for (const auto& name : order_) out.push_back(tape.grad(vars_.at(name)));
    return out;
  }

 private:
  std::map<std::string, BasicVar<T>> vars_;
  std::vector<std::string> order_;
};

namespace detail {

template <typename T>
BasicTensor<T> fan_in_uniform(Shape shape, std::size_t fan_in, double gain, std::uint64_t seed) {
  Rng rng(seed);
  const double bound = std::sqrt(gain / static_cast<double>(fan_in));
  BasicTensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(uniform(rng, -bound, bound));
  return t;
}

// Conv layers feeding a ReLU use gain 6 (He uniform); the linear head uses gain 3.
template <typename T>
void add_backbone_params(BasicParameterStore<T>& store, const NetworkConfig& cfg,
                         std::uint64_t seed) {
  std::size_t in = 3;
  for (std::size_t i = 0; i < kStages; ++i) {
    const std::string site = stage_name(i);
    const std::size_t out = cfg.widths[i];
    store.add(site + ".weight", site,
              fan_in_uniform<T>(Shape{out, in, 3, 3}, in * 9, 6.0,
                                derive_seed(seed, site + ".weight")));
    store.add(site + ".bias", site, BasicTensor<T>(Shape{out}, T{0}));
    in = out;
  }
  store.add("head.weight", "head",
            fan_in_uniform<T>(Shape{cfg.num_classes, in, 1, 1}, in, 3.0,
                              derive_seed(seed, std::string("head.weight"))));
  store.add("head.bias", "head", BasicTensor<T>(Shape{cfg.num_classes}, T{0}));
}

}  // namespace detail

/// Backbone, head and one K x K controller per learnable DRS site.
/// Each tensor draws from its own seed stream, so DRS settings never change the
/// backbone initialization.
template <typename T = float>
BasicParameterStore<T> init_classifier_params(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  BasicParameterStore<T> store;
  detail::add_backbone_params(store, cfg, seed);
  if (cfg.drs.mode == ControllerMode::learnable) {
    for (std::size_t i = 0; i < kStages; ++i) {
      if (!cfg.drs_flags[i]) continue;
      const std::string site = stage_name(i) + ".drs";
      const std::size_t k = cfg.widths[i];
      // zero FC: every channel starts at g = 0.5. A random FC over unnormalized GAP
      // saturates the sigmoid and wipes out whole channels before training starts.
      store.add(site + ".weight", site, BasicTensor<T>(Shape{k, k}, T{0}));
      store.add(site + ".bias", site, BasicTensor<T>(Shape{k}, T{0}));
    }
  }
  return store;
}

template <typename T = float>
BasicParameterStore<T> init_refiner_params(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  BasicParameterStore<T> store;
  detail::add_backbone_params(store, cfg, seed);
  return store;
}

/// Refiner with the trained classifier's backbone and a zeroed head.
/// Backbone activations run large once the DRS caps are gone, so a random head
/// starts far from the [0,1] targets; a zero head starts at the all-zero map.
template <typename T>
BasicParameterStore<T> refiner_from_classifier(const BasicParameterStore<T>& classifier,
                                               const NetworkConfig& cfg, std::uint64_t seed) {
  BasicParameterStore<T> store = init_refiner_params<T>(cfg, seed);
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& name = store.names()[i];
    if (store.sites()[i] == "head") {
      for (auto& v : store.at(name).data()) v = T{0};
    } else {
      store.at(name) = classifier.at(name);
    }
  }
  return store;
}

namespace detail {

template <typename T>
BasicVar<T> backbone_forward(const BasicVar<T>& image, const AttachedParams<T>& params,
                             const NetworkConfig& cfg, bool use_drs) {
  detail::require_rank(image, 4, "network input");
  if (image.dim(1) != 3) {
    throw ShapeError("network expects 3 input channels, got " + to_string(image.shape()));
  }
  const std::size_t min_side = std::size_t{1} << cfg.pooled_stages;
  if (image.dim(2) < min_side || image.dim(3) < min_side) {
    throw ShapeError("network input " + to_string(image.shape()) + " smaller than " +
                     std::to_string(min_side) + " pixels");
  }
  // per-channel standardization, [0,1] -> roughly zero mean, unit scale
  auto& tape = *image.tape();
  BasicVar<T> x = mul(add(image, tape.constant(BasicTensor<T>(Shape{1, 3, 1, 1}, T(-0.5)))),
                      tape.constant(BasicTensor<T>(Shape{1, 3, 1, 1}, T(4))));
  for (std::size_t i = 0; i < kStages; ++i) {
    const std::string site = stage_name(i);
    x = relu(conv2d(x, params[site + ".weight"], params[site + ".bias"], 1, 1));
    if (use_drs && cfg.drs_flags[i]) {
      const auto drs_cfg = cfg.drs.mode == ControllerMode::learnable
                               ? DrsConfig<T>::learnable(params[site + ".drs.weight"],
                                                         params[site + ".drs.bias"])
                               : DrsConfig<T>::constant(cfg.drs.delta);
      x = drs_forward(x, drs_cfg);
    }
    if (i < cfg.pooled_stages) x = maxpool2d(x, 2, 2);
  }
  return conv2d(x, params["head.weight"], params["head.bias"], 1, 0);
}

}  // namespace detail

template <typename T>
struct ClassifierOutput {
  BasicVar<T> features;  // F: [N,C,h,w]
  BasicVar<T> scores;    // P = sigmoid(GAP(F)): [N,C]
};

/// `use_drs = false` evaluates the same weights with every DRS site bypassed.
template <typename T>
ClassifierOutput<T> classifier_forward(const BasicVar<T>& image, const AttachedParams<T>& params,
                                       const NetworkConfig& cfg, bool use_drs = true) {
  auto features = detail::backbone_forward(image, params, cfg, use_drs);
  if (features.dim(1) != cfg.num_classes) {
    throw ShapeError("head produces " + std::to_string(features.dim(1)) +
                     " channels, config expects " + std::to_string(cfg.num_classes));
  }
  auto scores = reshape(sigmoid(global_avg_pool(features)),
                        Shape{features.dim(0), features.dim(1)});
  return {features, scores};
}

/// Raw (unactivated) refined maps N.
template <typename T>
BasicVar<T> refiner_forward(const BasicVar<T>& image, const AttachedParams<T>& params,
                            const NetworkConfig& cfg) {
  return detail::backbone_forward(image, params, cfg, false);
}

/// Export clamp to [0,1].
inline Tensor clamp_unit(Tensor t) {
  for (auto& v : t.data()) v = std::clamp(v, 0.0f, 1.0f);
  return t;
}

/// M^c = relu(F^c) / max(F^c) for present classes; absent classes and maps with
/// no positive value are all zeros. `present` is [N][C]; empty means all classes.
inline Tensor localization_maps(const Tensor& features,
                                const std::vector<std::vector<std::uint8_t>>& present = {}) {
  if (features.rank() != 4) {
    throw ShapeError("localization_maps expects [N,C,h,w], got " + to_string(features.shape()));
  }
  const std::size_t n = features.dim(0), c = features.dim(1);
  const std::size_t area = features.dim(2) * features.dim(3);
  if (!present.empty() && present.size() != n) {
    throw ShapeError("localization_maps: label rows do not match batch");
  }
  Tensor out(features.shape(), 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) {
      if (!present.empty() && !present[i].at(k)) continue;
      const float* f = features.data().data() + (i * c + k) * area;
      const float peak = *std::max_element(f, f + area);
      if (!(peak > 0.0f)) continue;
      float* m = out.data().data() + (i * c + k) * area;
      for (std::size_t p = 0; p < area; ++p) m[p] = f[p] > 0.0f ? f[p] / peak : 0.0f;
    }
  }
  return out;
}

// Checkpoint directory: one <name>.drst per tensor plus manifest.txt with lines
// "<name> <shape> <site>".

inline void save_checkpoint(const std::filesystem::path& dir, const ParameterStore& store) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& name = store.names()[i];
    save_tensor(dir / (name + ".drst"), store.tensors()[i]);
    manifest << name << ' ' << to_string(store.tensors()[i].shape()) << ' '
             << store.sites()[i] << '\n';
  }
  if (!manifest) throw FormatError("failed writing checkpoint manifest in " + dir.string());
}

inline ParameterStore load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw FormatError("checkpoint manifest missing in " + dir.string());
  ParameterStore store;
  std::string name, shape, site;
  while (manifest >> name >> shape >> site) {
    Tensor t = load_tensor(dir / (name + ".drst"));
    if (to_string(t.shape()) != shape) {
      throw FormatError("checkpoint tensor " + name + " has shape " + to_string(t.shape()) +
                        ", manifest says " + shape);
    }
    store.add(name, site, std::move(t));
  }
  if (store.size() == 0) throw FormatError("checkpoint in " + dir.string() + " is empty");
  return store;
}

}  // namespace drs
