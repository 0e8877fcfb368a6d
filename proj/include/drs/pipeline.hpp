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

// End-to-end stages shared by the command-line tool and the acceptance suite:
// classifier -> (refiner) -> localization maps -> pseudo labels -> metrics.

#pragma once

#include <optional>

#include "drs/config.hpp"

namespace drs {

enum class MapMode { raw, drs, refined };

inline std::string to_string(MapMode m) {
  switch (m) {
    case MapMode::raw: return "raw";
    case MapMode::drs: return "drs";
    default: return "refined";
  }
}

inline MapMode parse_map_mode(const std::string& s) {
  if (s == "raw") return MapMode::raw;
  if (s == "drs") return MapMode::drs;
  if (s == "refined") return MapMode::refined;
  throw std::invalid_argument("unknown map mode '" + s + "' (raw|drs|refined)");
}

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

/// First round(fraction * n) samples train, the rest validate.
inline DatasetSplit split_dataset(std::vector<Sample> all, double train_fraction) {
  const auto n_train = std::min(
      all.size(),
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(train_fraction * all.size()))));
  DatasetSplit s;
  s.val.assign(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(n_train)),
               std::make_move_iterator(all.end()));
  all.resize(n_train);
  s.train = std::move(all);
  return s;
}

inline std::vector<std::vector<std::uint8_t>> labels_of(std::span<const Sample> samples) {
  std::vector<std::vector<std::uint8_t>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.labels);
  return out;
}

/// Localization maps [C,h,w] per sample at feature resolution, present classes only.
/// raw bypasses DRS, drs keeps it, refined uses the refiner (clamped to [0,1]).
inline std::vector<Tensor> compute_maps(std::span<const Sample> samples,
                                        const ParameterStore& classifier, const NetworkConfig& cfg,
                                        MapMode mode, const ParameterStore* refiner = nullptr,
                                        std::size_t chunk = 8) {
  if (mode == MapMode::refined && !refiner) {
    throw std::invalid_argument("refined maps need refiner parameters");
  }
  std::vector<Tensor> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t end = std::min(samples.size(), start + chunk);
    const Batch b = stack_batch(samples.subspan(start, end - start));
    Tensor maps;
    if (mode == MapMode::refined) {
      Tape tape(false);
      AttachedParams<float> vars(tape, *refiner, false);
      maps = clamp_unit(refiner_forward(tape.constant(b.images), vars, cfg).value());
      const std::size_t c = maps.dim(1), area = maps.dim(2) * maps.dim(3);
      for (std::size_t i = 0; i < b.present.size(); ++i) {
        for (std::size_t k = 0; k < c; ++k) {
          if (b.present[i][k]) continue;
          std::fill_n(maps.data().begin() + static_cast<std::ptrdiff_t>((i * c + k) * area), area, 0.0f);
        }
      }
    } else {
      maps = classifier_maps(b.images, classifier, cfg, b.present, mode == MapMode::drs);
    }
    const std::size_t per = maps.size() / maps.dim(0);
    for (std::size_t i = 0; i < maps.dim(0); ++i) {
      std::vector<float> one(maps.data().begin() + static_cast<std::ptrdiff_t>(i * per),
                             maps.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
      out.emplace_back(Shape{maps.dim(1), maps.dim(2), maps.dim(3)}, std::move(one));
    }
  }
  return out;
}

inline std::vector<LabelMap> pseudo_labels(std::span<const Sample> samples,
                                           std::span<const Tensor> maps, const CueConfig& cue) {
  if (samples.size() != maps.size()) throw ShapeError("pseudo_labels: sample/map count mismatch");
  std::vector<LabelMap> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    out.push_back(generate_pseudo_label(upsample_bilinear(maps[i], s.height(), s.width()),
                                        s.labels, s.saliency, cue));
  }
  return out;
}

inline MiouResult score_labels(std::span<const Sample> samples, std::span<const LabelMap> labels,
                               std::size_t num_classes) {
  std::vector<LabelMap> gts;
  gts.reserve(samples.size());
  for (const auto& s : samples) gts.push_back(s.gt_mask);
  return miou(labels, gts, num_classes + 1);
}

/// Mean over samples of object_coverage on upsampled maps.
inline double mean_coverage(std::span<const Sample> samples, std::span<const Tensor> maps,
                            double threshold) {
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (auto c = object_coverage(upsample_bilinear(maps[i], s.height(), s.width()), s.gt_mask,
                                 threshold)) {
      total += *c;
      ++counted;
    }
  }
  return counted ? total / static_cast<double>(counted) : 0.0;
}

struct TrainedModels {
  ParameterStore classifier;
  TrainLog classifier_log;
  std::optional<ParameterStore> refiner;
  TrainLog refiner_log;
};

/// Classifier without DRS trained on a separate toy set drawn from its own seed
/// stream. Stands in for a backbone pretrained on a large labeled corpus.
inline ParameterStore pretrain_classifier(const ExperimentConfig& cfg) {
  if (cfg.pretrain_count == 0) throw std::invalid_argument("pretraining disabled (pretrain.count = 0)");
  NetworkConfig net = cfg.net;
  net.drs_flags.fill(false);
  const auto data = gen_toy_dataset(cfg.pretrain_count, cfg.data.classes, cfg.data.side,
                                    cfg.pretrain_data_seed());
  ParameterStore params = init_classifier_params(net, cfg.pretrain_init_seed());
  train_classifier(data, net, cfg.pretrain_schedule(), cfg.aug, params);
  return params;
}

/// Copies every tensor of src whose name and shape also exist in dst.
inline void copy_matching(ParameterStore& dst, const ParameterStore& src) {
  for (const auto& name : src.names()) {
    if (dst.contains(name) && dst.at(name).shape() == src.at(name).shape()) dst.at(name) = src.at(name);
  }
}

/// pretrained, when given, must come from pretrain_classifier(cfg); it is
/// recomputed otherwise.
inline TrainedModels train_pipeline(const ExperimentConfig& cfg, const DatasetSplit& data,
                                    bool with_refiner, const ParameterStore* pretrained = nullptr) {
  TrainedModels m;
  m.classifier = init_classifier_params(cfg.net, cfg.cls_init_seed());
  if (cfg.pretrain_count > 0) {
    if (pretrained) copy_matching(m.classifier, *pretrained);
    else copy_matching(m.classifier, pretrain_classifier(cfg));
  }
  m.classifier_log = train_classifier(data.train, cfg.net, cfg.cls_schedule(), cfg.aug, m.classifier);
  if (with_refiner) {
    m.refiner = cfg.refiner_init == RefinerInit::classifier
                    ? refiner_from_classifier(m.classifier, cfg.net, cfg.ref_init_seed())
                    : init_refiner_params(cfg.net, cfg.ref_init_seed());
    m.refiner_log = train_refiner(data.train, m.classifier, cfg.net, cfg.ref_schedule(), cfg.aug,
                                  *m.refiner);
  }
  return m;
}

struct EvaluationResult {
  double miou = 0.0;
  double accuracy = 0.0;
  double coverage = 0.0;
};

/// Pseudo-label mIoU and coverage on the train split (where labels are produced),
/// classification accuracy on the validation split.
inline EvaluationResult evaluate_models(const ExperimentConfig& cfg, const DatasetSplit& data,
                                        const TrainedModels& models, MapMode mode,
                                        double coverage_threshold = 0.2) {
  EvaluationResult r;
  const auto maps = compute_maps(data.train, models.classifier, cfg.net, mode,
                                 models.refiner ? &*models.refiner : nullptr);
  const auto labels = pseudo_labels(data.train, maps, cfg.cue);
  r.miou = score_labels(data.train, labels, cfg.net.num_classes).mean;
  r.coverage = mean_coverage(data.train, maps, coverage_threshold);
  const auto& eval_set = data.val.empty() ? data.train : data.val;
  r.accuracy = multilabel_accuracy(predict_scores(eval_set, models.classifier, cfg.net),
                                   labels_of(eval_set));
  return r;
}

/// One ablation setting: a name and the config it runs.
struct AblationSetting {
  std::string name;
  ExperimentConfig config;
  bool refine = false;
};

/// Grid spec, one axis per call:
///   delta=1.0,0.9,0.55       constant controller on the configured layers
///   layers=000111,111000     DRS plug-in flags for layer1..layer6
///   controller=learnable,constant
///   refine=off,on
/// A "baseline" row with every DRS site disabled comes first for delta and layers.
inline std::vector<AblationSetting> parse_grid(const std::string& spec, const ExperimentConfig& base) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw ConfigError("grid spec must look like axis=v1,v2,...");
  const std::string axis = detail::trim(spec.substr(0, eq));
  const auto values = detail::split_list(spec.substr(eq + 1));
  if (values.empty()) throw ConfigError("grid spec has no values");
  std::vector<AblationSetting> out;
  auto baseline = [&] {
    AblationSetting s{"baseline", base, false};
    s.config.net.drs_flags.fill(false);
    return s;
  };
  if (axis == "delta") {
    out.push_back(baseline());
    for (const auto& v : values) {
      AblationSetting s{"delta=" + v, base, false};
      s.config.net.drs.mode = ControllerMode::constant;
      s.config.net.drs.delta = detail::parse_number<double>("grid delta", v);
      if (!(s.config.net.drs.delta >= 0.0 && s.config.net.drs.delta <= 1.0)) {
        throw ConfigError("grid delta " + v + " outside [0,1]");
      }
      out.push_back(std::move(s));
    }
  } else if (axis == "layers") {
    out.push_back(baseline());
    for (const auto& v : values) {
      if (v.size() != kStages || v.find_first_not_of("01") != std::string::npos) {
        throw ConfigError("grid layers entry '" + v + "' must be six 0/1 digits");
      }
      AblationSetting s{"layers=" + v, base, false};
      for (std::size_t i = 0; i < kStages; ++i) s.config.net.drs_flags[i] = v[i] == '1';
      out.push_back(std::move(s));
    }
  } else if (axis == "controller") {
    for (const auto& v : values) {
      AblationSetting s{"controller=" + v, base, false};
      try {
        s.config.net.drs.mode = parse_controller_mode(v);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      out.push_back(std::move(s));
    }
  } else if (axis == "refine") {
    for (const auto& v : values) {
      AblationSetting s{"refine=" + v, base, false};
      s.refine = detail::parse_flag("grid refine", v);
      out.push_back(std::move(s));
    }
  } else {
    throw ConfigError("unknown grid axis '" + axis + "'");
  }
  for (auto& s : out) s.config.validate();
  return out;
}

struct AblationRow {
  std::string setting;
  double miou = 0.0;
  double accuracy = 0.0;
};

inline std::vector<AblationRow> run_ablation(const std::vector<AblationSetting>& grid,
                                             const DatasetSplit& data) {
  std::vector<AblationRow> rows;
  // grid settings never touch the pretraining inputs, so one run serves all of them
  std::optional<ParameterStore> pretrained;
  if (!grid.empty() && grid.front().config.pretrain_count > 0) {
    pretrained = pretrain_classifier(grid.front().config);
  }
  for (const auto& s : grid) {
    const auto models = train_pipeline(s.config, data, s.refine, pretrained ? &*pretrained : nullptr);
    const auto mode = s.refine ? MapMode::refined : MapMode::drs;
    const auto r = evaluate_models(s.config, data, models, mode);
    rows.push_back({s.name, r.miou, r.accuracy});
  }
  return rows;
}

inline void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << "setting,miou,accuracy\n";
  for (const auto& r : rows) {
    os << r.setting << ',' << detail::format_double(r.miou) << ','
       << detail::format_double(r.accuracy) << '\n';
  }
}

inline std::vector<AblationRow> read_ablation_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "setting,miou,accuracy") {
    throw FormatError("ablation CSV header missing");
  }
  std::vector<AblationRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c2 = line.rfind(',');
    const auto c1 = line.rfind(',', c2 - 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw FormatError("malformed ablation CSV row: " + line);
    }
    rows.push_back({line.substr(0, c1), std::stod(line.substr(c1 + 1, c2 - c1 - 1)),
                    std::stod(line.substr(c2 + 1))});
  }
  return rows;
}

}  // namespace drs
