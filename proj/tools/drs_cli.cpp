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

// drs_cli: runs the weak-supervision pipeline stage by stage inside one output
// directory.
//
//   gen-data      -> data/
//   train-cls     -> classifier/, classifier_loss.csv
//   train-refine  -> refiner/, refiner_loss.csv          (needs classifier/)
//   dump-cams     -> maps/<mode>/<id>_<class>.{drst,ppm}   (needs checkpoints)
//   gen-labels    -> labels/<mode>/<id>.pgm               (needs maps/<mode>)
//   eval          -> report_<mode>.txt                    (needs labels/<mode>)
//   ablate        -> ablation.csv
//   gradcheck     -> stdout
//
// Exit codes: 0 ok, 1 usage, 2 missing prerequisite stage, 3 numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "drs/dataset_io.hpp"
#include "drs/gradcheck_suite.hpp"
#include "drs/heatmap.hpp"
#include "drs/pipeline.hpp"

namespace fs = std::filesystem;
using namespace drs;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kMissing = 2, kNumerical = 3 };

class MissingPrerequisite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  ExperimentConfig cfg;
  fs::path out;
  MapMode mode = MapMode::drs;
  std::string grid;

  fs::path data_dir() const { return out / "data"; }
  fs::path classifier_dir() const { return out / "classifier"; }
  fs::path refiner_dir() const { return out / "refiner"; }
  fs::path maps_dir() const { return out / "maps" / to_string(mode); }
  fs::path labels_dir() const { return out / "labels" / to_string(mode); }
};

DatasetSplit load_split(const Context& ctx) {
  if (!fs::exists(ctx.data_dir() / "labels.txt")) {
    throw MissingPrerequisite("dataset missing in " + ctx.data_dir().string() + " (run gen-data)");
  }
  auto all = read_dataset(ctx.data_dir());
  for (const auto& s : all) {
    if (s.labels.size() != ctx.cfg.data.classes || s.height() != ctx.cfg.data.side) {
      throw ConfigError("dataset in " + ctx.data_dir().string() + " does not match the config");
    }
  }
  return split_dataset(std::move(all), ctx.cfg.data.train_fraction);
}

ParameterStore load_stage(const fs::path& dir, const std::string& what) {
  if (!fs::exists(dir / "manifest.txt")) throw MissingPrerequisite(what + " checkpoint missing");
  return load_checkpoint(dir);
}

void write_loss_log(const fs::path& path, const TrainLog& log) {
  std::ofstream os(path);
  os << "epoch,loss\n";
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
    os << e + 1 << ',' << detail::format_double(log.epoch_loss[e]) << '\n';
  }
  if (!os) throw FormatError("failed writing " + path.string());
}

void fresh_dir(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
}

std::string map_file(std::size_t index, std::size_t cls) {
  return sample_id(index) + "_" + toy_class_name(cls);
}

std::vector<std::string> report_names(std::size_t classes) {
  std::vector<std::string> names{"background"};
  for (std::size_t k = 0; k < classes; ++k) names.push_back(toy_class_name(k));
  return names;
}

int cmd_gen_data(const Context& ctx) {
  const auto& d = ctx.cfg.data;
  const auto samples = gen_toy_dataset(d.count, d.classes, d.side, ctx.cfg.data_seed());
  fresh_dir(ctx.data_dir());
  write_dataset(ctx.data_dir(), samples,
                {{"seed", std::to_string(ctx.cfg.seed)},
                 {"count", std::to_string(d.count)},
                 {"classes", std::to_string(d.classes)},
                 {"side", std::to_string(d.side)}});
  std::cout << "wrote " << samples.size() << " samples to " << ctx.data_dir().string() << '\n';
  return kOk;
}

int cmd_train_cls(const Context& ctx) {
  const auto split = load_split(ctx);
  const auto models = train_pipeline(ctx.cfg, split, false);
  fresh_dir(ctx.classifier_dir());
  save_checkpoint(ctx.classifier_dir(), models.classifier);
  write_loss_log(ctx.out / "classifier_loss.csv", models.classifier_log);
  std::cout << "classifier loss " << models.classifier_log.epoch_loss.front() << " -> "
            << models.classifier_log.epoch_loss.back() << '\n';
  return kOk;
}

int cmd_train_refine(const Context& ctx) {
  const auto classifier = load_stage(ctx.classifier_dir(), "classifier");
  const auto split = load_split(ctx);
  ParameterStore refiner = ctx.cfg.refiner_init == RefinerInit::classifier
                               ? refiner_from_classifier(classifier, ctx.cfg.net, ctx.cfg.ref_init_seed())
                               : init_refiner_params(ctx.cfg.net, ctx.cfg.ref_init_seed());
  const auto log = train_refiner(split.train, classifier, ctx.cfg.net, ctx.cfg.ref_schedule(),
                                 ctx.cfg.aug, refiner);
  fresh_dir(ctx.refiner_dir());
  save_checkpoint(ctx.refiner_dir(), refiner);
  write_loss_log(ctx.out / "refiner_loss.csv", log);
  std::cout << "refiner loss " << log.epoch_loss.front() << " -> " << log.epoch_loss.back() << '\n';
  return kOk;
}

int cmd_dump_cams(const Context& ctx) {
  const auto classifier = load_stage(ctx.classifier_dir(), "classifier");
  std::optional<ParameterStore> refiner;
  if (ctx.mode == MapMode::refined) refiner = load_stage(ctx.refiner_dir(), "refiner");
  const auto split = load_split(ctx);
  const auto maps = compute_maps(split.train, classifier, ctx.cfg.net, ctx.mode,
                                 refiner ? &*refiner : nullptr);
  fresh_dir(ctx.maps_dir());
  std::size_t written = 0;
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    const auto& s = split.train[i];
    const std::size_t h = s.height(), w = s.width();
    const Tensor up = upsample_bilinear(maps[i], h, w);
    for (std::size_t k = 0; k < s.labels.size(); ++k) {
      if (!s.labels[k]) continue;
      std::vector<float> one(up.data().begin() + static_cast<std::ptrdiff_t>(k * h * w),
                             up.data().begin() + static_cast<std::ptrdiff_t>((k + 1) * h * w));
      const Tensor m(Shape{h, w}, std::move(one));
      save_tensor(ctx.maps_dir() / (map_file(i, k) + ".drst"), m);
      write_ppm(ctx.maps_dir() / (map_file(i, k) + ".ppm"), render_heatmap(m, &s.image));
      ++written;
    }
  }
  std::cout << "wrote " << written << " " << to_string(ctx.mode) << " maps to "
            << ctx.maps_dir().string() << '\n';
  return kOk;
}

int cmd_gen_labels(const Context& ctx) {
  if (!fs::is_directory(ctx.maps_dir())) {
    throw MissingPrerequisite("maps missing in " + ctx.maps_dir().string() + " (run dump-cams --mode " +
                              to_string(ctx.mode) + ")");
  }
  const auto split = load_split(ctx);
  std::vector<Tensor> maps;
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    const auto& s = split.train[i];
    const std::size_t h = s.height(), w = s.width();
    Tensor full(Shape{s.labels.size(), h, w});
    for (std::size_t k = 0; k < s.labels.size(); ++k) {
      if (!s.labels[k]) continue;
      const fs::path file = ctx.maps_dir() / (map_file(i, k) + ".drst");
      if (!fs::exists(file)) throw MissingPrerequisite("map missing: " + file.string());
      const Tensor m = load_tensor(file);
      if (m.shape() != Shape{h, w}) throw FormatError("map " + file.string() + " has the wrong shape");
      std::copy(m.data().begin(), m.data().end(),
                full.data().begin() + static_cast<std::ptrdiff_t>(k * h * w));
    }
    maps.push_back(std::move(full));
  }
  const auto labels = pseudo_labels(split.train, maps, ctx.cfg.cue);
  fresh_dir(ctx.labels_dir());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    write_pgm(ctx.labels_dir() / (sample_id(i) + ".pgm"), labels[i]);
  }
  std::cout << "wrote " << labels.size() << " pseudo labels to " << ctx.labels_dir().string() << '\n';
  return kOk;
}

int cmd_eval(const Context& ctx) {
  if (!fs::is_directory(ctx.labels_dir())) {
    throw MissingPrerequisite("labels missing in " + ctx.labels_dir().string() +
                              " (run gen-labels --mode " + to_string(ctx.mode) + ")");
  }
  const auto split = load_split(ctx);
  std::vector<LabelMap> labels;
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    const fs::path file = ctx.labels_dir() / (sample_id(i) + ".pgm");
    if (!fs::exists(file)) throw MissingPrerequisite("label missing: " + file.string());
    labels.push_back(read_pgm(file));
  }
  const auto result = score_labels(split.train, labels, ctx.cfg.data.classes);
  const fs::path report = ctx.out / ("report_" + to_string(ctx.mode) + ".txt");
  std::ofstream os(report);
  write_miou_report(os, result, report_names(ctx.cfg.data.classes));
  if (!os) throw FormatError("failed writing " + report.string());
  write_miou_report(std::cout, result, report_names(ctx.cfg.data.classes));
  return kOk;
}

int cmd_ablate(const Context& ctx) {
  if (ctx.grid.empty()) throw ConfigError("ablate needs --grid, e.g. --grid delta=0.9,0.55");
  const auto grid = parse_grid(ctx.grid, ctx.cfg);
  const auto split = load_split(ctx);
  const auto rows = run_ablation(grid, split);
  const fs::path csv = ctx.out / "ablation.csv";
  std::ofstream os(csv);
  write_ablation_csv(os, rows);
  if (!os) throw FormatError("failed writing " + csv.string());
  write_ablation_csv(std::cout, rows);
  return kOk;
}

int cmd_gradcheck() {
  bool ok = true;
  for (const auto& r : run_gradcheck_suite(standard_gradcheck_cases())) {
    std::cout << std::left << std::setw(28) << r.name << ' ' << std::scientific
              << std::setprecision(3) << r.max_rel_error << ' ' << (r.passed ? "PASS" : "FAIL")
              << '\n';
    ok = ok && r.passed;
  }
  return ok ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discriminative region suppression: toy weak-supervision pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out, mode = "drs", grid;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "key = value experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", out, "output directory (overrides the config)");
  app.add_option("--mode", mode, "map source")->check(CLI::IsMember({"raw", "drs", "refined"}));
  app.add_option("--grid", grid, "ablation axis, e.g. delta=0.9,0.55 or layers=000111,111000");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"gen-data", "render the toy dataset"},
      {"train-cls", "train the classifier"},
      {"train-refine", "train the refinement network"},
      {"dump-cams", "export localization maps and heatmaps"},
      {"gen-labels", "turn maps into pseudo labels"},
      {"eval", "score pseudo labels against ground truth"},
      {"ablate", "run the pipeline over a grid of settings"},
      {"gradcheck", "finite-difference check of every differentiable op"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    if (command == "gradcheck") return cmd_gradcheck();

    Context ctx;
    if (!config_path.empty()) ctx.cfg = load_config(config_path);
    if (seed) ctx.cfg.seed = *seed;
    if (!out.empty()) ctx.cfg.out = out;
    ctx.cfg.validate();
    ctx.out = ctx.cfg.out;
    ctx.mode = parse_map_mode(mode);
    ctx.grid = grid;

    if (command == "gen-data") return cmd_gen_data(ctx);
    if (command == "train-cls") return cmd_train_cls(ctx);
    if (command == "train-refine") return cmd_train_refine(ctx);
    if (command == "dump-cams") return cmd_dump_cams(ctx);
    if (command == "gen-labels") return cmd_gen_labels(ctx);
    if (command == "eval") return cmd_eval(ctx);
    return cmd_ablate(ctx);
  } catch (const MissingPrerequisite& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMissing;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMissing;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}
