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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "drs/dataset_io.hpp"
#include "drs/labeling.hpp"

namespace fs = std::filesystem;
using namespace drs;

namespace {

const char* kTinyConfig =
    "data.count = 10\n"
    "data.classes = 2\n"
    "data.side = 32\n"
    "net.widths = 4,4,6,6,8,8\n"
    "pretrain.count = 6\n"
    "cls.lr = 0.01\n"
    "cls.epochs = 3\n"
    "cls.decay_epochs = 2\n"
    "cls.batch = 4\n"
    "ref.lr = 0.001\n"
    "ref.epochs = 2\n"
    "ref.decay_epochs = 1\n"
    "ref.batch = 4\n";

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(DRS_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream oss;
  oss << is.rdbuf();
  return oss.str();
}

std::size_t count_files(const fs::path& dir, const std::string& ext = "") {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && (ext.empty() || e.path().extension() == ext)) ++n;
  }
  return n;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream is(p);
  std::size_t n = 0;
  for (std::string line; std::getline(is, line);) ++n;
  return n;
}

// Fresh scratch directory holding the tiny config.
class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("drs_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "tiny.cfg") << kTinyConfig;
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string flags(const fs::path& out) const {
    return "--config " + (dir_ / "tiny.cfg").string() + " --out " + out.string();
  }
  std::string flags() const { return flags(dir_ / "run"); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("gen-data --bogus").code, 1);
  EXPECT_EQ(run("dump-cams --mode cam " + flags()).code, 1);
  EXPECT_EQ(run("gen-data --config " + (dir_ / "absent.cfg").string()).code, 1);
  EXPECT_EQ(run("gen-data --seed notanumber " + flags()).code, 1);
  std::ofstream(dir_ / "bad.cfg") << "net.mystery = 3\n";
  EXPECT_EQ(run("gen-data --config " + (dir_ / "bad.cfg").string()).code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(CliTest, StageOrderingIsEnforced) {
  const auto no_data = run("train-cls " + flags());
  EXPECT_EQ(no_data.code, 2);
  EXPECT_NE(no_data.output.find("dataset missing"), std::string::npos);

  ASSERT_EQ(run("gen-data " + flags()).code, 0);
  const auto refine = run("train-refine " + flags());
  EXPECT_EQ(refine.code, 2);
  EXPECT_NE(refine.output.find("classifier checkpoint missing"), std::string::npos);
  EXPECT_EQ(run("dump-cams " + flags()).code, 2);
  EXPECT_EQ(run("gen-labels " + flags()).code, 2);
  EXPECT_EQ(run("eval " + flags()).code, 2);
  EXPECT_EQ(run("ablate --grid delta=0.5,x " + flags()).code, 1);
  EXPECT_EQ(run("ablate " + flags()).code, 1);
}

TEST_F(CliTest, GenDataLayoutAndDeterminism) {
  const fs::path a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(run("gen-data " + flags(a)).code, 0);
  ASSERT_EQ(run("gen-data " + flags(b)).code, 0);
  for (const char* sub : {"images", "masks", "saliency"}) {
    EXPECT_EQ(count_files(a / "data" / sub), 10u) << sub;
  }
  EXPECT_EQ(count_lines(a / "data" / "labels.txt"), 10u);
  for (const auto& e : fs::recursive_directory_iterator(a / "data")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
  }
  EXPECT_NE(slurp(a / "data" / "manifest.txt").find("seed=2026"), std::string::npos);

  // labels.txt agrees with the classes present in each mask
  std::ifstream labels(a / "data" / "labels.txt");
  std::string id, bits;
  while (labels >> id >> bits) {
    const auto mask = read_pgm(a / "data" / "masks" / (id + ".pgm"));
    for (std::size_t k = 0; k < bits.size(); ++k) {
      const bool present = std::count(mask.values.begin(), mask.values.end(), k + 1) > 0;
      EXPECT_EQ(bits[k] == '1', present) << id << " class " << k;
    }
  }

  const fs::path c = dir_ / "c";
  ASSERT_EQ(run("gen-data --seed 99 " + flags(c)).code, 0);
  EXPECT_NE(slurp(a / "data" / "images" / "0000.ppm"), slurp(c / "data" / "images" / "0000.ppm"));
}

TEST_F(CliTest, FullPipelineIsBitDeterministic) {
  const std::vector<std::string> stages{"gen-data", "train-cls", "train-refine"};
  for (const fs::path& out : {dir_ / "a", dir_ / "b"}) {
    for (const auto& s : stages) ASSERT_EQ(run(s + " " + flags(out)).code, 0) << s;
    for (const char* mode : {"raw", "drs", "refined"}) {
      for (const char* s : {"dump-cams", "gen-labels", "eval"}) {
        const auto r = run(std::string(s) + " --mode " + mode + " " + flags(out));
        ASSERT_EQ(r.code, 0) << s << " " << mode << ": " << r.output;
      }
    }
  }
  const fs::path a = dir_ / "a";
  EXPECT_EQ(count_lines(a / "classifier_loss.csv"), 1u + 3u);
  EXPECT_EQ(count_lines(a / "refiner_loss.csv"), 1u + 2u);

  // one tensor and one heatmap per (train sample, present class)
  const auto samples = read_dataset(a / "data");
  std::size_t present = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    for (auto l : samples[i].labels) present += l;
  }
  EXPECT_EQ(count_files(a / "maps" / "drs", ".ppm"), present);
  EXPECT_EQ(count_files(a / "maps" / "drs", ".drst"), present);
  EXPECT_EQ(count_files(a / "labels" / "drs", ".pgm"), 8u);
  EXPECT_NE(slurp(a / "report_drs.txt").find("miou="), std::string::npos);

  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(dir_ / "b" / rel)) << rel;
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / rel)) << rel;
    ++compared;
  }
  EXPECT_GT(compared, 50u);
}

TEST_F(CliTest, LabelsFromPerfectAndEmptyMaps) {
  const fs::path out = dir_ / "run";
  ASSERT_EQ(run("gen-data " + flags(out)).code, 0);
  const auto samples = read_dataset(out / "data");
  const char* names[] = {"circle", "square"};

  // gt-derived maps
  fs::create_directories(out / "maps" / "drs");
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& s = samples[i];
    for (std::size_t k = 0; k < 2; ++k) {
      if (!s.labels[k]) continue;
      Tensor m(Shape{32, 32});
      for (std::size_t p = 0; p < m.size(); ++p) m[p] = s.gt_mask.values[p] == k + 1 ? 1.0f : 0.0f;
      save_tensor(out / "maps" / "drs" / (sample_id(i) + "_" + names[k] + ".drst"), m);
    }
  }
  ASSERT_EQ(run("gen-labels " + flags(out)).code, 0);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto label = read_pgm(out / "labels" / "drs" / (sample_id(i) + ".pgm"));
    for (std::size_t p = 0; p < label.size(); ++p) {
      const auto g = samples[i].gt_mask.values[p];
      if (label.values[p] != kIgnoreLabel && g != kIgnoreLabel) {
        ASSERT_EQ(label.values[p], g) << "sample " << i << " pixel " << p;
      }
    }
  }

  // all-zero maps leave only background and ignore
  for (const auto& e : fs::directory_iterator(out / "maps" / "drs")) {
    save_tensor(e.path(), Tensor(Shape{32, 32}));
  }
  ASSERT_EQ(run("gen-labels " + flags(out)).code, 0);
  for (std::size_t i = 0; i < 8; ++i) {
    for (auto v : read_pgm(out / "labels" / "drs" / (sample_id(i) + ".pgm")).values) {
      ASSERT_TRUE(v == 0 || v == kIgnoreLabel);
    }
  }
  const auto eval = run("eval " + flags(out));
  ASSERT_EQ(eval.code, 0);
  EXPECT_NE(eval.output.find("miou="), std::string::npos);

  // a missing map file is a missing prerequisite
  fs::remove(fs::directory_iterator(out / "maps" / "drs")->path());
  EXPECT_EQ(run("gen-labels " + flags(out)).code, 2);
}

TEST_F(CliTest, AblationIdentityRow) {
  ASSERT_EQ(run("gen-data " + flags()).code, 0);
  ASSERT_EQ(run("ablate --grid delta=1.0 " + flags()).code, 0);
  std::ifstream csv(dir_ / "run" / "ablation.csv");
  std::string header, base, one;
  std::getline(csv, header);
  std::getline(csv, base);
  std::getline(csv, one);
  EXPECT_EQ(header, "setting,miou,accuracy");
  ASSERT_EQ(base.rfind("baseline,", 0), 0u);
  ASSERT_EQ(one.rfind("delta=1.0,", 0), 0u);
  EXPECT_EQ(base.substr(base.find(',')), one.substr(one.find(',')));
}

TEST_F(CliTest, GradcheckPasses) {
  const auto r = run("gradcheck");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(r.output.find("FAIL"), std::string::npos);
  EXPECT_NE(r.output.find("drs/learnable"), std::string::npos);
}
