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

#include <algorithm>

#include "drs/network.hpp"
#include "oracles.hpp"

using namespace drs;

namespace {

NetworkConfig small_config(std::size_t pooled = 2) {
  NetworkConfig cfg;
  cfg.widths = {4, 4, 6, 6, 8, 8};
  cfg.num_classes = 3;
  cfg.input_side = 16;
  cfg.pooled_stages = pooled;
  return cfg;
}

Tensor forward_features(const ParameterStore& store, const NetworkConfig& cfg, const Tensor& image,
                        bool use_drs = true) {
  Tape tape(false);
  AttachedParams<float> params(tape, store, false);
  return classifier_forward(tape.constant(image), params, cfg, use_drs).features.value();
}

}  // namespace

TEST(Network, OutputGeometry) {
  EXPECT_EQ(output_side(64, 4), 4u);
  EXPECT_EQ(output_side(64, 2), 16u);
  EXPECT_EQ(output_side(64, 1), 32u);

  Rng rng(1);
  for (std::size_t pooled : {0u, 1u, 2u, 4u}) {
    auto cfg = small_config(pooled);
    const auto store = init_classifier_params(cfg, 3);
    const Tensor image = oracle::random_tensor<float>(rng, Shape{2, 3, 16, 16}, 0.0, 1.0);
    const Tensor f = forward_features(store, cfg, image);
    EXPECT_EQ(f.shape(), (Shape{2, 3, output_side(16, pooled), output_side(16, pooled)}));
  }
}

TEST(Network, ScoresAreSigmoidOfPooledFeatures) {
  auto cfg = small_config();
  const auto store = init_classifier_params(cfg, 4);
  Rng rng(2);
  const Tensor image = oracle::random_tensor<float>(rng, Shape{1, 3, 16, 16}, 0.0, 1.0);
  Tape tape(false);
  AttachedParams<float> params(tape, store, false);
  const auto out = classifier_forward(tape.constant(image), params, cfg);
  const auto& f = out.features.value();
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 16; ++i) mean += f[c * 16 + i];
    EXPECT_NEAR(out.scores.value()[c], 1.0 / (1.0 + std::exp(-mean / 16.0)), 1e-6);
  }
}

TEST(Network, InitIsDeterministicAndSeeded) {
  const auto cfg = small_config();
  EXPECT_EQ(init_classifier_params(cfg, 9), init_classifier_params(cfg, 9));
  EXPECT_FALSE(init_classifier_params(cfg, 9) == init_classifier_params(cfg, 10));
}

TEST(Network, ControllerParametersOnlyForLearnableSites) {
  auto cfg = small_config();
  cfg.drs_flags = {false, false, false, true, true, true};
  cfg.drs.mode = ControllerMode::constant;
  const auto constant = init_classifier_params(cfg, 1);
  EXPECT_FALSE(constant.contains("layer4.drs.weight"));

  cfg.drs.mode = ControllerMode::learnable;
  const auto learnable = init_classifier_params(cfg, 1);
  EXPECT_FALSE(learnable.contains("layer3.drs.weight"));
  ASSERT_TRUE(learnable.contains("layer5.drs.weight"));
  EXPECT_EQ(learnable.at("layer5.drs.weight").shape(), (Shape{8, 8}));
  // controllers start at g = sigmoid(0) = 0.5 for every channel
  EXPECT_EQ(learnable.at("layer5.drs.weight"), Tensor(Shape{8, 8}));
  EXPECT_EQ(learnable.at("layer5.drs.bias"), Tensor(Shape{8}));
  EXPECT_EQ(learnable.parameter_count() - constant.parameter_count(),
            (6 * 6 + 6) + (8 * 8 + 8) + (8 * 8 + 8));
  // backbone tensors do not depend on the controller choice
  EXPECT_EQ(learnable.at("layer2.weight"), constant.at("layer2.weight"));
}

TEST(Network, ParameterCount) {
  const auto cfg = small_config();
  const auto store = init_classifier_params(cfg, 1);
  std::size_t expected = 0, in = 3;
  for (std::size_t w : cfg.widths) {
    expected += w * in * 9 + w;
    in = w;
  }
  expected += 3 * in + 3;
  EXPECT_EQ(store.parameter_count(), expected);
}

TEST(Network, DeltaOneMatchesNoDrs) {
  auto cfg = small_config();
  cfg.drs_flags.fill(true);
  cfg.drs.delta = 1.0;
  const auto store = init_classifier_params(cfg, 5);
  Rng rng(3);
  const Tensor image = oracle::random_tensor<float>(rng, Shape{2, 3, 16, 16}, 0.0, 1.0);
  EXPECT_EQ(forward_features(store, cfg, image, true), forward_features(store, cfg, image, false));
}

TEST(Network, BypassIgnoresDrsSites) {
  auto with = small_config();
  with.drs_flags.fill(true);
  with.drs.delta = 0.3;
  auto without = with;
  without.drs_flags.fill(false);
  const auto store = init_classifier_params(with, 6);
  Rng rng(4);
  const Tensor image = oracle::random_tensor<float>(rng, Shape{1, 3, 16, 16}, 0.0, 1.0);
  EXPECT_EQ(forward_features(store, with, image, false), forward_features(store, without, image));
  EXPECT_FALSE(forward_features(store, with, image, true) == forward_features(store, without, image));
}

TEST(Network, GradientsReachEveryParameter) {
  auto cfg = small_config();
  cfg.drs_flags.fill(true);
  cfg.drs.mode = ControllerMode::learnable;
  const auto store = init_classifier_params(cfg, 7);
  Rng rng(5);
  Tape tape;
  AttachedParams<float> params(tape, store, true);
  const auto out = classifier_forward(
      tape.constant(oracle::random_tensor<float>(rng, Shape{2, 3, 16, 16}, 0.0, 1.0)), params, cfg);
  Tensor target(Shape{2, 3}, std::vector<float>{1, 0, 1, 0, 1, 0});
  tape.backward(bce_loss(out.scores, tape.constant(target)));
  const auto grads = params.grads(tape);
  ASSERT_EQ(grads.size(), store.size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (store.names()[i].ends_with(".bias") && store.sites()[i].ends_with(".drs")) continue;
    float total = 0.0f;
    for (float g : grads[i].data()) total += std::abs(g);
    EXPECT_GT(total, 0.0f) << store.names()[i];
  }
}

TEST(Network, RejectsBadInput) {
  const auto cfg = small_config();
  const auto store = init_classifier_params(cfg, 1);
  EXPECT_THROW(forward_features(store, cfg, Tensor(Shape{1, 1, 16, 16})), ShapeError);
  EXPECT_THROW(forward_features(store, cfg, Tensor(Shape{1, 3, 2, 2})), ShapeError);
  auto bad = cfg;
  bad.num_classes = 0;
  EXPECT_THROW(init_classifier_params(bad, 1), std::invalid_argument);
  bad = cfg;
  bad.drs.delta = 2.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(LocalizationMaps, NormalizesPresentClasses) {
  Tensor f(Shape{1, 3, 1, 4},
           std::vector<float>{-1, 0, 2, 4,      // present
                              -1, -2, -3, -4,   // present but never positive
                              5, 5, 5, 5});     // absent
  const auto m = localization_maps(f, {{1, 1, 0}});
  EXPECT_EQ(m.vec(), (std::vector<float>{0, 0, 0.5f, 1, 0, 0, 0, 0, 0, 0, 0, 0}));
}

TEST(LocalizationMaps, RangeAndPeak) {
  Rng rng(8);
  const Tensor f = oracle::random_tensor<float>(rng, Shape{3, 4, 5, 5}, -1.0, 1.0);
  const auto m = localization_maps(f);
  for (std::size_t p = 0; p < 12; ++p) {
    float peak = 0.0f;
    for (std::size_t i = 0; i < 25; ++i) {
      const float v = m[p * 25 + i];
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
      peak = std::max(peak, v);
    }
    EXPECT_EQ(peak, 1.0f);
  }
  EXPECT_THROW(localization_maps(f, {{1, 1, 1, 1}}), ShapeError);
}

TEST(Checkpoint, RoundTripIsExact) {
  auto cfg = small_config();
  cfg.drs_flags = {true, false, true, false, true, false};
  cfg.drs.mode = ControllerMode::learnable;
  const auto store = init_classifier_params(cfg, 11);
  const auto dir = std::filesystem::temp_directory_path() / "drs_checkpoint_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir, store);
  EXPECT_EQ(load_checkpoint(dir), store);
  std::filesystem::remove(dir / "manifest.txt");
  EXPECT_THROW(load_checkpoint(dir), FormatError);
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, RefinerTakesBackboneAndZeroHead) {
  auto cfg = small_config();
  cfg.drs_flags.fill(true);
  cfg.drs.mode = ControllerMode::learnable;
  const auto classifier = init_classifier_params(cfg, 12);
  const auto refiner = refiner_from_classifier(classifier, cfg, 13);
  EXPECT_EQ(refiner.size(), init_refiner_params(cfg, 13).size());
  EXPECT_FALSE(refiner.contains("layer1.drs.weight"));
  EXPECT_EQ(refiner.at("layer6.weight"), classifier.at("layer6.weight"));
  const auto& head = refiner.at("head.weight");
  EXPECT_EQ(head.shape(), init_refiner_params(cfg, 13).at("head.weight").shape());
  EXPECT_TRUE(std::all_of(head.data().begin(), head.data().end(), [](float v) { return v == 0.0f; }));
}

TEST(Checkpoint, ParameterStoreCast) {
  const auto store = init_classifier_params(small_config(), 1);
  const auto back = store.cast<double>().cast<float>();
  EXPECT_EQ(back, store);
  ParameterStore dup;
  dup.add("a", "s", Tensor(Shape{1}));
  EXPECT_THROW(dup.add("a", "s", Tensor(Shape{1})), std::invalid_argument);
  EXPECT_THROW(dup.at("b"), std::out_of_range);
}
