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

// Classifier training (BCE on image-level labels) and refinement learning (MSE
// against the frozen classifier's localization maps).

#pragma once

#include <algorithm>
#include <numeric>

#include "drs/data.hpp"
#include "drs/network.hpp"
#include "drs/optim.hpp"

namespace drs {

struct TrainSchedule {
  OptimizerKind optimizer = OptimizerKind::sgd;
  double lr = 1e-3;
  std::vector<std::size_t> decay_epochs{5, 10};
  double decay_factor = 0.1;
  std::size_t batch_size = 5;
  std::size_t epochs = 15;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs == 0 || batch_size == 0) {
      throw std::invalid_argument("schedule: epochs and batch size must be positive");
    }
    for (std::size_t e : decay_epochs) {
      if (e >= epochs) {
        throw std::invalid_argument("schedule: decay epoch " + std::to_string(e) +
                                    " outside " + std::to_string(epochs) + " epochs");
      }
    }
    if (lr < 0.0) throw std::invalid_argument("schedule: negative learning rate");
  }

  double lr_at(std::size_t epoch) const {
    return step_decay_lr(lr, decay_epochs, decay_factor, epoch);
  }

  friend bool operator==(const TrainSchedule&, const TrainSchedule&) = default;
};

struct TrainLog {
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

/// A batch of equally sized samples stacked as [N,3,H,W] plus [N,C] labels.
struct Batch {
  Tensor images;
  Tensor labels;
  std::vector<std::vector<std::uint8_t>> present;
};

inline Batch stack_batch(std::span<const Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("stack_batch: empty batch");
  const std::size_t h = samples[0].height(), w = samples[0].width();
  const std::size_t c = samples[0].labels.size();
  Batch b{Tensor(Shape{samples.size(), 3, h, w}), Tensor(Shape{samples.size(), c}), {}};
  const std::size_t plane = 3 * h * w;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.height() != h || s.width() != w || s.labels.size() != c) {
      throw ShapeError("stack_batch: samples differ in geometry");
    }
    std::copy(s.image.data().begin(), s.image.data().end(),
              b.images.data().begin() + static_cast<std::ptrdiff_t>(i * plane));
    for (std::size_t k = 0; k < c; ++k) b.labels[i * c + k] = s.labels[k];
    b.present.push_back(s.labels);
  }
  return b;
}

namespace detail {

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(derive_seed(seed, std::string("shuffle")), epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

// Runs `step(batch, lr)` over shuffled, augmented batches; returns per-epoch mean loss.
template <typename Step>
TrainLog run_epochs(std::span<const Sample> data, const TrainSchedule& sched,
                    const AugmentConfig& aug, Step&& step) {
  if (data.empty()) throw std::invalid_argument("training on an empty dataset");
  sched.validate();
  TrainLog log;
  std::vector<Sample> batch;
  for (std::size_t epoch = 0; epoch < sched.epochs; ++epoch) {
    const double lr = sched.lr_at(epoch);
    const auto order = epoch_order(data.size(), sched.seed, epoch);
    const std::uint64_t epoch_seed = derive_seed(derive_seed(sched.seed, std::string("augment")), epoch);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += sched.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + sched.batch_size);
      for (std::size_t j = start; j < end; ++j) {
        batch.push_back(augment(data[order[j]], aug, derive_seed(epoch_seed, order[j])));
      }
      const double loss = step(stack_batch(batch), lr);
      if (!std::isfinite(loss)) {
        throw NumericalError("loss became non-finite in epoch " + std::to_string(epoch + 1) +
                             " at batch " + std::to_string(batches));
      }
      total += loss;
      ++batches;
    }
    log.epoch_loss.push_back(total / static_cast<double>(batches));
  }
  return log;
}

}  // namespace detail

/// SGD + momentum + L2 on BCE(P, labels). Mutates `params` in place.
inline TrainLog train_classifier(std::span<const Sample> data, const NetworkConfig& cfg,
                                 const TrainSchedule& sched, const AugmentConfig& aug,
                                 ParameterStore& params) {
  cfg.validate();
  BasicOptimizerState<float> state;
  state.kind = sched.optimizer;
  state.momentum = sched.momentum;
  state.weight_decay = sched.optimizer == OptimizerKind::sgd ? sched.weight_decay : 0.0;
  return detail::run_epochs(data, sched, aug, [&](const Batch& b, double lr) {
    Tape tape;
    AttachedParams<float> vars(tape, params, true);
    auto out = classifier_forward(tape.constant(b.images), vars, cfg, true);
    auto loss = bce_loss(out.scores, tape.constant(b.labels));
    tape.backward(loss);
    const auto grads = vars.grads(tape);
    optimizer_step<float>(params.tensors(), grads, state, lr);
    return static_cast<double>(loss.value().item());
  });
}

/// Frozen classifier's localization maps for a batch (DRS active).
inline Tensor classifier_maps(const Tensor& images, const ParameterStore& classifier,
                              const NetworkConfig& cfg,
                              const std::vector<std::vector<std::uint8_t>>& present,
                              bool use_drs = true) {
  Tape tape(false);
  AttachedParams<float> vars(tape, classifier, false);
  auto out = classifier_forward(tape.constant(images), vars, cfg, use_drs);
  return localization_maps(out.features.value(), present);
}

/// Adam on MSE(N, M), with targets recomputed from the frozen classifier on the
/// same augmented batch. Mutates `refiner` in place.
inline TrainLog train_refiner(std::span<const Sample> data, const ParameterStore& classifier,
                              const NetworkConfig& cfg, const TrainSchedule& sched,
                              const AugmentConfig& aug, ParameterStore& refiner) {
  cfg.validate();
  BasicOptimizerState<float> state;
  state.kind = sched.optimizer;
  state.momentum = sched.momentum;
  state.weight_decay = sched.optimizer == OptimizerKind::sgd ? sched.weight_decay : 0.0;
  return detail::run_epochs(data, sched, aug, [&](const Batch& b, double lr) {
    const Tensor target = classifier_maps(b.images, classifier, cfg, b.present);
    Tape tape;
    AttachedParams<float> vars(tape, refiner, true);
    auto refined = refiner_forward(tape.constant(b.images), vars, cfg);
    auto loss = mse_loss(refined, tape.constant(target));
    tape.backward(loss);
    const auto grads = vars.grads(tape);
    optimizer_step<float>(refiner.tensors(), grads, state, lr);
    return static_cast<double>(loss.value().item());
  });
}

/// Sigmoid scores for whole (unaugmented) samples, evaluated in chunks.
inline Tensor predict_scores(std::span<const Sample> samples, const ParameterStore& params,
                             const NetworkConfig& cfg, std::size_t chunk = 8) {
  Tensor scores(Shape{samples.size(), cfg.num_classes});
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t end = std::min(samples.size(), start + chunk);
    const Batch b = stack_batch(samples.subspan(start, end - start));
    Tape tape(false);
    AttachedParams<float> vars(tape, params, false);
    const auto& p = classifier_forward(tape.constant(b.images), vars, cfg, true).scores.value();
    std::copy(p.data().begin(), p.data().end(),
              scores.data().begin() + static_cast<std::ptrdiff_t>(start * cfg.num_classes));
  }
  return scores;
}

/// Per sample, the fraction of classes whose prediction (P > 0.5) matches the label;
/// averaged over samples.
inline double multilabel_accuracy(const Tensor& scores,
                                  const std::vector<std::vector<std::uint8_t>>& labels) {
  if (scores.rank() != 2 || scores.dim(0) != labels.size()) {
    throw ShapeError("multilabel_accuracy: scores/labels mismatch");
  }
  const std::size_t n = scores.dim(0), c = scores.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t correct = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const bool predicted = scores[i * c + k] > 0.5f;
      if (predicted == (labels[i].at(k) != 0)) ++correct;
    }
    total += static_cast<double>(correct) / static_cast<double>(c);
  }
  return total / static_cast<double>(n);
}

}  // namespace drs
