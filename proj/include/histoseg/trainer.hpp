// Copyright 2026 The histoseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "histoseg/augmentor.hpp"
#include "histoseg/losses.hpp"
#include "histoseg/preprocessor.hpp"
#include "histoseg/unet.hpp"

namespace histoseg {

/// Reduce-on-plateau state. Improvement means val_loss < best - min_delta.
struct ScheduleState {
  double lr = 1e-3;
  double best = std::numeric_limits<double>::infinity();
  int stagnant_epochs = 0;
  double min_lr = 1e-5;
  double factor = 0.1;
  int patience = 10;
  double min_delta = 1e-4;
};

/// An improving epoch resets the counter and records the new best. Otherwise
/// the counter grows; when it reaches `patience` the rate becomes
/// max(lr * factor, min_lr) and the counter restarts. Throws NonFinite.
ScheduleState plateau_step(ScheduleState state, double val_loss);

struct StopState {
  double best = std::numeric_limits<double>::infinity();
  int stagnant_epochs = 0;
  int patience = 30;
  double min_delta = 1e-4;
  bool stopped = false;
};

/// Same improvement rule as plateau_step; sets `stopped` once the counter
/// reaches `patience`. Throws NonFinite.
StopState early_stop_step(StopState state, double val_loss);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> rows;

  /// Header: epoch,train_loss,val_loss,lr,wall_seconds
  std::string to_csv() const;
};

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  double lr = 1e-3;
  double factor = 0.1;
  double min_lr = 1e-5;
  double min_delta = 1e-4;
  int plateau_patience = 10;
  int stop_patience = 30;
  int batch_size = 8;
  int max_epochs = 1000;
  TverskyParams tversky{};
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  /// Throws BadConfig.
  void validate() const;
};

/// Yields network-ready samples; `epoch` lets a source re-draw augmentations.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual PreparedSample get(std::size_t index, int epoch) const = 0;
};

class StaticSamples final : public SampleSource {
 public:
  explicit StaticSamples(std::vector<PreparedSample> samples) : samples_(std::move(samples)) {}
  std::size_t size() const override { return samples_.size(); }
  PreparedSample get(std::size_t index, int) const override { return samples_.at(index); }

 private:
  std::vector<PreparedSample> samples_;
};

/// Augments cropped samples with draw index epoch * size() + index, then
/// finalizes them to the target geometry.
class AugmentedSamples final : public SampleSource {
 public:
  AugmentedSamples(std::vector<CroppedSample> samples, TargetShape target,
                   std::optional<AugmentConfig> augment)
      : samples_(std::move(samples)), target_(target), augment_(std::move(augment)) {}
  std::size_t size() const override { return samples_.size(); }
  PreparedSample get(std::size_t index, int epoch) const override;

 private:
  std::vector<CroppedSample> samples_;
  TargetShape target_;
  std::optional<AugmentConfig> augment_;
};

/// [N,3,S,S] pixels and [N,4,S,S] one-hot tensors from HWC samples.
Tensor stack_pixels(std::span<const PreparedSample> samples);
Tensor stack_onehot(std::span<const PreparedSample> samples);

/// Mean combined loss over a source, batched, no gradient.
double evaluate_loss(const Network& net, const SampleSource& source, const TrainConfig& config,
                     int epoch = 0);

struct FitResult {
  Network best;
  Network last;
  TrainLog log;
  int best_epoch = 0;
  std::size_t skipped_steps = 0;
};

/// Each epoch: seeded shuffle of the training order, batched
/// forward -> combined loss -> backward -> optimizer step (steps whose loss or
/// gradients are not finite are skipped), then validation loss drives the
/// plateau schedule and early stopping. Training ends on early stop or
/// max_epochs. `best` is the first epoch with the minimum validation loss.
FitResult fit(Network net, const SampleSource& train, const SampleSource& val,
              const TrainConfig& config);

}  // namespace histoseg
