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

#include "histoseg/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>

#include "histoseg/errors.hpp"
#include "histoseg/rng.hpp"

namespace histoseg {

namespace {

constexpr std::string_view kModule = "trainer";

void require_finite(double v) {
  if (!std::isfinite(v)) throw Error(kModule, ErrorCode::NonFinite, "validation loss is not finite");
}

bool gradients_finite(const Gradients& grads) {
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) return false;
  }
  return true;
}

std::vector<PreparedSample> gather(const SampleSource& source, std::span<const std::size_t> order,
                                   int epoch) {
  std::vector<PreparedSample> out;
  out.reserve(order.size());
  for (std::size_t idx : order) out.push_back(source.get(idx, epoch));
  return out;
}

}  // namespace

ScheduleState plateau_step(ScheduleState state, double val_loss) {
  require_finite(val_loss);
  if (val_loss < state.best - state.min_delta) {
    state.best = val_loss;
    state.stagnant_epochs = 0;
    return state;
  }
  if (++state.stagnant_epochs >= state.patience) {
    state.lr = std::max(state.lr * state.factor, state.min_lr);
    state.stagnant_epochs = 0;
  }
  return state;
}

StopState early_stop_step(StopState state, double val_loss) {
  require_finite(val_loss);
  if (val_loss < state.best - state.min_delta) {
    state.best = val_loss;
    state.stagnant_epochs = 0;
  } else {
    ++state.stagnant_epochs;
  }
  if (state.stagnant_epochs >= state.patience) state.stopped = true;
  return state;
}

std::string TrainLog::to_csv() const {
  std::string out = "epoch,train_loss,val_loss,lr,wall_seconds\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%d,%.10g,%.10g,%.10g,%.3f\n", r.epoch, r.train_loss,
                  r.val_loss, r.lr, r.wall_seconds);
    out += line;
  }
  return out;
}

void TrainConfig::validate() const {
  tversky.validate();
  if (!(lr > 0.0) || !(min_lr > 0.0) || lr < min_lr || !(factor > 0.0 && factor < 1.0) ||
      min_delta < 0.0 || plateau_patience < 0 || stop_patience < 0 || batch_size < 1 ||
      max_epochs < 1 || momentum < 0.0 || momentum >= 1.0) {
    throw Error(kModule, ErrorCode::BadConfig, "training configuration out of range");
  }
}

PreparedSample AugmentedSamples::get(std::size_t index, int epoch) const {
  const CroppedSample& base = samples_.at(index);
  if (!augment_) return finalize_sample(base, target_);
  const std::uint64_t draw = static_cast<std::uint64_t>(epoch) * samples_.size() + index;
  return finalize_sample(augment_sample(base, *augment_, draw), target_);
}

Tensor stack_pixels(std::span<const PreparedSample> samples) {
  if (samples.empty()) throw Error(kModule, ErrorCode::EmptyDataset, "empty batch");
  const int side = samples.front().side();
  const int channels = samples.front().pixels.channels();
  Tensor out({static_cast<int>(samples.size()), channels, side, side});
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const auto& px = samples[n].pixels;
    if (px.height() != side || px.width() != side || px.channels() != channels) {
      throw Error(kModule, ErrorCode::ShapeMismatch, "batch samples differ in shape");
    }
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        for (int c = 0; c < channels; ++c) out.at(static_cast<int>(n), c, y, x) = px.at(y, x, c);
      }
    }
  }
  return out;
}

Tensor stack_onehot(std::span<const PreparedSample> samples) {
  if (samples.empty()) throw Error(kModule, ErrorCode::EmptyDataset, "empty batch");
  const int side = samples.front().side();
  const int classes = samples.front().onehot.channels();
  Tensor out({static_cast<int>(samples.size()), classes, side, side});
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const auto& oh = samples[n].onehot;
    if (oh.height() != side || oh.width() != side || oh.channels() != classes) {
      throw Error(kModule, ErrorCode::ShapeMismatch, "batch samples differ in shape");
    }
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        for (int c = 0; c < classes; ++c) out.at(static_cast<int>(n), c, y, x) = oh.at(y, x, c);
      }
    }
  }
  return out;
}

double evaluate_loss(const Network& net, const SampleSource& source, const TrainConfig& config,
                     int epoch) {
  if (source.size() == 0) throw Error(kModule, ErrorCode::EmptyDataset, "no samples to evaluate");
  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double weighted = 0.0;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t stop = std::min(order.size(), start + batch);
    const auto samples = gather(source, std::span(order).subspan(start, stop - start), epoch);
    const auto pass = forward(net, stack_pixels(samples));
    weighted += combined_loss(pass.probs, stack_onehot(samples), config.tversky).value *
                static_cast<double>(samples.size());
  }
  return weighted / static_cast<double>(order.size());
}

FitResult fit(Network net, const SampleSource& train, const SampleSource& val,
              const TrainConfig& config) {
  config.validate();
  if (train.size() == 0 || val.size() == 0) {
    throw Error(kModule, ErrorCode::EmptyDataset, "fit needs non-empty training and validation sets");
  }

  ScheduleState schedule{config.lr, std::numeric_limits<double>::infinity(), 0, config.min_lr,
                         config.factor, config.plateau_patience, config.min_delta};
  StopState stop{std::numeric_limits<double>::infinity(), 0, config.stop_patience,
                 config.min_delta, false};
  SgdOptimizer sgd(config.momentum);
  AdamOptimizer adam;

  FitResult result;
  result.best = net;
  double best_val = std::numeric_limits<double>::infinity();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(train.size());

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(mix_seed({config.seed, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(rng.below(i + 1))]);
    }

    const double lr = schedule.lr;
    double weighted = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop_at = std::min(order.size(), start + batch);
      const auto samples = gather(train, std::span(order).subspan(start, stop_at - start), epoch);
      auto pass = forward(net, stack_pixels(samples));
      const auto loss = combined_loss(pass.probs, stack_onehot(samples), config.tversky);
      const Gradients grads = backward(pass, loss.grad);
      if (!std::isfinite(loss.value) || !gradients_finite(grads)) {
        ++result.skipped_steps;
        std::cerr << "trainer: epoch " << epoch << ": skipped a step with non-finite loss or gradient\n";
        continue;
      }
      if (config.optimizer == OptimizerKind::Adam) {
        adam.step(net, grads, lr);
      } else {
        sgd.step(net, grads, lr);
      }
      weighted += loss.value * static_cast<double>(samples.size());
      seen += samples.size();
    }

    const double val_loss = evaluate_loss(net, val, config, 0);
    const double train_loss = seen ? weighted / static_cast<double>(seen)
                                   : std::numeric_limits<double>::quiet_NaN();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.rows.push_back(EpochRecord{epoch, train_loss, val_loss, lr, seconds});

    if (val_loss < best_val) {
      best_val = val_loss;
      result.best = net;
      result.best_epoch = epoch;
    }
    schedule = plateau_step(schedule, val_loss);
    stop = early_stop_step(stop, val_loss);
    if (stop.stopped) break;
  }
  result.last = std::move(net);
  return result;
}

}  // namespace histoseg
