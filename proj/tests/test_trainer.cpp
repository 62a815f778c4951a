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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "histoseg/errors.hpp"
#include "histoseg/losses.hpp"
#include "histoseg/trainer.hpp"
#include "support.hpp"

using namespace histoseg;
using testing::random_onehot;
using testing::random_probs;

namespace {

Tensor pixel(std::vector<double> channels) {
  const int c = static_cast<int>(channels.size());
  return Tensor({1, c, 1, 1}, std::move(channels));
}

double dice_loss(const Tensor& p, const Tensor& g, double s, double smooth_factor) {
  const int n = p.dim(0), c_n = p.dim(1), h = p.dim(2), w = p.dim(3);
  double loss = c_n;
  for (int c = 0; c < c_n; ++c) {
    double pg = 0.0, sp = 0.0, sg = 0.0;
    for (int b = 0; b < n; ++b) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          pg += p.at(b, c, y, x) * g.at(b, c, y, x);
          sp += p.at(b, c, y, x);
          sg += g.at(b, c, y, x);
        }
      }
    }
    loss -= (2.0 * pg + smooth_factor * s) / (sp + sg + smooth_factor * s);
  }
  return loss;
}

Tensor permute_classes(const Tensor& t, const std::vector<int>& perm) {
  Tensor out(t.shape());
  for (int b = 0; b < t.dim(0); ++b) {
    for (int c = 0; c < t.dim(1); ++c) {
      for (int y = 0; y < t.dim(2); ++y) {
        for (int x = 0; x < t.dim(3); ++x) out.at(b, perm[c], y, x) = t.at(b, c, y, x);
      }
    }
  }
  return out;
}

PreparedSample synthetic_sample(SplitMix64& rng, int side, const std::string& id) {
  PreparedSample s;
  s.sample_id = id;
  s.pixels = FloatImage(side, side, 3);
  ClassMap labels(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const bool inside = (x - side / 2) * (x - side / 2) + (y - side / 2) * (y - side / 2) < side * side / 9;
      labels.at(y, x) = inside ? Superclass::Tumor : Superclass::Fov;
      for (int c = 0; c < 3; ++c) {
        s.pixels.at(y, x, c) = static_cast<float>((inside ? 1.0 : -1.0) + 0.1 * rng.normal());
      }
    }
  }
  s.onehot = onehot_encode(labels);
  return s;
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.max_epochs = 6;
  cfg.batch_size = 2;
  cfg.lr = 0.01;
  cfg.seed = 4;
  return cfg;
}

NetworkConfig tiny_net() {
  NetworkConfig cfg;
  cfg.depth = 1;
  cfg.base_filters = 2;
  return cfg;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("tversky of a clamped perfect prediction is near zero") {
  SplitMix64 rng(1);
  const Tensor g = random_onehot(rng, {2, 4, 5, 5});
  Tensor p = g;
  for (auto& v : p.values()) v = std::clamp(v, 1e-7, 1.0 - 1e-7);
  CHECK(tversky_loss(p, g, {}).value <= 1e-3);
  CHECK(crossentropy_loss(p, g).value <= 1e-6);
  CHECK(combined_loss(p, g, {}).value >= 0.0);
}

TEST_CASE("tversky hand example: one pixel, two classes") {
  const double loss = tversky_loss(pixel({0.5, 0.5}), pixel({1.0, 0.0}), {0.5, 0.5, 1e-12}).value;
  // TI_0 = 0.5 / (0.5 + 0.5 * 0.5) = 2/3, TI_1 = 0.
  CHECK(loss == doctest::Approx(4.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("tversky with alpha = beta = 1/2 is the dice loss") {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor p = random_probs(rng, {2, 4, 6, 6});
    const Tensor g = random_onehot(rng, {2, 4, 6, 6});
    // Literal form with the smoothing term added once, as s becomes negligible.
    CHECK(std::abs(tversky_loss(p, g, {0.5, 0.5, 1e-12}).value - dice_loss(p, g, 1e-12, 1.0)) < 1e-9);
    // With the default smoothing the exact identity carries 2s on both sides.
    CHECK(std::abs(tversky_loss(p, g, {}).value - dice_loss(p, g, 1e-6, 2.0)) < 1e-12);
  }
}

TEST_CASE("tversky is equivariant under class permutation") {
  SplitMix64 rng(3);
  const Tensor p = random_probs(rng, {1, 4, 5, 5});
  const Tensor g = random_onehot(rng, {1, 4, 5, 5});
  const std::vector<int> perm = {2, 0, 3, 1};
  const TverskyParams params{0.7, 0.3, 1e-6};
  CHECK(tversky_loss(permute_classes(p, perm), permute_classes(g, perm), params).value ==
        doctest::Approx(tversky_loss(p, g, params).value).epsilon(1e-12));
}

TEST_CASE("cross-entropy examples") {
  for (int c : {2, 3, 4, 7}) {
    Tensor p({1, c, 3, 3}, 1.0 / c);
    SplitMix64 rng(static_cast<std::uint64_t>(c));
    CHECK(std::abs(crossentropy_loss(p, random_onehot(rng, p.shape())).value - std::log(c)) < 1e-9);
  }
  CHECK(crossentropy_loss(pixel({0.25, 0.75}), pixel({1.0, 0.0})).value ==
        doctest::Approx(1.3863).epsilon(1e-4));
  CHECK(crossentropy_loss(pixel({0.0, 1.0}), pixel({1.0, 0.0})).value ==
        doctest::Approx(-std::log(kCrossEntropyEpsilon)));
}

TEST_CASE("loss gradients match finite differences") {
  SplitMix64 rng(4);
  Tensor p = random_probs(rng, {2, 3, 3, 3});
  const Tensor g = random_onehot(rng, p.shape());
  const TverskyParams params{0.7, 0.3, 1e-6};
  const auto analytic = combined_loss(p, g, params).grad;
  auto f = [&](const Tensor& x) { return combined_loss(x, g, params).value; };
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double numeric = testing::central_difference(f, p, i, 1e-6);
    CHECK(testing::relative_error(analytic[i], numeric) < 1e-5);
  }
}

TEST_CASE("loss shape and parameter errors") {
  CHECK_THROWS_AS(tversky_loss(Tensor({1, 2, 2, 2}), Tensor({1, 2, 2, 3}), {}), Error);
  CHECK_THROWS_AS(crossentropy_loss(Tensor({1, 2, 2, 2}), Tensor({1, 3, 2, 2})), Error);
  CHECK_THROWS_AS((TverskyParams{-0.1, 0.5, 1e-6}.validate()), Error);
  CHECK_THROWS_AS((TverskyParams{0.5, 0.5, 0.0}.validate()), Error);
  CHECK_THROWS_AS((TverskyParams{0.5, 0.5, 1e-2}.validate()), Error);
}

TEST_CASE("plateau reduces on the tenth stagnant epoch and floors at min_lr") {
  ScheduleState s;  // lr 1e-3, factor 0.1, patience 10, min 1e-5
  s = plateau_step(s, 1.0);
  CHECK(s.stagnant_epochs == 0);
  for (int i = 1; i <= 9; ++i) {
    s = plateau_step(s, 1.0);
    CHECK(s.lr == 1e-3);
  }
  s = plateau_step(s, 1.0);
  CHECK(s.lr == doctest::Approx(1e-4));
  CHECK(s.stagnant_epochs == 0);
  for (int i = 0; i < 10; ++i) s = plateau_step(s, 1.0);
  CHECK(s.lr == doctest::Approx(1e-5));
  for (int i = 0; i < 50; ++i) {
    s = plateau_step(s, 1.0);
    CHECK(s.lr >= 1e-5);
  }
  CHECK(s.lr == doctest::Approx(1e-5));
}

TEST_CASE("improvements below min_delta count as stagnation") {
  ScheduleState s;
  s = plateau_step(s, 1.0);
  s = plateau_step(s, 1.0 - 5e-5);
  CHECK(s.stagnant_epochs == 1);
  CHECK(s.best == 1.0);
  s = plateau_step(s, 1.0 - 2e-4);
  CHECK(s.stagnant_epochs == 0);
  CHECK_THROWS_AS(plateau_step(s, std::nan("")), Error);
}

TEST_CASE("lr sequence never increases") {
  SplitMix64 rng(5);
  ScheduleState s;
  double prev = s.lr;
  for (int i = 0; i < 500; ++i) {
    s = plateau_step(s, 1.0 + rng.uniform() * 0.01);
    CHECK(s.lr <= prev);
    CHECK(s.lr >= s.min_lr);
    prev = s.lr;
  }
}

TEST_CASE("early stop fires on the thirtieth stagnant epoch") {
  StopState s;
  s = early_stop_step(s, 2.0);
  for (int i = 1; i < 30; ++i) {
    s = early_stop_step(s, 2.0);
    CHECK_FALSE(s.stopped);
  }
  s = early_stop_step(s, 2.0);
  CHECK(s.stopped);
  CHECK(s.stagnant_epochs >= s.patience);
}

TEST_CASE("train log csv") {
  TrainLog log;
  log.rows = {{1, 0.5, 0.25, 1e-3, 0.0125}, {2, 0.4, 0.2, 1e-4, 1.0}};
  CHECK(log.to_csv() ==
        "epoch,train_loss,val_loss,lr,wall_seconds\n"
        "1,0.5,0.25,0.001,0.013\n"
        "2,0.4,0.2,0.0001,1.000\n");
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.optimizer == OptimizerKind::Sgd);
  CHECK(cfg.momentum == 0.9);
  cfg.factor = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.lr = 1e-6;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("batches stack in NCHW order") {
  SplitMix64 rng(6);
  const std::vector<PreparedSample> samples = {synthetic_sample(rng, 4, "a"), synthetic_sample(rng, 4, "b")};
  const Tensor px = stack_pixels(samples);
  CHECK(px.shape() == std::vector<int>{2, 3, 4, 4});
  CHECK(px.at(1, 2, 3, 1) == samples[1].pixels.at(3, 1, 2));
  const Tensor oh = stack_onehot(samples);
  CHECK(oh.at(0, 1, 2, 2) == 1.0);
  const std::vector<PreparedSample> mixed = {synthetic_sample(rng, 4, "a"), synthetic_sample(rng, 8, "b")};
  CHECK_THROWS_AS(stack_pixels(mixed), Error);
}

TEST_CASE("fit is deterministic and lowers the loss") {
  SplitMix64 rng(7);
  std::vector<PreparedSample> train;
  for (int i = 0; i < 4; ++i) train.push_back(synthetic_sample(rng, 8, "t" + std::to_string(i)));
  const StaticSamples train_src(train);
  const StaticSamples val_src({synthetic_sample(rng, 8, "v")});
  const TrainConfig cfg = quick_config();

  const FitResult a = fit(build_unet(tiny_net(), 3), train_src, val_src, cfg);
  const FitResult b = fit(build_unet(tiny_net(), 3), train_src, val_src, cfg);
  REQUIRE(a.log.rows.size() == 6);
  for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
    CHECK(a.log.rows[i].epoch == static_cast<int>(i + 1));
    CHECK(a.log.rows[i].train_loss == b.log.rows[i].train_loss);
    CHECK(a.log.rows[i].val_loss == b.log.rows[i].val_loss);
    CHECK(a.log.rows[i].lr == b.log.rows[i].lr);
  }
  CHECK(a.best == b.best);
  CHECK(a.last == b.last);
  CHECK(a.log.rows.back().val_loss < a.log.rows.front().val_loss);

  std::size_t argmin = 0;
  for (std::size_t i = 1; i < a.log.rows.size(); ++i) {
    if (a.log.rows[i].val_loss < a.log.rows[argmin].val_loss) argmin = i;
  }
  CHECK(a.best_epoch == static_cast<int>(argmin + 1));
  CHECK(evaluate_loss(a.best, val_src, cfg) == doctest::Approx(a.log.rows[argmin].val_loss).epsilon(1e-12));
}

TEST_CASE("lr column changes only on plateau events") {
  SplitMix64 rng(8);
  const StaticSamples train({synthetic_sample(rng, 8, "t")});
  const StaticSamples val({synthetic_sample(rng, 8, "v")});
  TrainConfig cfg = quick_config();
  cfg.max_epochs = 25;
  cfg.lr = 1e-4;
  cfg.min_lr = 1e-6;
  cfg.plateau_patience = 2;
  cfg.min_delta = 1.0;  // nothing counts as improvement after the first epoch
  cfg.stop_patience = 100;
  const FitResult r = fit(build_unet(tiny_net(), 5), train, val, cfg);
  ScheduleState replay{cfg.lr, std::numeric_limits<double>::infinity(), 0, cfg.min_lr, cfg.factor,
                       cfg.plateau_patience, cfg.min_delta};
  for (const auto& row : r.log.rows) {
    CHECK(row.lr == replay.lr);
    replay = plateau_step(replay, row.val_loss);
  }
  CHECK(r.log.rows.back().lr == doctest::Approx(1e-6));
}

TEST_CASE("early stopping ends the run") {
  SplitMix64 rng(9);
  const StaticSamples train({synthetic_sample(rng, 8, "t")});
  const StaticSamples val({synthetic_sample(rng, 8, "v")});
  TrainConfig cfg = quick_config();
  cfg.max_epochs = 100;
  cfg.min_delta = 1.0;
  cfg.stop_patience = 3;
  const FitResult r = fit(build_unet(tiny_net(), 5), train, val, cfg);
  CHECK(r.log.rows.size() == 4);
}

TEST_CASE("non-finite steps are skipped without touching parameters") {
  SplitMix64 rng(10);
  PreparedSample broken = synthetic_sample(rng, 8, "nan");
  broken.pixels.at(0, 0, 0) = std::numeric_limits<float>::quiet_NaN();
  const StaticSamples train({broken});
  const StaticSamples val({synthetic_sample(rng, 8, "v")});
  TrainConfig cfg = quick_config();
  cfg.max_epochs = 3;
  const Network start = build_unet(tiny_net(), 6);
  const FitResult r = fit(start, train, val, cfg);
  CHECK(r.skipped_steps == 3);
  CHECK(r.last == start);
  CHECK(std::isnan(r.log.rows.front().train_loss));
}

TEST_CASE("fit needs data") {
  const StaticSamples empty({});
  SplitMix64 rng(11);
  const StaticSamples one({synthetic_sample(rng, 8, "a")});
  CHECK_THROWS_AS(fit(build_unet(tiny_net(), 1), empty, one, quick_config()), Error);
  CHECK_THROWS_AS(fit(build_unet(tiny_net(), 1), one, empty, quick_config()), Error);
}

TEST_CASE("augmented source redraws per epoch and is reproducible") {
  SplitMix64 rng(12);
  CroppedSample base{"c", FloatImage(8, 8, 3), testing::random_class_map(rng, 8, 8)};
  for (auto& v : base.image.data()) v = static_cast<float>(rng.uniform());
  AugmentConfig aug;
  aug.p_elastic = aug.p_noise = 1.0;
  aug.seed = 3;
  const AugmentedSamples src({base}, TargetShape{8, 8}, aug);
  CHECK(src.get(0, 1).pixels == src.get(0, 1).pixels);
  CHECK_FALSE(src.get(0, 1).pixels == src.get(0, 2).pixels);
  const AugmentedSamples plain({base}, TargetShape{8, 8}, std::nullopt);
  CHECK(plain.get(0, 1).pixels == plain.get(0, 9).pixels);
  CHECK(plain.get(0, 1).pixels == finalize_sample(base, TargetShape{8, 8}).pixels);
}

}  // TEST_SUITE
