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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "histoseg/cli.hpp"
#include "histoseg/dataset.hpp"
#include "histoseg/dataset_explorer.hpp"
#include "histoseg/fixture.hpp"
#include "histoseg/losses.hpp"
#include "histoseg/mask_codec.hpp"
#include "histoseg/metrics.hpp"
#include "histoseg/preprocessor.hpp"
#include "histoseg/rng.hpp"
#include "histoseg/trainer.hpp"
#include "histoseg/unet.hpp"

using namespace histoseg;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kLossGradTol = 1e-3;
constexpr double kNetGradTol = 1e-3;
constexpr double kFdStep = 1e-4;
// Network probes need a smaller step: at 1e-4 the perturbation of a shallow
// parameter flips ReLUs and pooling choices somewhere in the 32x32 maps.
constexpr double kNetFdStep = 1e-6;
constexpr double kRelFloor = 1e-6;
constexpr double kOverfitLoss = 0.1;
constexpr double kMetricTol = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class TempDir {
 public:
  TempDir() {
    std::random_device entropy;
    path_ = fs::temp_directory_path() / ("histoseg_accept_" + std::to_string(entropy()) + std::to_string(entropy()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fmt(const char* pattern, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kRelFloor});
}

Tensor random_probs(SplitMix64& rng, std::vector<int> shape) {
  Tensor t(shape);
  const int n = shape[0], c = shape[1], h = shape[2], w = shape[3];
  for (int b = 0; b < n; ++b) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double z = 0;
        for (int k = 0; k < c; ++k) z += (t.at(b, k, y, x) = std::exp(rng.normal()));
        for (int k = 0; k < c; ++k) t.at(b, k, y, x) /= z;
      }
    }
  }
  return t;
}

Tensor random_onehot(SplitMix64& rng, std::vector<int> shape) {
  Tensor t(shape);
  for (int b = 0; b < shape[0]; ++b) {
    for (int y = 0; y < shape[2]; ++y) {
      for (int x = 0; x < shape[3]; ++x) t.at(b, static_cast<int>(rng.below(shape[1])), y, x) = 1.0;
    }
  }
  return t;
}

// 1. Mask codec oracle.
Outcome mask_codec_oracle() {
  SplitMix64 rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = 1 + static_cast<int>(rng.below(16)), w = 1 + static_cast<int>(rng.below(16));
    RawMask m{ByteRaster(h, w), ByteRaster(h, w), ByteRaster(h, w)};
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        m.ch1.at(y, x) = static_cast<std::uint8_t>(rng.below(6));
        m.ch2.at(y, x) = static_cast<std::uint8_t>(rng.below(256));
        m.ch3.at(y, x) = static_cast<std::uint8_t>(rng.below(4));
      }
    }
    const InstanceMap im = decode_instance_map(m);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (im.at(y, x) != static_cast<std::uint32_t>(m.ch2.at(y, x)) * m.ch3.at(y, x)) {
          return {false, "instance id differs from the product at trial " + std::to_string(trial)};
        }
      }
    }
    const ClassMap cm = decode_class_map(m, SuperclassTable::parse("1 = TUMOR\n2 = STROMAL\n3 = STILS\n"));
    std::vector<LocalizationRecord> records;
    std::set<std::uint32_t> boxed;
    for (auto id : std::set<std::uint32_t>(im.data().begin(), im.data().end())) {
      if (id == 0) continue;
      LocalizationRecord r;
      r.instance_id = id;
      r.raw_class = "tumor";
      if (rng.below(2) == 0) {
        r.kind = RecordKind::BoundingBox;
        r.coords = {{0, 0}, {w - 1, h - 1}};
        boxed.insert(id);
      } else {
        r.coords = {{0, 0}, {1, 0}, {0, 1}};
      }
      records.push_back(r);
    }
    const StripResult once = strip_bounding_boxes(cm, im, records);
    const StripResult twice = strip_bounding_boxes(once.classes, once.instances, records);
    if (!(twice.classes == once.classes) || !(twice.instances == once.instances)) {
      return {false, "strip is not idempotent at trial " + std::to_string(trial)};
    }
    for (std::size_t i = 0; i < im.size(); ++i) {
      const std::uint32_t id = im.data()[i];
      const bool keep = !boxed.contains(id);
      if (keep && (once.instances.data()[i] != id || once.classes.data()[i] != cm.data()[i])) {
        return {false, "polygon pixel changed at trial " + std::to_string(trial)};
      }
      if (!keep && (once.instances.data()[i] != 0 || once.classes.data()[i] != Superclass::Fov)) {
        return {false, "box pixel kept at trial " + std::to_string(trial)};
      }
    }
  }
  return {true, "200 masks"};
}

// 2. Target shape for the full-size dataset maxima.
Outcome target_shape_instance() {
  DatasetSummary s;
  s.n_samples = 1;
  s.max_height = 796;
  s.max_width = 830;
  const TargetShape t = compute_target_shape(s, 32);
  return {t.side == 768, "side " + std::to_string(t.side)};
}

// 3. Combined loss gradient.
Outcome loss_gradient() {
  SplitMix64 rng(303);
  const TverskyParams params{0.5, 0.5, 1e-6};
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor p = random_probs(rng, {2, 4, 8, 8});
    const Tensor g = random_onehot(rng, {2, 4, 8, 8});
    const Tensor analytic = combined_loss(p, g, params).grad;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + kFdStep;
      const double up = combined_loss(p, g, params).value;
      p[i] = saved - kFdStep;
      const double down = combined_loss(p, g, params).value;
      p[i] = saved;
      worst = std::max(worst, relative_error(analytic[i], (up - down) / (2 * kFdStep)));
    }
  }
  return {worst < kLossGradTol, "max relative error " + fmt("%.3g", worst)};
}

// 4. End-to-end network gradient.
Outcome network_gradient() {
  SplitMix64 rng(404);
  NetworkConfig cfg;
  cfg.depth = 2;
  cfg.base_filters = 8;
  Network net = build_unet(cfg, 41);
  Tensor batch({1, 3, 32, 32});
  for (auto& v : batch.values()) v = rng.normal();
  const Tensor target = random_onehot(rng, {1, 4, 32, 32});
  const TverskyParams params{0.5, 0.5, 1e-6};
  auto objective = [&] { return combined_loss(forward(net, batch).probs, target, params).value; };

  ForwardPass pass = forward(net, batch);
  const LossResult loss = combined_loss(pass.probs, target, params);
  const Gradients grads = backward(pass, loss.grad);
  double worst = 0.0;
  for (int sample = 0; sample < 50; ++sample) {
    auto& p = net.parameters()[rng.below(net.parameters().size())];
    const std::size_t i = rng.below(p.value.size());
    const double saved = p.value[i];
    p.value[i] = saved + kNetFdStep;
    const double up = objective();
    p.value[i] = saved - kNetFdStep;
    const double down = objective();
    p.value[i] = saved;
    worst = std::max(worst, relative_error(grads.at(p.name)[i], (up - down) / (2 * kNetFdStep)));
  }
  return {worst < kNetGradTol, "50 parameters at h=1e-6, max relative error " + fmt("%.3g", worst)};
}

// 5. Overfit one fixture sample.
Outcome overfit() {
  TempDir dir;
  FixtureConfig fixture;
  fixture.samples = 1;
  fixture.multi_samples = 0;
  write_fixture(fixture, dir.path() / "single", {}, dir.path() / "table.txt");
  const auto files = list_samples(dir.path() / "single");
  const TileSample tile = load_sample(files.front());
  const PreparedSample sample =
      prepare_sample(tile, SuperclassTable::load(dir.path() / "table.txt"), TargetShape{32, 32}, false);
  const StaticSamples source({sample});

  TrainConfig cfg;  // lr 1e-3, factor 0.1, min 1e-5, min_delta 1e-4, patience 10/30
  cfg.batch_size = 1;
  cfg.max_epochs = 300;
  NetworkConfig net;
  net.depth = 2;
  net.base_filters = 8;
  const FitResult r = fit(build_unet(net, 1), source, source, cfg);

  double best = std::numeric_limits<double>::infinity();
  bool monotone = true;
  for (std::size_t i = 0; i < r.log.rows.size(); ++i) {
    best = std::min(best, r.log.rows[i].val_loss);
    if (i > 0 && r.log.rows[i].lr > r.log.rows[i - 1].lr) monotone = false;
  }
  const double final_lr = r.log.rows.back().lr;
  const bool pass = best < kOverfitLoss && monotone && final_lr >= 1e-5 && r.skipped_steps == 0;
  return {pass, "best loss " + fmt("%.4g", best) + " after " + std::to_string(r.log.rows.size()) +
                    " epochs, final lr " + fmt("%.3g", final_lr) + (monotone ? "" : ", lr increased")};
}

// 6. Schedule state machines on scripted traces.
Outcome schedules() {
  ScheduleState s;
  s = plateau_step(s, 1.0);
  int reduced_at = 0;
  for (int epoch = 1; epoch <= 10 && reduced_at == 0; ++epoch) {
    s = plateau_step(s, 1.0);
    if (s.lr < 1e-3) reduced_at = epoch;
  }
  for (int i = 0; i < 100; ++i) s = plateau_step(s, 1.0);
  const bool floor_ok = std::abs(s.lr - 1e-5) < 1e-18;

  StopState stop;
  stop = early_stop_step(stop, 1.0);
  int stopped_at = 0;
  for (int epoch = 1; epoch <= 40 && stopped_at == 0; ++epoch) {
    stop = early_stop_step(stop, 1.0);
    if (stop.stopped) stopped_at = epoch;
  }
  return {reduced_at == 10 && floor_ok && stopped_at == 30,
          "reduce at stagnant epoch " + std::to_string(reduced_at) + ", floor " + fmt("%.3g", s.lr) +
              ", stop at stagnant epoch " + std::to_string(stopped_at)};
}

// 7. Metrics against per-pixel enumeration.
Outcome metrics_oracle() {
  SplitMix64 rng(707);
  std::size_t degenerate = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int h = 1 + static_cast<int>(rng.below(8)), w = 1 + static_cast<int>(rng.below(8));
    ClassMap pred(h, w), truth(h, w);
    for (auto& v : pred.data()) v = static_cast<Superclass>(rng.below(4));
    for (auto& v : truth.data()) v = static_cast<Superclass>(rng.below(4));
    for (Superclass cls : kAllSuperclasses) {
      double tp = 0, fp = 0, fn = 0, tn = 0;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const bool p = pred.at(y, x) == cls, t = truth.at(y, x) == cls;
          tp += p && t;
          fp += p && !t;
          fn += !p && t;
          tn += !p && !t;
        }
      }
      auto safe = [](double num, double den) { return den == 0 ? 0.0 : num / den; };
      const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
      const MetricSet expect{den == 0 ? 0.0 : (tp * tn - fp * fn) / std::sqrt(den), safe(tp, tp + fp + fn),
                             (tp + tn) / (tp + fp + fn + tn), (safe(tp, tp + fn) + safe(tn, tn + fp)) / 2,
                             safe(2 * tp, 2 * tp + fp + fn)};
      if (den == 0 || tp + fp + fn == 0) ++degenerate;
      const MetricSet got = compute_metrics(confusion_matrix(pred, truth, cls));
      for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
        if (std::abs(metric_value(got, k) - metric_value(expect, k)) > kMetricTol) {
          return {false, std::string(kMetricNames[k]) + " differs at trial " + std::to_string(trial)};
        }
      }
    }
  }
  return {true, "500 pairs, " + std::to_string(degenerate) + " degenerate cells"};
}

// 8. Split contract.
Outcome split_contract() {
  SplitMix64 rng(808);
  const std::array<double, 3> ratios{0.6, 0.2, 0.2};
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    const std::uint64_t seed = rng.next();
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("id" + std::to_string(i));
    const SplitIndex a = make_split(ids, ratios, seed);
    if (!(a == make_split(ids, ratios, seed))) return {false, "not deterministic"};
    const std::size_t val = static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(n) + 1e-9));
    if (a.val.size() != val || a.eval.size() != val || a.train.size() != n - 2 * val) {
      return {false, "wrong sizes for n=" + std::to_string(n)};
    }
    std::set<std::string> all(a.train.begin(), a.train.end());
    all.insert(a.val.begin(), a.val.end());
    all.insert(a.eval.begin(), a.eval.end());
    if (all.size() != n) return {false, "overlap or gap for n=" + std::to_string(n)};
  }
  std::vector<std::string> ids;
  for (int i = 0; i < 1744; ++i) ids.push_back("id" + std::to_string(i));
  const SplitIndex big = make_split(ids, ratios, 7);
  return {true, "n=1744 gives train/val/eval " + std::to_string(big.train.size()) + "/" +
                    std::to_string(big.val.size()) + "/" + std::to_string(big.eval.size()) +
                    " (the reference counts 347/1257/485 do not follow from 0.6/0.2/0.2)"};
}

// 9 and 10. Full pipeline through the CLI, twice.
struct PipelineRun {
  bool ok = false;
  std::string failure;
  std::map<std::string, std::string> files;
};

PipelineRun run_pipeline(const fs::path& dir) {
  PipelineRun run;
  const std::string config = (fs::path(HISTOSEG_SOURCE_DIR) / "config/fixture.ini").string();
  const std::vector<std::string> sets = {
      "data.root=" + (dir / "data/single").string(), "data.multi_root=" + (dir / "data/multi").string(),
      "data.superclass_table=" + (dir / "data/superclasses.txt").string(), "data.output=" + (dir / "out").string(),
      "train.max_epochs=20", "fixture.samples=8", "fixture.side=32"};
  for (const char* sub : {"make-fixture", "explore", "prepare", "train", "evaluate", "report"}) {
    std::vector<std::string> args = {"histoseg", sub, "--config", config};
    for (const auto& s : sets) {
      args.push_back("--set");
      args.push_back(s);
    }
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    if (run_cli(static_cast<int>(argv.size()), argv.data(), out, err) != 0) {
      run.failure = std::string(sub) + ": " + err.str();
      return run;
    }
  }
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) run.files[fs::relative(entry.path(), dir).string()] = slurp(entry.path());
  }
  // The wall-clock column is the last one of train_log.csv.
  auto& log = run.files["out/model/train_log.csv"];
  std::istringstream lines(log);
  std::string stripped;
  for (std::string line; std::getline(lines, line);) stripped += line.substr(0, line.rfind(',')) + "\n";
  log = stripped;
  run.ok = true;
  return run;
}

PipelineRun first_run, second_run;

Outcome end_to_end() {
  TempDir a, b;
  first_run = run_pipeline(a.path());
  if (!first_run.ok) return {false, first_run.failure};
  second_run = run_pipeline(b.path());
  if (!second_run.ok) return {false, "rerun " + second_run.failure};

  const auto& f = first_run.files;
  for (const char* variant : {"single", "single_nobbox", "combined"}) {
    if (!f.contains("out/prepared/" + std::string(variant) + "/roles.json")) {
      return {false, std::string("missing prepared variant ") + variant};
    }
  }
  const auto table = parse_results_csv(f.at("out/results.csv"));
  const std::size_t eval_count =
      nlohmann::json::parse(f.at("out/prepared/single/roles.json")).at("eval").size();
  if (eval_count == 0 || table.rows.size() != eval_count * kSuperclassCount) {
    return {false, "results.csv has " + std::to_string(table.rows.size()) + " rows for " +
                       std::to_string(eval_count) + " eval samples"};
  }
  std::size_t figures = 0, overlays = 0;
  for (const auto& [name, bytes] : f) {
    const bool figure = name.starts_with("out/report/boxplot_");
    const bool overlay = name.starts_with("out/report/overlay_");
    if (!figure && !overlay) continue;
    figures += figure;
    overlays += overlay;
    const auto other = second_run.files.find(name);
    if (other == second_run.files.end() || other->second != bytes) return {false, name + " differs on rerun"};
  }
  if (figures != 5 || overlays == 0) return {false, "report is incomplete"};
  return {true, std::to_string(table.rows.size()) + " result rows, " + std::to_string(figures) + " figures, " +
                    std::to_string(overlays) + " overlays match on rerun"};
}

Outcome determinism() {
  if (!first_run.ok || !second_run.ok) return {false, "pipeline did not complete"};
  std::size_t compared = 0;
  for (const auto& [name, bytes] : first_run.files) {
    const auto other = second_run.files.find(name);
    if (other == second_run.files.end()) return {false, name + " missing on rerun"};
    if (other->second != bytes) return {false, name + " differs"};
    ++compared;
  }
  if (compared != second_run.files.size()) return {false, "rerun wrote extra files"};
  return {true, std::to_string(compared) + " files byte-identical"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "mask codec oracle", 5, mask_codec_oracle},
      {2, "target shape 796x830 -> 768", 1, target_shape_instance},
      {3, "combined loss gradient", 30, loss_gradient},
      {4, "network gradient", 120, network_gradient},
      {5, "overfit convergence", 300, overfit},
      {6, "schedule state machines", 1, schedules},
      {7, "metrics oracle", 10, metrics_oracle},
      {8, "split contract", 5, split_contract},
      {9, "end-to-end smoke", 600, end_to_end},
      {10, "determinism", 600, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (outcome.pass && seconds > c.budget_seconds) {
      outcome = {false, outcome.detail + "; over the " + fmt("%.0f", c.budget_seconds) + " s budget"};
    }
    failures += !outcome.pass;
    std::printf("%s criterion %d: %s: %s [%.2f s]\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name,
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
