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

#include "histoseg/pipeline.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "histoseg/dataset.hpp"
#include "histoseg/dataset_explorer.hpp"
#include "histoseg/errors.hpp"
#include "histoseg/image_io.hpp"
#include "histoseg/metrics.hpp"
#include "histoseg/parallel.hpp"
#include "histoseg/preprocessor.hpp"
#include "histoseg/reporter.hpp"
#include "histoseg/trainer.hpp"
#include "histoseg/unet.hpp"

namespace histoseg {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

void require_path(std::string_view key, const fs::path& path) {
  if (path.empty() || !fs::exists(path)) {
    throw Error("config", ErrorCode::ConfigError,
                std::string(key) + ": path '" + path.string() + "' does not exist");
  }
}

std::string read_text(std::string_view module, const fs::path& path, std::string_view hint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(module, ErrorCode::IoError,
                "cannot read " + path.string() + " (" + std::string(hint) + ")");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(std::string_view module, const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(module, ErrorCode::IoError, "cannot write " + path.string());
}

SuperclassTable load_table(const PipelineConfig& config) {
  if (config.superclass_table.empty()) return {};
  require_path("data.superclass_table", config.superclass_table);
  return SuperclassTable::load(config.superclass_table);
}

std::vector<std::string> ids_of(const std::vector<SampleFiles>& files) {
  std::vector<std::string> ids;
  ids.reserve(files.size());
  for (const auto& f : files) ids.push_back(f.id);
  return ids;
}

std::vector<SampleFiles> multi_samples(const PipelineConfig& config) {
  if (config.multi_root.empty() || !fs::exists(config.multi_root)) return {};
  return list_samples(config.multi_root);
}

struct Roles {
  DatasetVariant variant = DatasetVariant::SingleRater;
  TargetShape target;
  VariantAssignment assignment;
};

std::string roles_to_json(const Roles& roles) {
  Json j;
  j["variant"] = variant_name(roles.variant);
  j["side"] = roles.target.side;
  j["divisor"] = roles.target.divisor;
  j["strip_bbox"] = roles.assignment.strip_bbox;
  j["train"] = roles.assignment.train;
  j["val"] = roles.assignment.val;
  j["eval"] = roles.assignment.eval;
  return j.dump(2) + "\n";
}

Roles read_roles(std::string_view module, const OutputLayout& layout, DatasetVariant variant) {
  const fs::path path = layout.prepared(variant) / "roles.json";
  const std::string text = read_text(module, path, "run prepare first");
  try {
    const Json j = Json::parse(text);
    Roles roles;
    roles.variant = variant;
    roles.target = {j.at("side").get<int>(), j.at("divisor").get<int>()};
    roles.assignment.strip_bbox = j.at("strip_bbox").get<bool>();
    roles.assignment.train = j.at("train").get<std::vector<std::string>>();
    roles.assignment.val = j.at("val").get<std::vector<std::string>>();
    roles.assignment.eval = j.at("eval").get<std::vector<std::string>>();
    return roles;
  } catch (const nlohmann::json::exception& e) {
    throw Error(module, ErrorCode::FormatError, path.string() + ": " + e.what());
  }
}

// Sample files by id, looking in the root that owns each role for the variant.
class SampleLookup {
 public:
  SampleLookup(const PipelineConfig& config, DatasetVariant variant) : variant_(variant) {
    for (auto& f : list_samples(config.root)) single_.emplace(f.id, std::move(f));
    for (auto& f : multi_samples(config)) multi_.emplace(f.id, std::move(f));
  }

  const SampleFiles& train_or_val(const std::string& id) const { return find(single_, id); }
  const SampleFiles& eval(const std::string& id) const {
    return find(variant_ == DatasetVariant::CombinedMultiRaterEval ? multi_ : single_, id);
  }

 private:
  static const SampleFiles& find(const std::map<std::string, SampleFiles>& from, const std::string& id) {
    const auto it = from.find(id);
    if (it == from.end()) {
      throw Error("dataset", ErrorCode::EmptyDataset, "sample '" + id + "' is no longer on disk");
    }
    return it->second;
  }

  DatasetVariant variant_;
  std::map<std::string, SampleFiles> single_;
  std::map<std::string, SampleFiles> multi_;
};

std::vector<PreparedSample> read_archives(const OutputLayout& layout, DatasetVariant variant,
                                          const std::vector<std::string>& ids) {
  std::vector<PreparedSample> out(ids.size());
  parallel_for(ids.size(), [&](std::size_t i) {
    out[i] = read_prepared(layout.prepared(variant) / (ids[i] + ".hsp"));
  });
  return out;
}

ClassMap argmax_classes(const Tensor& probs) {
  const int classes = probs.dim(1);
  const int h = probs.dim(2);
  const int w = probs.dim(3);
  ClassMap out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int best = 0;
      for (int c = 1; c < classes; ++c) {
        if (probs.at(0, c, y, x) > probs.at(0, best, y, x)) best = c;
      }
      out.at(y, x) = static_cast<Superclass>(best);
    }
  }
  return out;
}

}  // namespace

void run_explore(const PipelineConfig& config, std::ostream& log) {
  require_path("data.root", config.root);
  const SuperclassTable table = load_table(config);
  const DatasetSummary summary = scan_dataset(config.root, table);
  compute_target_shape(summary, config.divisor);
  const auto ids = ids_of(list_samples(config.root));
  const SplitIndex split = make_split(ids, config.ratios, config.split_seed);

  const OutputLayout layout{config.output};
  write_text("dataset_explorer", layout.summary(), summary_to_json(summary));
  write_text("dataset_explorer", layout.split(), split_to_json(split));
  log << "explore: " << summary.n_samples << " samples, split " << split.train.size() << "/"
      << split.val.size() << "/" << split.eval.size() << "\n";
}

void run_prepare(const PipelineConfig& config, std::ostream& log) {
  require_path("data.root", config.root);
  const OutputLayout layout{config.output};
  const SuperclassTable table = load_table(config);
  const DatasetSummary summary =
      summary_from_json(read_text("preprocessor", layout.summary(), "run explore first"));
  const SplitIndex split = split_from_json(read_text("preprocessor", layout.split(), "run explore first"));
  const TargetShape target = compute_target_shape(summary, config.divisor);
  const auto single_ids = ids_of(list_samples(config.root));
  const auto multi_ids = ids_of(multi_samples(config));

  for (const DatasetVariant variant : config.prepare_variants) {
    Roles roles{variant, target, assemble_variant(variant, split, single_ids, multi_ids)};
    const SampleLookup lookup(config, variant);

    struct Job {
      const SampleFiles* files;
    };
    std::vector<Job> jobs;
    for (const auto* list : {&roles.assignment.train, &roles.assignment.val}) {
      for (const auto& id : *list) jobs.push_back({&lookup.train_or_val(id)});
    }
    for (const auto& id : roles.assignment.eval) jobs.push_back({&lookup.eval(id)});

    const fs::path dir = layout.prepared(variant);
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::vector<std::size_t> orphans(jobs.size(), 0);
    parallel_for(jobs.size(), [&](std::size_t i) {
      const TileSample sample = load_sample(*jobs[i].files, config.columns);
      std::vector<std::uint32_t> orphan_ids;
      const CroppedSample cropped =
          crop_stage(sample, table, roles.assignment.strip_bbox, config.crop_anchor, &orphan_ids);
      orphans[i] = orphan_ids.size();
      write_prepared(dir / (sample.id + ".hsp"), finalize_sample(cropped, target));
    });
    write_text("preprocessor", dir / "roles.json", roles_to_json(roles));

    std::size_t orphan_total = 0;
    for (const auto n : orphans) orphan_total += n;
    log << "prepare: " << variant_name(variant) << ": " << jobs.size() << " archives at side "
        << target.side;
    if (orphan_total) log << ", " << orphan_total << " box records with no mask pixels";
    log << "\n";
  }
}

void run_train(const PipelineConfig& config, std::ostream& log) {
  require_path("data.root", config.root);
  const OutputLayout layout{config.output};
  const SuperclassTable table = load_table(config);
  const Roles roles = read_roles("trainer", layout, config.variant);
  config.network.validate_input_side(roles.target.side);

  const SampleLookup lookup(config, config.variant);
  const auto& train_ids = roles.assignment.train;
  std::vector<CroppedSample> cropped(train_ids.size());
  parallel_for(train_ids.size(), [&](std::size_t i) {
    const TileSample sample = load_sample(lookup.train_or_val(train_ids[i]), config.columns);
    cropped[i] = crop_stage(sample, table, roles.assignment.strip_bbox, config.crop_anchor);
  });
  std::optional<AugmentConfig> augment;
  if (config.augment_enabled) augment = config.augment;
  const AugmentedSamples train(std::move(cropped), roles.target, augment);
  const StaticSamples val(read_archives(layout, config.variant, roles.assignment.val));

  const FitResult result = fit(build_unet(config.network, config.network_seed), train, val, config.train);
  fs::create_directories(layout.model());
  save_checkpoint(layout.model() / "best.ckpt", result.best);
  save_checkpoint(layout.model() / "last.ckpt", result.last);
  write_text("trainer", layout.model() / "train_log.csv", result.log.to_csv());

  const auto& rows = result.log.rows;
  log << "train: " << rows.size() << " epochs, best epoch " << result.best_epoch;
  if (!rows.empty()) log << ", final val loss " << rows.back().val_loss;
  if (result.skipped_steps) log << ", " << result.skipped_steps << " skipped steps";
  log << "\n";
}

void run_evaluate(const PipelineConfig& config, std::ostream& log) {
  const OutputLayout layout{config.output};
  const Roles roles = read_roles("metrics", layout, config.variant);
  const fs::path ckpt = layout.model() / "best.ckpt";
  if (!fs::exists(ckpt)) {
    throw Error("metrics", ErrorCode::IoError, "missing " + ckpt.string() + " (run train first)");
  }
  const Network net = load_checkpoint(ckpt);
  const auto samples = read_archives(layout, config.variant, roles.assignment.eval);

  std::vector<LabeledPrediction> pairs;
  pairs.reserve(samples.size());
  fs::remove_all(layout.predictions());
  fs::create_directories(layout.predictions());
  for (const auto& sample : samples) {
    const PreparedSample one[] = {sample};
    const ClassMap pred = argmax_classes(forward(net, stack_pixels(one)).probs);
    ByteRaster labels(pred.height(), pred.width());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      labels.data()[i] = static_cast<std::uint8_t>(pred.data()[i]);
    }
    write_png(layout.predictions() / (sample.sample_id + ".png"), labels);
    pairs.push_back({sample.sample_id, pred, onehot_argmax(sample.onehot)});
  }

  const EvaluationReport report = evaluate_dataset(pairs, config.metric_classes);
  write_text("metrics", layout.results(), results_to_csv(report));
  log << "evaluate: " << pairs.size() << " samples, mean mcc " << report.overall.mcc << ", "
      << report.degenerate_scores << " degenerate scores\n";
}

void run_report(const PipelineConfig& config, std::ostream& log) {
  require_path("data.root", config.root);
  const OutputLayout layout{config.output};
  const std::string csv = read_text("reporter", layout.results(), "run evaluate first");
  const ResultsTable table = parse_results_csv(csv);
  const auto figures = render_boxplots(table);

  fs::remove_all(layout.report());
  fs::create_directories(layout.report());
  for (const auto& [metric, svg] : figures) {
    write_text("reporter", layout.report() / ("boxplot_" + metric + ".svg"), svg);
  }
  write_text("reporter", layout.report() / "results.csv", csv);

  const Roles roles = read_roles("reporter", layout, config.variant);
  const SampleLookup lookup(config, config.variant);
  const auto& eval_ids = roles.assignment.eval;
  const std::size_t count = std::min(eval_ids.size(), static_cast<std::size_t>(config.overlay_count));
  parallel_for(count, [&](std::size_t i) {
    const TileSample sample = load_sample(lookup.eval(eval_ids[i]), config.columns);
    const SuperclassTable plain;
    const CroppedSample cropped = crop_stage(sample, plain, false, config.crop_anchor);
    const RgbImage tile = to_bytes(fit_to_target(cropped.image, roles.target));
    const ByteRaster labels = read_png(layout.predictions() / (eval_ids[i] + ".png"), 1);
    ClassMap pred(labels.height(), labels.width());
    for (std::size_t p = 0; p < labels.size(); ++p) {
      const auto v = labels.data()[p];
      if (v >= kSuperclassCount) {
        throw Error("reporter", ErrorCode::FormatError,
                    "prediction for '" + eval_ids[i] + "' holds label " + std::to_string(v));
      }
      pred.data()[p] = static_cast<Superclass>(v);
    }
    write_png(layout.report() / ("overlay_" + eval_ids[i] + ".png"),
              render_overlay(tile, pred, config.overlay_alpha));
  });
  log << "report: " << figures.size() << " figures, " << count << " overlays\n";
}

void run_make_fixture(const PipelineConfig& config, std::ostream& log) {
  if (config.root.empty() || config.superclass_table.empty()) {
    throw Error("config", ErrorCode::ConfigError,
                "data.root and data.superclass_table must be set for make-fixture");
  }
  write_fixture(config.fixture, config.root, config.multi_root, config.superclass_table);
  log << "make-fixture: " << config.fixture.samples << " single-rater and "
      << (config.multi_root.empty() ? 0 : config.fixture.multi_samples)
      << " multi-rater samples at side " << config.fixture.side << "\n";
}

}  // namespace histoseg
