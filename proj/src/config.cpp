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

#include "histoseg/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "histoseg/errors.hpp"

namespace histoseg {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kModule = "config";

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  while (true) {
    const auto comma = text.find(',');
    const auto item = trim(text.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
  }
  return out;
}

[[noreturn]] void fail(std::string_view key, const std::string& why) {
  throw Error(kModule, ErrorCode::ConfigError, std::string(key) + ": " + why);
}

// Typed access that remembers which keys were read so leftovers can be
// reported as unknown.
class Reader {
 public:
  Reader(const IniDocument& doc, fs::path base) : doc_(doc), base_(std::move(base)) {}

  template <typename Fn>
  void with(std::string_view key, Fn&& fn) {
    used_.insert(std::string(key));
    if (const std::string* v = doc_.find(key)) fn(trim(*v));
  }

  void real(std::string_view key, double& out) {
    with(key, [&](std::string_view v) { out = parse_real(key, v); });
  }
  void integer(std::string_view key, int& out) {
    with(key, [&](std::string_view v) { out = static_cast<int>(parse_int(key, v)); });
  }
  void u64(std::string_view key, std::uint64_t& out) {
    with(key, [&](std::string_view v) {
      const auto value = parse_int(key, v);
      if (value < 0) fail(key, "expected a non-negative integer");
      out = static_cast<std::uint64_t>(value);
    });
  }
  void boolean(std::string_view key, bool& out) {
    with(key, [&](std::string_view v) {
      if (v == "true" || v == "1" || v == "yes" || v == "on") out = true;
      else if (v == "false" || v == "0" || v == "no" || v == "off") out = false;
      else fail(key, "expected true or false, got '" + std::string(v) + "'");
    });
  }
  void path(std::string_view key, fs::path& out) {
    with(key, [&](std::string_view v) {
      if (v.empty()) {
        out.clear();
        return;
      }
      const fs::path p{std::string(v)};
      out = (p.is_absolute() ? p : base_ / p).lexically_normal();
    });
  }
  void text(std::string_view key, std::string& out) {
    with(key, [&](std::string_view v) { out = std::string(v); });
  }
  void interval(std::string_view key, Interval& out) {
    with(key, [&](std::string_view v) {
      const auto parts = split_list(v);
      if (parts.size() != 2) fail(key, "expected two comma-separated numbers");
      out = {parse_real(key, parts[0]), parse_real(key, parts[1])};
    });
  }

  void reject_unknown() const {
    for (const auto& [key, value] : doc_.values()) {
      if (!used_.contains(key)) fail(key, "unknown configuration key");
    }
  }

  static double parse_real(std::string_view key, std::string_view v) {
    try {
      std::size_t used = 0;
      const double value = std::stod(std::string(v), &used);
      if (used != v.size()) throw std::invalid_argument("trailing");
      return value;
    } catch (const std::exception&) {
      fail(key, "expected a number, got '" + std::string(v) + "'");
    }
  }
  static long long parse_int(std::string_view key, std::string_view v) {
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
    if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty()) {
      fail(key, "expected an integer, got '" + std::string(v) + "'");
    }
    return value;
  }

 private:
  const IniDocument& doc_;
  fs::path base_;
  std::set<std::string, std::less<>> used_;
};

}  // namespace

IniDocument IniDocument::parse(std::string_view text, std::string_view source) {
  IniDocument doc;
  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#' || view.front() == ';') continue;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    if (view.front() == '[') {
      if (view.back() != ']') {
        throw Error(kModule, ErrorCode::ConfigError, where + ": unterminated section header");
      }
      section = std::string(trim(view.substr(1, view.size() - 2)));
      continue;
    }
    const auto eq = view.find('=');
    if (eq == std::string_view::npos || section.empty()) {
      throw Error(kModule, ErrorCode::ConfigError,
                  where + (section.empty() ? ": key outside any section" : ": expected key = value"));
    }
    std::string_view value = trim(view.substr(eq + 1));
    if (const auto hash = value.find(" #"); hash != std::string_view::npos) value = trim(value.substr(0, hash));
    doc.set(section + "." + std::string(trim(view.substr(0, eq))), std::string(value));
  }
  return doc;
}

IniDocument IniDocument::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(kModule, ErrorCode::ConfigError, "cannot read config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

void IniDocument::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto key = trim(assignment.substr(0, eq));
  if (eq == std::string_view::npos || key.find('.') == std::string_view::npos) {
    throw Error(kModule, ErrorCode::ConfigError,
                "override '" + std::string(assignment) + "' must look like section.key=value");
  }
  set(std::string(key), std::string(trim(assignment.substr(eq + 1))));
}

const std::string* IniDocument::find(std::string_view key) const {
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

PipelineConfig parse_pipeline_config(const IniDocument& doc, const fs::path& base_dir) {
  PipelineConfig cfg;
  Reader r(doc, base_dir);

  r.path("data.root", cfg.root);
  r.path("data.multi_root", cfg.multi_root);
  cfg.output = (base_dir / cfg.output).lexically_normal();
  r.path("data.output", cfg.output);
  r.path("data.superclass_table", cfg.superclass_table);
  r.with("data.variant", [&](std::string_view v) {
    const auto variant = parse_variant(v);
    if (!variant) fail("data.variant", "expected single, single_nobbox or combined");
    cfg.variant = *variant;
  });
  r.with("data.crop_anchor", [&](std::string_view v) {
    if (v == "top-left") cfg.crop_anchor = CropAnchor::TopLeft;
    else if (v == "center") cfg.crop_anchor = CropAnchor::Center;
    else fail("data.crop_anchor", "expected top-left or center");
  });

  r.text("localization.instance_id", cfg.columns.instance_id);
  r.text("localization.raw_class", cfg.columns.raw_class);
  r.text("localization.kind", cfg.columns.kind);
  r.text("localization.xmin", cfg.columns.xmin);
  r.text("localization.ymin", cfg.columns.ymin);
  r.text("localization.xmax", cfg.columns.xmax);
  r.text("localization.ymax", cfg.columns.ymax);
  r.text("localization.coords", cfg.columns.coords);

  r.with("split.ratios", [&](std::string_view v) {
    const auto parts = split_list(v);
    if (parts.size() != 3) fail("split.ratios", "expected three comma-separated ratios");
    for (std::size_t i = 0; i < 3; ++i) cfg.ratios[i] = Reader::parse_real("split.ratios", parts[i]);
    const double sum = cfg.ratios[0] + cfg.ratios[1] + cfg.ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) fail("split.ratios", "ratios must sum to 1");
  });
  r.u64("split.seed", cfg.split_seed);
  r.integer("explore.divisor", cfg.divisor);

  r.with("prepare.variants", [&](std::string_view v) {
    cfg.prepare_variants.clear();
    for (const auto& name : split_list(v)) {
      const auto variant = parse_variant(name);
      if (!variant) fail("prepare.variants", "unknown variant '" + name + "'");
      cfg.prepare_variants.push_back(*variant);
    }
    if (cfg.prepare_variants.empty()) fail("prepare.variants", "list at least one variant");
  });

  auto& a = cfg.augment;
  r.boolean("augment.enabled", cfg.augment_enabled);
  r.real("augment.p_mirror", a.p_mirror);
  r.real("augment.p_rotate", a.p_rotate);
  r.real("augment.p_scale", a.p_scale);
  r.real("augment.p_elastic", a.p_elastic);
  r.real("augment.p_intensity", a.p_intensity);
  r.real("augment.p_noise", a.p_noise);
  r.interval("augment.scale_range", a.scale_range);
  r.real("augment.elastic_alpha", a.elastic_alpha);
  r.real("augment.elastic_sigma", a.elastic_sigma);
  r.real("augment.brightness_delta", a.brightness_delta);
  r.interval("augment.contrast_range", a.contrast_range);
  r.interval("augment.gamma_range", a.gamma_range);
  r.real("augment.noise_sigma", a.noise_sigma);
  r.boolean("augment.free_rotation", a.free_rotation);
  r.real("augment.max_rotation_degrees", a.max_rotation_degrees);
  r.u64("augment.seed", a.seed);

  r.integer("network.depth", cfg.network.depth);
  r.integer("network.base_filters", cfg.network.base_filters);
  r.u64("network.seed", cfg.network_seed);

  auto& t = cfg.train;
  r.real("train.lr", t.lr);
  r.real("train.factor", t.factor);
  r.real("train.min_lr", t.min_lr);
  r.real("train.min_delta", t.min_delta);
  r.integer("train.plateau_patience", t.plateau_patience);
  r.integer("train.stop_patience", t.stop_patience);
  r.integer("train.batch_size", t.batch_size);
  r.integer("train.max_epochs", t.max_epochs);
  r.real("train.tversky_alpha", t.tversky.alpha);
  r.real("train.tversky_beta", t.tversky.beta);
  r.real("train.tversky_smooth", t.tversky.smooth);
  r.with("train.optimizer", [&](std::string_view v) {
    if (v == "sgd") t.optimizer = OptimizerKind::Sgd;
    else if (v == "adam") t.optimizer = OptimizerKind::Adam;
    else fail("train.optimizer", "expected sgd or adam");
  });
  r.real("train.momentum", t.momentum);
  r.u64("train.seed", t.seed);

  r.with("metrics.classes", [&](std::string_view v) {
    cfg.metric_classes.clear();
    for (const auto& name : split_list(v)) {
      const auto cls = parse_superclass(name);
      if (!cls) fail("metrics.classes", "unknown class '" + name + "'");
      cfg.metric_classes.push_back(*cls);
    }
    if (cfg.metric_classes.empty()) fail("metrics.classes", "list at least one class");
  });

  r.real("report.overlay_alpha", cfg.overlay_alpha);
  r.integer("report.overlay_count", cfg.overlay_count);

  r.integer("fixture.samples", cfg.fixture.samples);
  r.integer("fixture.multi_samples", cfg.fixture.multi_samples);
  r.integer("fixture.side", cfg.fixture.side);
  r.u64("fixture.seed", cfg.fixture.seed);

  r.reject_unknown();

  auto need = [](std::string_view key, bool ok, std::string_view rule) {
    if (!ok) fail(key, std::string(rule));
  };
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  need("augment.p_mirror", unit(a.p_mirror), "must lie in [0,1]");
  need("augment.p_rotate", unit(a.p_rotate), "must lie in [0,1]");
  need("augment.p_scale", unit(a.p_scale), "must lie in [0,1]");
  need("augment.p_elastic", unit(a.p_elastic), "must lie in [0,1]");
  need("augment.p_intensity", unit(a.p_intensity), "must lie in [0,1]");
  need("augment.p_noise", unit(a.p_noise), "must lie in [0,1]");
  need("augment.scale_range", a.scale_range.lo > 0.0 && a.scale_range.lo <= a.scale_range.hi,
       "must be positive and ordered");
  need("augment.contrast_range", a.contrast_range.lo <= a.contrast_range.hi, "must be ordered");
  need("augment.gamma_range", a.gamma_range.lo > 0.0 && a.gamma_range.lo <= a.gamma_range.hi,
       "must be positive and ordered");
  need("augment.elastic_alpha", a.elastic_alpha >= 0.0, "must be >= 0");
  need("augment.elastic_sigma", a.elastic_sigma >= 0.0, "must be >= 0");
  need("augment.brightness_delta", a.brightness_delta >= 0.0, "must be >= 0");
  need("augment.noise_sigma", a.noise_sigma >= 0.0, "must be >= 0");
  need("network.depth", cfg.network.depth >= 1, "must be >= 1");
  need("network.base_filters", cfg.network.base_filters >= 1, "must be >= 1");
  need("train.lr", t.lr > 0.0, "must be > 0");
  need("train.min_lr", t.min_lr > 0.0 && t.min_lr <= t.lr, "must lie in (0, train.lr]");
  need("train.factor", t.factor > 0.0 && t.factor < 1.0, "must lie in (0,1)");
  need("train.min_delta", t.min_delta >= 0.0, "must be >= 0");
  need("train.plateau_patience", t.plateau_patience >= 0, "must be >= 0");
  need("train.stop_patience", t.stop_patience >= 0, "must be >= 0");
  need("train.batch_size", t.batch_size >= 1, "must be >= 1");
  need("train.max_epochs", t.max_epochs >= 1, "must be >= 1");
  need("train.tversky_alpha", t.tversky.alpha >= 0.0, "must be >= 0");
  need("train.tversky_beta", t.tversky.beta >= 0.0, "must be >= 0");
  need("train.tversky_smooth", t.tversky.smooth > 0.0 && t.tversky.smooth <= 1e-3, "must lie in (0, 1e-3]");
  need("train.momentum", t.momentum >= 0.0 && t.momentum < 1.0, "must lie in [0,1)");

  auto check = [](std::string_view key, auto&& validate) {
    try {
      validate();
    } catch (const Error& e) {
      fail(key, e.detail());
    }
  };
  check("augment", [&] { cfg.augment.validate(); });
  check("network", [&] { cfg.network.validate(); });
  check("train", [&] { cfg.train.validate(); });
  if (cfg.divisor < 2 || (cfg.divisor & (cfg.divisor - 1)) != 0) {
    fail("explore.divisor", "must be a power of two >= 2");
  }
  if (!(cfg.overlay_alpha >= 0.0 && cfg.overlay_alpha <= 1.0)) fail("report.overlay_alpha", "must lie in [0,1]");
  if (cfg.overlay_count < 0) fail("report.overlay_count", "must be >= 0");
  if (cfg.fixture.samples < 1 || cfg.fixture.multi_samples < 0 || cfg.fixture.side < 8) {
    fail("fixture", "needs samples >= 1, multi_samples >= 0, side >= 8");
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path, const std::vector<std::string>& overrides) {
  if (!fs::is_regular_file(path)) {
    throw Error(kModule, ErrorCode::ConfigError, "config file " + path.string() + " does not exist");
  }
  IniDocument doc = IniDocument::load(path);
  for (const auto& o : overrides) doc.apply_override(o);
  return parse_pipeline_config(doc, fs::absolute(path).parent_path());
}

}  // namespace histoseg
