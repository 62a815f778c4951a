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

#include "histoseg/cli.hpp"

#include <functional>
#include <string>
#include <vector>

#include <filesystem>

#include <CLI11.hpp>

#include "histoseg/config.hpp"
#include "histoseg/errors.hpp"
#include "histoseg/pipeline.hpp"

namespace histoseg {

namespace {

using Runner = void (*)(const PipelineConfig&, std::ostream&);

struct Subcommand {
  const char* name;
  const char* help;
  Runner run;
};

constexpr Subcommand kSubcommands[] = {
    {"explore", "scan the dataset, write summary.json and split.json", run_explore},
    {"prepare", "write preprocessed archives for each dataset variant", run_prepare},
    {"train", "fit the network, write checkpoints and train_log.csv", run_train},
    {"evaluate", "score the eval set, write results.csv", run_evaluate},
    {"report", "render boxplots and overlays into report/", run_report},
    {"make-fixture", "write the synthetic mini-dataset", run_make_fixture},
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"histoseg: nucleus segmentation pipeline", "histoseg"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  const Subcommand* chosen = nullptr;
  for (const auto& sub : kSubcommands) {
    CLI::App* cmd = app.add_subcommand(sub.name, sub.help);
    cmd->add_option("--config", config_path, "INI configuration file")->required();
    cmd->add_option("--set", overrides, "override a key, section.key=value")->take_all();
    cmd->callback([&chosen, &sub] { chosen = &sub; });
  }

  // explore shortcuts; they apply before any --set.
  std::vector<std::string> shortcuts;
  CLI::App* explore = app.get_subcommand("explore");
  const std::pair<const char*, const char*> kExploreFlags[] = {
      {"--root", "data.root"}, {"--divisor", "explore.divisor"}, {"--seed", "split.seed"},
      {"--ratios", "split.ratios"}};
  for (const auto& [flag, key] : kExploreFlags) {
    explore->add_option_function<std::string>(
        flag, [&shortcuts, key = std::string(key)](const std::string& v) {
          // A path typed on the command line is relative to the working directory.
          const std::string value = key == "data.root" ? std::filesystem::absolute(v).string() : v;
          shortcuts.push_back(key + "=" + value);
        },
        "shortcut for --set " + std::string(key) + "=...");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "histoseg: " << e.what() << "\n";
    return 2;
  }

  try {
    shortcuts.insert(shortcuts.end(), overrides.begin(), overrides.end());
    const PipelineConfig config = load_pipeline_config(config_path, shortcuts);
    chosen->run(config, out);
  } catch (const Error& e) {
    err << "histoseg: " << chosen->name << " failed in module " << e.module() << ": "
        << to_string(e.code()) << ": " << e.detail() << "\n";
    return e.code() == ErrorCode::ConfigError ? 2 : 1;
  } catch (const std::exception& e) {
    err << "histoseg: " << chosen->name << " failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace histoseg
