// Copyright 2026, The expreco Authors
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

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "expreco/harness.hpp"

namespace {

// RUN:STEP:MODE
expreco::MidRunSwitch parseSwitch(const std::string &text, std::size_t &run_index) {
  std::istringstream in(text);
  std::string run, step, mode;
  if (!std::getline(in, run, ':') || !std::getline(in, step, ':') || !std::getline(in, mode) || mode.empty()) {
    throw expreco::ConfigError("--mid-run-switch expects RUN:STEP:MODE, got '" + text + "'");
  }
  run_index = std::stoul(run);
  return {std::stoul(step), mode};
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Safe-learning MPC experiments with experience recommendation"};
  app.require_subcommand(1);

  std::string schedule_file, method, out_dir, switch_text, store_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  auto *run = app.add_subcommand("run", "run a schedule and write logs and report.json");
  run->add_option("--schedule", schedule_file, "schedule YAML")->required()->check(CLI::ExistingFile);
  run->add_option("--method", method, "proposed | last_run | prior_only (overrides the schedule)");
  auto *seed_opt = run->add_option("--seed", seed, "experiment seed (overrides the schedule)");
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--mid-run-switch", switch_text, "RUN:STEP:MODE, switch the plant mode during a run");
  run->add_option("--store", store_dir, "persist experiences to this directory");

  std::string in_dir;
  auto *report = app.add_subcommand("report", "print per-run metrics from a result directory");
  report->add_option("--in", in_dir, "result directory")->required()->check(CLI::ExistingDirectory);

  std::string dir_a, dir_b;
  auto *compare = app.add_subcommand("compare", "paired per-run deltas between two result directories");
  compare->add_option("--a", dir_a, "baseline result directory")->required()->check(CLI::ExistingDirectory);
  compare->add_option("--b", dir_b, "result directory to compare")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  seed_given = seed_opt->count() > 0;

  try {
    if (*run) {
      auto schedule = expreco::loadSchedule(schedule_file);
      if (!method.empty()) schedule.method = expreco::parseMethod(method);
      if (seed_given) schedule.seed = seed;
      if (!switch_text.empty()) {
        std::size_t index = 0;
        const auto sw = parseSwitch(switch_text, index);
        if (index == 0 || index > schedule.runs.size()) {
          throw expreco::ConfigError("--mid-run-switch: no run " + std::to_string(index));
        }
        schedule.runs[index - 1].mid_run_switch = sw;
      }
      schedule.validate();
      expreco::ExperimentConfig config;
      if (!store_dir.empty()) config.store_dir = store_dir;
      const auto result = expreco::runExperiment(schedule, config);
      expreco::writeReport(result, out_dir);
      std::cout << expreco::formatReport(expreco::readReport(out_dir));
      for (const auto &r : result.runs) {
        if (r.failed) std::cerr << "run " << r.index << " failed: " << r.failure << "\n";
      }
      return result.anyFailed() ? 2 : 0;
    }
    if (*report) {
      std::cout << expreco::formatReport(expreco::readReport(in_dir));
      return 0;
    }
    if (*compare) {
      std::cout << expreco::formatComparison(expreco::readReport(dir_a), expreco::readReport(dir_b));
      return 0;
    }
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
