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

/**
 * \file harness.hpp
 * \brief Closed-loop experiment runner: plant, controller, recommender and
 * metrics for a multi-run schedule.
 *
 * The recommender's asynchronous contract is emulated deterministically: a
 * recommendation cycle runs between control steps and its result is
 * published before the controller reads the control model. Ground-truth
 * labels are used only for confusion matrices and reporting.
 */
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "expreco/experience_store.hpp"
#include "expreco/gp.hpp"
#include "expreco/metrics.hpp"
#include "expreco/mpc.hpp"
#include "expreco/recommender.hpp"
#include "expreco/schedule.hpp"

namespace expreco {

struct ExperimentConfig {
  ControllerConfig controller;
  RecommenderConfig recommender;
  std::vector<gp::Hyperparameters> hypers{gp::Hyperparameters::defaults(), gp::Hyperparameters::defaults(),
                                          gp::Hyperparameters::defaults()};
  /// A run is aborted when |lateral error| exceeds this (m).
  double divergence_limit = 2.0;
  /// A run is aborted when it takes longer than this multiple of the nominal
  /// lap time.
  double lap_time_factor = 3.0;
  /// Keep per-candidate score records in memory and in the logs.
  bool record_scores = true;
  /// When set, experiences are persisted to this directory as they arrive.
  std::optional<std::filesystem::path> store_dir;
};

struct StepRecord {
  std::size_t step = 0;
  double t = 0.0;
  VehicleState state;
  VertexId vertex = 0;
  TrackingError error;
  Command command;
  double stage_cost = 0.0;
  gp::Prediction gp_theta;  // control GP at the applied feature, g_theta
  std::size_t control_set_size = 0;
  bool safety_flag = false;
  bool fault = false;
};

struct ScoreRecord {
  std::size_t step = 0;
  RunScore score;
  bool chosen = false;
};

struct RunMetrics {
  double m_rmse = 0.0;  // rad/s
  double m_rmsz = 0.0;
  double cumulative_cost = 0.0;
  double average_speed = 0.0;  // m/s
  std::map<std::string, double> source_fractions;  // by ground-truth label, plus "none"
  double none_fraction = 0.0;
  std::size_t steps = 0;
  std::size_t safety_flags = 0;
};

struct RunReport {
  std::size_t index = 0;
  RunId run;
  std::string mode;
  bool failed = false;
  std::string failure;
  RunMetrics metrics;
  std::vector<StepRecord> steps;
  std::vector<ScoreRecord> scores;
  std::vector<RecommendationEvent> events;
};

struct ExperimentReport {
  Method method = Method::Proposed;
  std::uint64_t seed = 0;
  std::vector<RunReport> runs;
  std::map<RunId, std::string> labels;  // ground truth, reporting only
  ConfusionMatrix confusion;

  bool anyFailed() const;
  double totalCost() const;
};

ExperimentReport runExperiment(const ExperimentSchedule &schedule, const ExperimentConfig &config);

/// report.json plus run_NNN_steps.csv, run_NNN_scores.csv, run_NNN_events.csv.
void writeReport(const ExperimentReport &report, const std::filesystem::path &dir);

/// Per-run scalar metrics as read back from report.json.
struct ReportSummary {
  std::string method;
  std::uint64_t seed = 0;
  struct Run {
    std::size_t index = 0;
    std::string mode;
    bool failed = false;
    double m_rmse = 0.0;
    double m_rmsz = 0.0;
    double cumulative_cost = 0.0;
    double average_speed = 0.0;
    double none_fraction = 0.0;
  };
  std::vector<Run> runs;
  ConfusionMatrix confusion;
};

ReportSummary readReport(const std::filesystem::path &dir);
std::string formatReport(const ReportSummary &summary);
/// Paired per-run deltas (b - a) and totals.
std::string formatComparison(const ReportSummary &a, const ReportSummary &b);

}  // namespace expreco
