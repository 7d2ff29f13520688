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
 * \file recommender.hpp
 * \brief Experience recommendation: per-run local GPs, binomial 3-sigma
 * outlier rejection, posterior log-probability ranking and the incremental
 * control-GP set update.
 *
 * Every entry point here consumes experience data only. Ground-truth mode
 * labels never reach this module.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "expreco/experience_store.hpp"
#include "expreco/gp.hpp"
#include "expreco/vehicle.hpp"

namespace expreco {

struct RecommenderConfig {
  double alpha = 0.05;
  /// Per-trial outlier probability: two-sided 3 sigma Gaussian mass.
  double outlier_probability = 0.0027;
  std::size_t n_add = 10;
  std::size_t n_control = 50;
  std::size_t n_drop = 10;
  /// Live window D_n^-: the most recent samples of the live run (3 s at 10 Hz).
  std::size_t live_window_samples = 30;
  /// Ahead window feeding the control GP, in vertices (one MPC horizon).
  std::size_t ahead_vertices = 15;
  std::size_t max_candidate_runs = 300;
  /// Recommendation is skipped until the live window holds this many samples.
  std::size_t min_live_samples = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RunScore {
  RunId run;
  double p_b = 1.0;
  bool accepted = false;
  double log_likelihood = 0.0;        // L_i, nats
  double prior_log_likelihood = 0.0;  // same data under the GP prior
  std::size_t n_out = 0;
  std::size_t trials = 0;
  std::size_t m_n = 0;
  std::string diagnostic;
};

struct OutlierCount {
  std::size_t n_out = 0;
  std::size_t trials = 0;
};

/// P(X >= n_out) for X ~ Binomial(m, p), summed exactly in log space.
double binomialTail(std::size_t n_out, std::size_t m, double p);

/// Largest outlier count that still passes the test at level alpha.
std::size_t maxAcceptedOutliers(std::size_t trials, double p, double alpha);

/// One Bernoulli trial per (sample, dimension); outlier iff |g - mu| > 3 sigma.
OutlierCount countOutliers(const gp::PredictionTable &predictions, const Eigen::MatrixXd &observations);

/// Scores a candidate run window against the live window.
RunScore scoreRun(RunId run, std::span<const Experience> candidate, std::span<const Experience> live,
                  const std::vector<gp::Hyperparameters> &hypers, const RecommenderConfig &config);

struct CandidateWindow {
  RunId run;
  std::vector<Experience> experiences;
};

struct Recommendation {
  std::optional<RunId> run;
  std::vector<RunScore> scores;
};

/// Accepted run with the largest L_i, ties to the most recent run id.
Recommendation recommend(std::span<const Experience> live, std::span<const CandidateWindow> candidates,
                         const std::vector<gp::Hyperparameters> &hypers, const RecommenderConfig &config);

struct ControlGPSet {
  std::vector<Experience> experiences;
  std::uint64_t generation = 0;
};

/// With a recommendation: add up to n_add drawn from `recommended`, then keep
/// up to n_control drawn from the union. Without: drop up to n_drop.
ControlGPSet updateControlSet(const ControlGPSet &current,
                              const std::optional<std::vector<Experience>> &recommended, Rng &rng,
                              const RecommenderConfig &config);

/// The control GP as seen by the controller: the experience set and its fit.
struct ControlModel {
  ControlGPSet set;
  gp::GPModel model;
};

std::shared_ptr<const ControlModel> makeControlModel(ControlGPSet set, const std::vector<gp::Hyperparameters> &hypers);

/// Latest fully built control model. Readers never block on a writer beyond
/// a pointer swap and never see a partially updated set.
class ControlModelPublisher {
 public:
  explicit ControlModelPublisher(std::shared_ptr<const ControlModel> initial);

  void publish(std::shared_ptr<const ControlModel> model);
  std::shared_ptr<const ControlModel> latest() const;

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const ControlModel> current_;
};

/// Result of one recommendation cycle.
struct RecommendationCycle {
  bool skipped = true;  // live window too short
  VertexId window_first = 0;
  VertexId window_last = 0;
  Recommendation recommendation;
};

/// Runs the full cycle against a store snapshot: live window by time,
/// candidate windows over the same vertex range, scoring, then the control
/// set update from the recommended run's ahead window.
class ExperienceRecommender {
 public:
  ExperienceRecommender(RecommenderConfig config, std::vector<gp::Hyperparameters> hypers);

  const RecommenderConfig &config() const { return config_; }
  const std::vector<gp::Hyperparameters> &hypers() const { return hypers_; }

  /// live: the tail of the live run in time order; current: the vehicle's
  /// vertex; control: the set to update in place.
  RecommendationCycle step(const StoreSnapshot &snapshot, std::span<const Experience> live, VertexId current,
                           ControlGPSet &control, Rng &rng) const;

 private:
  RecommenderConfig config_;
  std::vector<gp::Hyperparameters> hypers_;
};

}  // namespace expreco
