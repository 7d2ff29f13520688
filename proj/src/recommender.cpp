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

#include "expreco/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

namespace expreco {

namespace {

// Partial Fisher-Yates: k distinct indices from [0, n), returned sorted.
std::vector<std::size_t> sampleWithoutReplacement(std::size_t n, std::size_t k, Rng &rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double priorLogLikelihood(const Eigen::MatrixXd &outputs, const std::vector<gp::Hyperparameters> &hypers) {
  gp::PredictionTable prior{Eigen::MatrixXd::Zero(outputs.rows(), outputs.cols()),
                            Eigen::MatrixXd(outputs.rows(), outputs.cols())};
  for (Eigen::Index d = 0; d < outputs.cols(); ++d) {
    const auto &h = hypers[static_cast<std::size_t>(d)];
    prior.variance.col(d).setConstant(h.signal_variance + h.noise_variance);
  }
  return gp::logLikelihood(prior, outputs);
}

RunScore scoreAgainstLive(RunId run, std::span<const Experience> candidate, const Eigen::MatrixXd &live_inputs,
                          const Eigen::MatrixXd &live_outputs, double prior_ll,
                          const std::vector<gp::Hyperparameters> &hypers, const RecommenderConfig &config) {
  RunScore score;
  score.run = run;
  score.m_n = static_cast<std::size_t>(live_inputs.rows());
  score.prior_log_likelihood = prior_ll;

  std::optional<gp::GPModel> model;
  try {
    model = gp::fit(featureMatrix(candidate), observationMatrix(candidate), hypers);
  } catch (const gp::FitError &e) {
    score.accepted = false;
    score.p_b = 0.0;
    score.log_likelihood = -std::numeric_limits<double>::infinity();
    score.diagnostic = e.what();
    return score;
  }

  const gp::PredictionTable predictions = model->predictBatch(live_inputs);
  const OutlierCount outliers = countOutliers(predictions, live_outputs);
  score.n_out = outliers.n_out;
  score.trials = outliers.trials;
  score.p_b = binomialTail(outliers.n_out, outliers.trials, config.outlier_probability);
  score.log_likelihood = gp::logLikelihood(predictions, live_outputs);
  // a tie with the prior is not an improvement over having no experience
  score.accepted = score.p_b >= config.alpha && score.log_likelihood > prior_ll;
  if (candidate.empty()) score.diagnostic = "empty candidate window";
  return score;
}

}  // namespace

void RecommenderConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("recommender: alpha must lie in (0, 1)");
  if (!(outlier_probability > 0.0 && outlier_probability < 1.0)) {
    throw std::invalid_argument("recommender: outlier probability must lie in (0, 1)");
  }
  if (live_window_samples == 0 || ahead_vertices == 0) {
    throw std::invalid_argument("recommender: window sizes must be positive");
  }
}

double binomialTail(std::size_t n_out, std::size_t m, double p) {
  if (n_out > m) throw std::invalid_argument("binomialTail: n_out exceeds m");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("binomialTail: p must lie in (0, 1)");
  if (n_out == 0) return 1.0;

  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_m_fact = std::lgamma(static_cast<double>(m) + 1.0);
  std::vector<double> terms;
  terms.reserve(m - n_out + 1);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t x = n_out; x <= m; ++x) {
    const double xd = static_cast<double>(x);
    const double md = static_cast<double>(m);
    const double t = log_m_fact - std::lgamma(xd + 1.0) - std::lgamma(md - xd + 1.0) + xd * log_p + (md - xd) * log_q;
    terms.push_back(t);
    peak = std::max(peak, t);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - peak);
  return std::clamp(std::exp(peak) * sum, 0.0, 1.0);
}

std::size_t maxAcceptedOutliers(std::size_t trials, double p, double alpha) {
  std::size_t n = 0;
  while (n < trials && binomialTail(n + 1, trials, p) >= alpha) ++n;
  return n;
}

OutlierCount countOutliers(const gp::PredictionTable &predictions, const Eigen::MatrixXd &observations) {
  if (predictions.mean.rows() != observations.rows() || predictions.mean.cols() != observations.cols()) {
    throw std::invalid_argument("countOutliers: predictions and observations are not aligned");
  }
  OutlierCount count;
  count.trials = static_cast<std::size_t>(observations.size());
  for (Eigen::Index i = 0; i < observations.rows(); ++i) {
    for (Eigen::Index d = 0; d < observations.cols(); ++d) {
      const double bound = 3.0 * std::sqrt(predictions.variance(i, d));
      if (std::abs(observations(i, d) - predictions.mean(i, d)) > bound) ++count.n_out;
    }
  }
  return count;
}

RunScore scoreRun(RunId run, std::span<const Experience> candidate, std::span<const Experience> live,
                  const std::vector<gp::Hyperparameters> &hypers, const RecommenderConfig &config) {
  if (live.empty()) throw std::invalid_argument("scoreRun: live window is empty");
  const Eigen::MatrixXd inputs = featureMatrix(live);
  const Eigen::MatrixXd outputs = observationMatrix(live);
  return scoreAgainstLive(run, candidate, inputs, outputs, priorLogLikelihood(outputs, hypers), hypers, config);
}

Recommendation recommend(std::span<const Experience> live, std::span<const CandidateWindow> candidates,
                         const std::vector<gp::Hyperparameters> &hypers, const RecommenderConfig &config) {
  Recommendation result;
  if (live.empty() || candidates.empty()) return result;
  const Eigen::MatrixXd inputs = featureMatrix(live);
  const Eigen::MatrixXd outputs = observationMatrix(live);
  const double prior_ll = priorLogLikelihood(outputs, hypers);

  result.scores.reserve(candidates.size());
  const RunScore *best = nullptr;
  for (const auto &c : candidates) {
    result.scores.push_back(scoreAgainstLive(c.run, c.experiences, inputs, outputs, prior_ll, hypers, config));
  }
  for (const auto &s : result.scores) {
    if (!s.accepted) continue;
    if (!best || s.log_likelihood > best->log_likelihood ||
        (s.log_likelihood == best->log_likelihood && s.run > best->run)) {
      best = &s;
    }
  }
  if (best) result.run = best->run;
  return result;
}

ControlGPSet updateControlSet(const ControlGPSet &current, const std::optional<std::vector<Experience>> &recommended,
                              Rng &rng, const RecommenderConfig &config) {
  ControlGPSet next;
  next.generation = current.generation + 1;
  if (!recommended) {
    const std::size_t size = current.experiences.size();
    const std::size_t keep = size - std::min(config.n_drop, size);
    for (auto i : sampleWithoutReplacement(size, keep, rng)) next.experiences.push_back(current.experiences[i]);
    return next;
  }

  auto key = [](const Experience &e) { return std::make_tuple(e.run, e.t, e.vertex); };
  std::set<std::tuple<RunId, double, VertexId>> present;
  std::vector<Experience> pool = current.experiences;
  for (const auto &e : pool) present.insert(key(e));
  for (auto i : sampleWithoutReplacement(recommended->size(), config.n_add, rng)) {
    const Experience &e = (*recommended)[i];
    if (present.insert(key(e)).second) pool.push_back(e);
  }
  for (auto i : sampleWithoutReplacement(pool.size(), config.n_control, rng)) next.experiences.push_back(pool[i]);
  return next;
}

std::shared_ptr<const ControlModel> makeControlModel(ControlGPSet set, const std::vector<gp::Hyperparameters> &hypers) {
  gp::GPModel model = gp::fit(featureMatrix(set.experiences), observationMatrix(set.experiences), hypers);
  return std::make_shared<const ControlModel>(ControlModel{std::move(set), std::move(model)});
}

ControlModelPublisher::ControlModelPublisher(std::shared_ptr<const ControlModel> initial)
    : current_(std::move(initial)) {}

void ControlModelPublisher::publish(std::shared_ptr<const ControlModel> model) {
  std::lock_guard<std::mutex> lock(mutex_);
  current_.swap(model);
}

std::shared_ptr<const ControlModel> ControlModelPublisher::latest() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return current_;
}

ExperienceRecommender::ExperienceRecommender(RecommenderConfig config, std::vector<gp::Hyperparameters> hypers)
    : config_(config), hypers_(std::move(hypers)) {
  config_.validate();
  for (const auto &h : hypers_) h.validate();
  if (hypers_.size() != static_cast<std::size_t>(kOutputDim)) {
    throw std::invalid_argument("recommender: one hyperparameter set per disturbance dimension is required");
  }
}

RecommendationCycle ExperienceRecommender::step(const StoreSnapshot &snapshot, std::span<const Experience> live,
                                                VertexId current, ControlGPSet &control, Rng &rng) const {
  RecommendationCycle cycle;
  if (live.size() > config_.live_window_samples) live = live.last(config_.live_window_samples);
  if (live.size() < config_.min_live_samples) return cycle;

  cycle.skipped = false;
  cycle.window_first = live.front().vertex;
  cycle.window_last = live.back().vertex;

  const auto runs = snapshot.runs();
  const std::size_t first_run = runs.size() > config_.max_candidate_runs ? runs.size() - config_.max_candidate_runs : 0;
  std::vector<CandidateWindow> candidates;
  candidates.reserve(runs.size() - first_run);
  const std::size_t count = snapshot.topology().span(cycle.window_first, cycle.window_last);
  for (std::size_t i = first_run; i < runs.size(); ++i) {
    candidates.push_back({runs[i]->id(), runs[i]->range(cycle.window_first, count)});
  }

  cycle.recommendation = recommend(live, candidates, hypers_, config_);
  if (cycle.recommendation.run) {
    control = updateControlSet(control, snapshot.windowAhead(*cycle.recommendation.run, current, config_.ahead_vertices),
                               rng, config_);
  } else {
    control = updateControlSet(control, std::nullopt, rng, config_);
  }
  return cycle;
}

}  // namespace expreco
