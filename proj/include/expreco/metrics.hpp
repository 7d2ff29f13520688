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
 * \file metrics.hpp
 * \brief Multi-step prediction metrics and recommendation confusion matrices.
 */
#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "expreco/experience_store.hpp"

namespace expreco {

/// Predicted rotational rate over one horizon step.
struct RatePrediction {
  double mean = 0.0;
  double stddev = 0.0;
};

/// sqrt(1/p sum_j (realized_j - mu_j)^2 / sigma_j^2) over the first p steps.
/// Throws std::invalid_argument when a sequence is shorter than p or any
/// sigma is not positive.
double mRmsz(std::span<const RatePrediction> predicted, std::span<const double> realized, std::size_t p);

/// sqrt(1/p sum_j (realized_j - mu_j)^2) over the first p steps.
double mRmse(std::span<const double> predicted_mean, std::span<const double> realized, std::size_t p);

/// Per-run aggregation over all prediction start times k: the mean of the
/// per-k metric. horizons[k] is the prediction made at step k for steps
/// k..k+p-1; realized[j] is the measured rate over step j. Start times whose
/// horizon runs past the end of `realized` are skipped.
struct HorizonMetrics {
  double m_rmse = 0.0;
  double m_rmsz = 0.0;
  std::size_t samples = 0;
};
HorizonMetrics aggregateHorizonMetrics(std::span<const std::vector<RatePrediction>> horizons,
                                       std::span<const double> realized, std::size_t p);

/// One recommendation cycle that was not skipped.
struct RecommendationEvent {
  std::size_t step = 0;
  VertexId vertex = 0;
  double curvature = 0.0;
  std::optional<RunId> chosen;
};

inline constexpr const char *kNoneColumn = "none";

/// Rows: live-run condition. Columns: condition of the recommended run, plus
/// "none". Entries are fractions of the row's events.
struct ConfusionMatrix {
  std::map<std::string, std::map<std::string, double>> fractions;
  std::map<std::string, std::size_t> events;
};

struct LabelledEvents {
  std::string live_label;
  std::span<const RecommendationEvent> events;
};

ConfusionMatrix confusionMatrix(std::span<const LabelledEvents> runs,
                                const std::function<std::string(RunId)> &label_of);

/// Fractions of events by source label (plus "none") for one run.
std::map<std::string, double> sourceFractions(std::span<const RecommendationEvent> events,
                                              const std::function<std::string(RunId)> &label_of);

}  // namespace expreco
