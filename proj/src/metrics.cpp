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

#include "expreco/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace expreco {

double mRmsz(std::span<const RatePrediction> predicted, std::span<const double> realized, std::size_t p) {
  if (p == 0 || predicted.size() < p || realized.size() < p) {
    throw std::invalid_argument("mRmsz: sequences shorter than the horizon");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    if (!(predicted[j].stddev > 0.0)) throw std::invalid_argument("mRmsz: non-positive predicted sigma");
    const double z = (realized[j] - predicted[j].mean) / predicted[j].stddev;
    sum += z * z;
  }
  return std::sqrt(sum / static_cast<double>(p));
}

double mRmse(std::span<const double> predicted_mean, std::span<const double> realized, std::size_t p) {
  if (p == 0 || predicted_mean.size() < p || realized.size() < p) {
    throw std::invalid_argument("mRmse: sequences shorter than the horizon");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    const double e = realized[j] - predicted_mean[j];
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(p));
}

HorizonMetrics aggregateHorizonMetrics(std::span<const std::vector<RatePrediction>> horizons,
                                       std::span<const double> realized, std::size_t p) {
  HorizonMetrics out;
  double rmse_sum = 0.0;
  double rmsz_sum = 0.0;
  std::vector<double> means(p);
  for (std::size_t k = 0; k < horizons.size(); ++k) {
    if (k + p > realized.size() || horizons[k].size() < p) continue;
    for (std::size_t j = 0; j < p; ++j) means[j] = horizons[k][j].mean;
    const auto truth = realized.subspan(k, p);
    rmse_sum += mRmse(means, truth, p);
    rmsz_sum += mRmsz(horizons[k], truth, p);
    ++out.samples;
  }
  if (out.samples > 0) {
    out.m_rmse = rmse_sum / static_cast<double>(out.samples);
    out.m_rmsz = rmsz_sum / static_cast<double>(out.samples);
  }
  return out;
}

std::map<std::string, double> sourceFractions(std::span<const RecommendationEvent> events,
                                              const std::function<std::string(RunId)> &label_of) {
  std::map<std::string, double> out;
  if (events.empty()) return out;
  for (const auto &e : events) out[e.chosen ? label_of(*e.chosen) : kNoneColumn] += 1.0;
  for (auto &[_, v] : out) v /= static_cast<double>(events.size());
  return out;
}

ConfusionMatrix confusionMatrix(std::span<const LabelledEvents> runs,
                                const std::function<std::string(RunId)> &label_of) {
  ConfusionMatrix cm;
  std::map<std::string, std::map<std::string, std::size_t>> counts;
  for (const auto &run : runs) {
    for (const auto &e : run.events) {
      ++counts[run.live_label][e.chosen ? label_of(*e.chosen) : kNoneColumn];
      ++cm.events[run.live_label];
    }
  }
  for (const auto &[row, cols] : counts) {
    const double total = static_cast<double>(cm.events[row]);
    for (const auto &[col, n] : cols) cm.fractions[row][col] = static_cast<double>(n) / total;
  }
  return cm;
}

}  // namespace expreco
