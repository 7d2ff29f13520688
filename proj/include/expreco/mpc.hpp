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
 * \file mpc.hpp
 * \brief Receding-horizon path tracker on the unicycle + GP disturbance model.
 *
 * The optimizer is a projected Gauss-Newton method over the command sequence.
 * Robustness is approximated by tightening the lateral-error bound at every
 * prediction step by 3 sigma of the lateral position uncertainty that step's
 * GP variance alone contributes. Steps are treated independently; there is no
 * tube propagation along the horizon.
 */
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "expreco/experience_store.hpp"
#include "expreco/gp.hpp"
#include "expreco/vehicle.hpp"

namespace expreco {

struct CostWeights {
  double lateral = 500.0;
  double heading = 35.0;
  double omega = 5.0;
  double speed_error = 4.0;
  double omega_rate = 1000.0;
  double speed_rate = 500.0;
};

struct ControllerConfig {
  std::size_t horizon_steps = 15;
  double dt = 0.1;
  CostWeights weights;
  double v_desired = 1.5;
  double lateral_bound = 0.5;  // e_max, m
  double v_max = 2.0;
  double omega_max = 1.5;
  std::size_t max_iterations = 5;
  /// Penalty on violation of the tightened lateral bound.
  double constraint_weight = 1e4;

  void validate() const;
};

struct TrackingError {
  double lateral = 0.0;  // m, left of the path is positive
  double heading = 0.0;  // rad, wrapped
};

struct Localization {
  VertexId vertex = 0;
  TrackingError error;
};

/// Tracking error of `state` against path vertex `vertex`.
TrackingError trackingError(const VehicleState &state, const Path &path, VertexId vertex);

/// Nearest vertex over the whole path, ties to the lower index.
Localization localize(const VehicleState &state, const Path &path);

/// Nearest vertex within [hint - behind, hint + ahead] (wrapping on closed
/// paths, clamped on open ones).
Localization localizeNear(const VehicleState &state, const Path &path, VertexId hint, std::size_t behind = 5,
                          std::size_t ahead = 20);

/// Stage cost of one applied command at a tracking error.
double stageCost(const TrackingError &error, const Command &cmd, const Command &previous, const ControllerConfig &config);

struct RolloutStep {
  VehicleState state;                // state after applying the step's command
  FeatureVector feature;             // GP input used for the step
  std::vector<gp::Prediction> disturbance;  // per dimension, empty when not requested
  VertexId reference = 0;            // nearest vertex to `state`
  TrackingError error;
};

/// x_{k+1} = f(x_k, u_k) + dt mu_g(a_k) with a_k built from the commanded
/// values and the curvature at x_k's nearest vertex. `hint` is the vertex of
/// the initial state.
std::vector<RolloutStep> predictRollout(const VehicleState &state, std::span<const Command> commands,
                                        const gp::GPModel &model, const Path &path, VertexId hint, double dt,
                                        bool with_variance = true);

/// 3 sigma_lat,k for each rollout step from that step's GP variances.
/// Non-decreasing in every GP variance.
std::vector<double> lateralTightening(std::span<const RolloutStep> rollout, std::span<const Command> commands,
                                      double dt);

struct MpcSolution {
  Command command;
  std::vector<Command> sequence;
  std::vector<RolloutStep> rollout;
  double cost = 0.0;
  double warm_start_cost = 0.0;
  std::size_t iterations = 0;
  bool safety_flag = false;  // tightened bound infeasible or violated
  bool fault = false;        // optimizer failure, command is a decayed fallback
};

/// Horizon cost of a command sequence (including bound penalties).
double sequenceCost(const VehicleState &state, std::span<const Command> commands, const Command &previous,
                    const gp::GPModel &model, const Path &path, VertexId hint, const ControllerConfig &config);

/// Optimizes from `warm_start`; deterministic in its inputs.
MpcSolution solveMpc(const VehicleState &state, const Path &path, VertexId hint, const gp::GPModel &model,
                     const Command &previous, std::span<const Command> warm_start, const ControllerConfig &config);

/// Stateful wrapper keeping the previous command and shifted warm start.
class MpcController {
 public:
  explicit MpcController(ControllerConfig config);

  const ControllerConfig &config() const { return config_; }
  const Command &previous() const { return previous_; }

  /// Sets the previously applied command and a constant warm start.
  void reset(const Command &previous);

  MpcSolution solve(const VehicleState &state, const Path &path, VertexId hint, const gp::GPModel &model);

 private:
  ControllerConfig config_;
  Command previous_;
  std::vector<Command> warm_start_;
};

}  // namespace expreco
