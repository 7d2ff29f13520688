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

#include "expreco/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace expreco {

namespace {

constexpr std::size_t kRolloutSearchBehind = 3;
constexpr std::size_t kRolloutSearchAhead = 6;
constexpr double kFaultDecay = 0.5;

Command clampCommand(const Command &cmd, const ControllerConfig &config) {
  return {std::clamp(cmd.v, -config.v_max, config.v_max), std::clamp(cmd.omega, -config.omega_max, config.omega_max)};
}

// Residual vector r with cost = r.squaredNorm(); optional Jacobian wrt the
// stacked commands (v_0, w_0, v_1, w_1, ...).
struct Evaluation {
  Eigen::VectorXd residual;
  Eigen::MatrixXd jacobian;
  std::vector<RolloutStep> rollout;
  std::vector<double> bounds;
  bool infeasible = false;
  double cost() const { return residual.squaredNorm(); }
};

Evaluation evaluate(const VehicleState &state, std::span<const Command> commands, const Command &previous,
                    const gp::GPModel &model, const Path &path, VertexId hint, const ControllerConfig &config,
                    bool with_jacobian) {
  const std::size_t n = commands.size();
  const double dt = config.dt;
  const auto &w = config.weights;
  const double s_lat = std::sqrt(w.lateral);
  const double s_head = std::sqrt(w.heading);
  const double s_con = std::sqrt(config.constraint_weight);
  const double s_om = std::sqrt(w.omega);
  const double s_v = std::sqrt(w.speed_error);
  const double s_omr = std::sqrt(w.omega_rate);
  const double s_vr = std::sqrt(w.speed_rate);

  Evaluation ev;
  ev.rollout = predictRollout(state, commands, model, path, hint, dt, true);
  ev.bounds = lateralTightening(ev.rollout, commands, dt);
  for (double &b : ev.bounds) {
    b = config.lateral_bound - b;
    if (b <= 0.0) ev.infeasible = true;
  }

  const auto rows = static_cast<Eigen::Index>(7 * n);
  const auto cols = static_cast<Eigen::Index>(2 * n);
  ev.residual = Eigen::VectorXd::Zero(rows);
  if (with_jacobian) ev.jacobian = Eigen::MatrixXd::Zero(rows, cols);

  Eigen::MatrixXd sens = Eigen::MatrixXd::Zero(3, cols);  // d x_k / d U
  VehicleState x = state;
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const Command &u = commands[k];
    const RolloutStep &step = ev.rollout[k];

    if (with_jacobian) {
      Eigen::Matrix3d a = Eigen::Matrix3d::Identity();
      a(0, 2) = -dt * u.v * std::sin(x.theta);
      a(1, 2) = dt * u.v * std::cos(x.theta);
      Eigen::Matrix<double, 3, 2> b;
      b << dt * std::cos(x.theta), 0.0, dt * std::sin(x.theta), 0.0, 0.0, dt;
      if (!model.empty()) b += dt * model.meanGradient(step.feature).leftCols<2>();
      sens = a * sens;
      sens.middleCols<2>(2 * kk) += b;
    }
    x = step.state;

    const PathVertex &ref = path[step.reference];
    const Eigen::RowVector3d grad_lat(-std::sin(ref.theta), std::cos(ref.theta), 0.0);
    const Eigen::RowVector3d grad_head(0.0, 0.0, 1.0);
    const double e = step.error.lateral;

    const Eigen::Index r0 = 7 * kk;
    ev.residual[r0] = s_lat * e;
    ev.residual[r0 + 1] = s_head * step.error.heading;
    const double bound = ev.bounds[k];
    const bool violated = bound > 0.0 && std::abs(e) > bound;
    if (violated) ev.residual[r0 + 2] = s_con * (std::abs(e) - bound);

    const Command &prev = k == 0 ? previous : commands[k - 1];
    ev.residual[r0 + 3] = s_om * u.omega;
    ev.residual[r0 + 4] = s_v * (u.v - config.v_desired);
    ev.residual[r0 + 5] = s_omr * (u.omega - prev.omega);
    ev.residual[r0 + 6] = s_vr * (u.v - prev.v);

    if (with_jacobian) {
      ev.jacobian.row(r0) = s_lat * grad_lat * sens;
      ev.jacobian.row(r0 + 1) = s_head * grad_head * sens;
      if (violated) ev.jacobian.row(r0 + 2) = s_con * (e > 0.0 ? 1.0 : -1.0) * grad_lat * sens;
      ev.jacobian(r0 + 3, 2 * kk + 1) = s_om;
      ev.jacobian(r0 + 4, 2 * kk) = s_v;
      ev.jacobian(r0 + 5, 2 * kk + 1) = s_omr;
      ev.jacobian(r0 + 6, 2 * kk) = s_vr;
      if (k > 0) {
        ev.jacobian(r0 + 5, 2 * kk - 1) = -s_omr;
        ev.jacobian(r0 + 6, 2 * kk - 2) = -s_vr;
      }
    }
  }
  return ev;
}

bool finiteEvaluation(const Evaluation &ev) { return ev.residual.allFinite(); }

}  // namespace

void ControllerConfig::validate() const {
  if (horizon_steps == 0) throw std::invalid_argument("controller: horizon must be at least one step");
  if (!(dt > 0.0)) throw std::invalid_argument("controller: dt must be positive");
  const auto &w = weights;
  if (w.lateral < 0 || w.heading < 0 || w.omega < 0 || w.speed_error < 0 || w.omega_rate < 0 || w.speed_rate < 0 ||
      constraint_weight < 0) {
    throw std::invalid_argument("controller: weights must be non-negative");
  }
  if (!(v_max > 0.0) || !(omega_max > 0.0)) throw std::invalid_argument("controller: input bounds must be positive");
}

TrackingError trackingError(const VehicleState &state, const Path &path, VertexId vertex) {
  const PathVertex &ref = path[vertex];
  const double dx = state.x - ref.x;
  const double dy = state.y - ref.y;
  return {-std::sin(ref.theta) * dx + std::cos(ref.theta) * dy, wrapAngle(state.theta - ref.theta)};
}

Localization localize(const VehicleState &state, const Path &path) {
  if (path.empty()) throw std::invalid_argument("localize: empty path");
  VertexId best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (VertexId i = 0; i < path.size(); ++i) {
    const double d = std::hypot(state.x - path[i].x, state.y - path[i].y);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return {best, trackingError(state, path, best)};
}

Localization localizeNear(const VehicleState &state, const Path &path, VertexId hint, std::size_t behind,
                          std::size_t ahead) {
  if (path.empty()) throw std::invalid_argument("localize: empty path");
  const auto n = static_cast<std::ptrdiff_t>(path.size());
  VertexId best = hint;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::ptrdiff_t off = -static_cast<std::ptrdiff_t>(behind); off <= static_cast<std::ptrdiff_t>(ahead); ++off) {
    std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(hint) + off;
    if (path.closed) {
      idx = ((idx % n) + n) % n;
    } else if (idx < 0 || idx >= n) {
      continue;
    }
    const auto v = static_cast<VertexId>(idx);
    const double d = std::hypot(state.x - path[v].x, state.y - path[v].y);
    if (d < best_d || (d == best_d && v < best)) {
      best_d = d;
      best = v;
    }
  }
  return {best, trackingError(state, path, best)};
}

double stageCost(const TrackingError &error, const Command &cmd, const Command &previous,
                 const ControllerConfig &config) {
  const auto &w = config.weights;
  const double dv = cmd.v - config.v_desired;
  const double rate_omega = cmd.omega - previous.omega;
  const double rate_v = cmd.v - previous.v;
  return w.lateral * error.lateral * error.lateral + w.heading * error.heading * error.heading +
         w.omega * cmd.omega * cmd.omega + w.speed_error * dv * dv + w.omega_rate * rate_omega * rate_omega +
         w.speed_rate * rate_v * rate_v;
}

std::vector<RolloutStep> predictRollout(const VehicleState &state, std::span<const Command> commands,
                                        const gp::GPModel &model, const Path &path, VertexId hint, double dt,
                                        bool with_variance) {
  std::vector<RolloutStep> out;
  out.reserve(commands.size());
  VehicleState x = state;
  VertexId ref = hint;
  for (const Command &u : commands) {
    RolloutStep step;
    step.feature = makeFeature(u, path[ref].curvature);
    Eigen::Vector3d mean;
    if (with_variance) {
      step.disturbance = model.predict(step.feature);
      mean << step.disturbance[0].mean, step.disturbance[1].mean, step.disturbance[2].mean;
    } else {
      mean = model.predictMean(step.feature);
    }
    x = applyDisturbance(x, u, mean, dt);
    const Localization loc = localizeNear(x, path, ref, kRolloutSearchBehind, kRolloutSearchAhead);
    ref = loc.vertex;
    step.state = x;
    step.reference = loc.vertex;
    step.error = loc.error;
    out.push_back(std::move(step));
  }
  return out;
}

std::vector<double> lateralTightening(std::span<const RolloutStep> rollout, std::span<const Command> commands,
                                      double dt) {
  const std::size_t n = rollout.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto &d = rollout[k].disturbance;
    if (d.size() < 3) continue;
    const double th = rollout[k].state.theta;
    const double s = std::sin(th);
    const double c = std::cos(th);
    // this step's heading disturbance acts over this step's travel only
    const double lever = std::abs(commands[k].v) * dt;
    const double var = dt * dt * (s * s * d[0].variance + c * c * d[1].variance + lever * lever * d[2].variance);
    out[k] = 3.0 * std::sqrt(var);
  }
  return out;
}

double sequenceCost(const VehicleState &state, std::span<const Command> commands, const Command &previous,
                    const gp::GPModel &model, const Path &path, VertexId hint, const ControllerConfig &config) {
  return evaluate(state, commands, previous, model, path, hint, config, false).cost();
}

MpcSolution solveMpc(const VehicleState &state, const Path &path, VertexId hint, const gp::GPModel &model,
                     const Command &previous, std::span<const Command> warm_start, const ControllerConfig &config) {
  if (warm_start.size() != config.horizon_steps) {
    throw std::invalid_argument("solveMpc: warm start length must equal the horizon");
  }
  const std::size_t n = config.horizon_steps;
  std::vector<Command> current(warm_start.begin(), warm_start.end());
  for (auto &c : current) c = clampCommand(c, config);

  MpcSolution sol;
  Evaluation ev = evaluate(state, current, previous, model, path, hint, config, true);
  sol.warm_start_cost = ev.cost();
  if (!finiteEvaluation(ev)) {
    sol.fault = true;
    sol.command = clampCommand({previous.v * kFaultDecay, previous.omega * kFaultDecay}, config);
    sol.sequence.assign(n, sol.command);
    sol.cost = std::numeric_limits<double>::infinity();
    return sol;
  }

  const auto cols = static_cast<Eigen::Index>(2 * n);
  for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
    const Eigen::VectorXd grad = ev.jacobian.transpose() * ev.residual;
    Eigen::MatrixXd hess = ev.jacobian.transpose() * ev.jacobian;
    hess.diagonal().array() += 1e-6 * (1.0 + hess.diagonal().array());
    const Eigen::VectorXd delta = -hess.ldlt().solve(grad);
    if (!delta.allFinite()) break;
    sol.iterations = iter + 1;

    bool improved = false;
    for (double scale = 1.0; scale > 0.1; scale *= 0.5) {
      std::vector<Command> trial(n);
      for (std::size_t k = 0; k < n; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        trial[k] = clampCommand({current[k].v + scale * delta[2 * kk], current[k].omega + scale * delta[2 * kk + 1]},
                                config);
      }
      Evaluation candidate = evaluate(state, trial, previous, model, path, hint, config, true);
      if (finiteEvaluation(candidate) && candidate.cost() < ev.cost()) {
        current = std::move(trial);
        ev = std::move(candidate);
        improved = true;
        break;
      }
    }
    if (!improved || delta.norm() < 1e-6 * static_cast<double>(cols)) break;
  }

  sol.sequence = current;
  sol.command = current.front();
  sol.cost = ev.cost();
  sol.rollout = std::move(ev.rollout);
  sol.safety_flag = ev.infeasible;
  for (std::size_t k = 0; k < n; ++k) {
    if (ev.bounds[k] > 0.0 && std::abs(sol.rollout[k].error.lateral) > ev.bounds[k]) sol.safety_flag = true;
  }
  return sol;
}

MpcController::MpcController(ControllerConfig config) : config_(config) {
  config_.validate();
  reset({config_.v_desired, 0.0});
}

void MpcController::reset(const Command &previous) {
  previous_ = previous;
  warm_start_.assign(config_.horizon_steps, previous);
}

MpcSolution MpcController::solve(const VehicleState &state, const Path &path, VertexId hint,
                                 const gp::GPModel &model) {
  MpcSolution sol = solveMpc(state, path, hint, model, previous_, warm_start_, config_);
  previous_ = sol.command;
  if (sol.fault) {
    warm_start_.assign(config_.horizon_steps, sol.command);
  } else {
    warm_start_.assign(sol.sequence.begin() + 1, sol.sequence.end());
    warm_start_.push_back(sol.sequence.back());
  }
  return sol;
}

}  // namespace expreco
