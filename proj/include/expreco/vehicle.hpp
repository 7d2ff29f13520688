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
 * \file vehicle.hpp
 * \brief Ground-truth unicycle plant with switchable disturbance modes, and
 * the reference path generator.
 */
#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace expreco {

using Rng = std::mt19937_64;

/// Wraps an angle to (-pi, pi].
double wrapAngle(double angle);

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // (-pi, pi]

  bool operator==(const VehicleState &) const = default;
};

struct Command {
  double v = 0.0;      // m/s
  double omega = 0.0;  // rad/s

  bool operator==(const Command &) const = default;
};

/// An operating condition. Disturbance mean:
///   g_theta = (turn_gain - 1) omega
///   (g_x, g_y) = lateral_slip_gain omega v (-sin, cos) + drag_gain v (-cos, -sin)
struct ModeConfig {
  std::string name;
  double turn_gain = 1.0;
  double lateral_slip_gain = 0.0;
  double drag_gain = 0.0;
  /// Diagonal of Sigma_eta, in units of g (m/s, m/s, rad/s) squared.
  Eigen::Vector3d noise_variance = Eigen::Vector3d(0.02 * 0.02, 0.02 * 0.02, 0.03 * 0.03);

  void validate() const;

  static ModeConfig nominal();
  static ModeConfig altered();
  static ModeConfig loaded();
};

/// Nominal model f(x, u): one unicycle Euler step.
VehicleState unicycle(const VehicleState &state, const Command &cmd, double dt);

/// Deterministic part g_0 of the mode's disturbance.
Eigen::Vector3d disturbanceMean(const ModeConfig &mode, const VehicleState &state, const Command &cmd);

/// g_0 plus a draw of eta ~ N(0, Sigma_eta). Always consumes three normal
/// draws from rng so that streams stay aligned across modes.
Eigen::Vector3d sampleDisturbance(const ModeConfig &mode, const VehicleState &state, const Command &cmd,
                                  Rng &rng);

/// f(x, u) + dt g, heading wrapped.
VehicleState applyDisturbance(const VehicleState &state, const Command &cmd, const Eigen::Vector3d &g,
                              double dt);

/// One plant step with a freshly sampled disturbance.
VehicleState step(const VehicleState &state, const Command &cmd, const ModeConfig &mode, double dt, Rng &rng);

// --- reference path ---------------------------------------------------------

struct PathVertex {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double curvature = 0.0;  // 1/m, positive turning left
};

struct Path {
  std::vector<PathVertex> vertices;
  bool closed = false;
  double spacing = 0.15;

  std::size_t size() const { return vertices.size(); }
  bool empty() const { return vertices.empty(); }
  const PathVertex &operator[](std::size_t i) const { return vertices[i]; }
  double length() const;
};

struct CourseSegment {
  enum class Kind { Straight, Arc };
  Kind kind = Kind::Straight;
  double length = 0.0;  // straights
  double radius = 0.0;  // arcs
  double angle = 0.0;   // arcs, signed radians, positive turns left

  double arcLength() const;
};

struct CourseSpec {
  std::vector<CourseSegment> segments;
  bool closed = true;
  double spacing = 0.15;

  double totalLength() const;

  /// Two 11.5 m straights joined by four 90 degree left arcs of radius 3 m
  /// (about 41.85 m).
  static CourseSpec benchmark();
};

/// Samples the course every `spacing` metres starting at the origin heading
/// along +x. Open courses include the end point. Throws std::invalid_argument
/// on non-positive lengths or radii.
Path generatePath(const CourseSpec &spec);

}  // namespace expreco
