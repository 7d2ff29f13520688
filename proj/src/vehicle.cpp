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

#include "expreco/vehicle.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace expreco {

double wrapAngle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double wrapped = std::fmod(angle + std::numbers::pi, two_pi);
  if (wrapped < 0.0) wrapped += two_pi;
  wrapped -= std::numbers::pi;
  // fmod maps +pi to -pi; keep the interval half-open at -pi
  if (wrapped <= -std::numbers::pi) wrapped = std::numbers::pi;
  return wrapped;
}

void ModeConfig::validate() const {
  if (!(noise_variance.array() >= 0.0).all() || !noise_variance.allFinite()) {
    throw std::invalid_argument("mode '" + name + "': noise variances must be non-negative");
  }
  if (!std::isfinite(turn_gain) || !std::isfinite(lateral_slip_gain) || !std::isfinite(drag_gain)) {
    throw std::invalid_argument("mode '" + name + "': gains must be finite");
  }
}

ModeConfig ModeConfig::nominal() {
  ModeConfig m;
  m.name = "nominal";
  return m;
}

ModeConfig ModeConfig::altered() {
  ModeConfig m;
  m.name = "altered";
  m.turn_gain = 0.7;
  return m;
}

ModeConfig ModeConfig::loaded() {
  ModeConfig m;
  m.name = "loaded";
  m.turn_gain = 1.15;
  m.lateral_slip_gain = 0.05;
  m.drag_gain = 0.02;
  return m;
}

VehicleState unicycle(const VehicleState &state, const Command &cmd, double dt) {
  return {state.x + dt * std::cos(state.theta) * cmd.v, state.y + dt * std::sin(state.theta) * cmd.v,
          wrapAngle(state.theta + dt * cmd.omega)};
}

Eigen::Vector3d disturbanceMean(const ModeConfig &mode, const VehicleState &state, const Command &cmd) {
  const double c = std::cos(state.theta);
  const double s = std::sin(state.theta);
  const double slip = mode.lateral_slip_gain * cmd.omega * cmd.v;
  const double drag = mode.drag_gain * cmd.v;
  return {-slip * s - drag * c, slip * c - drag * s, (mode.turn_gain - 1.0) * cmd.omega};
}

Eigen::Vector3d sampleDisturbance(const ModeConfig &mode, const VehicleState &state, const Command &cmd,
                                  Rng &rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector3d g = disturbanceMean(mode, state, cmd);
  for (int i = 0; i < 3; ++i) {
    g[i] += std::sqrt(mode.noise_variance[i]) * normal(rng);
  }
  return g;
}

VehicleState applyDisturbance(const VehicleState &state, const Command &cmd, const Eigen::Vector3d &g,
                              double dt) {
  return {state.x + dt * (std::cos(state.theta) * cmd.v + g[0]),
          state.y + dt * (std::sin(state.theta) * cmd.v + g[1]),
          wrapAngle(state.theta + dt * (cmd.omega + g[2]))};
}

VehicleState step(const VehicleState &state, const Command &cmd, const ModeConfig &mode, double dt, Rng &rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  return applyDisturbance(state, cmd, sampleDisturbance(mode, state, cmd, rng), dt);
}

double Path::length() const {
  if (vertices.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 1; i < vertices.size(); ++i) {
    total += std::hypot(vertices[i].x - vertices[i - 1].x, vertices[i].y - vertices[i - 1].y);
  }
  if (closed) {
    total += std::hypot(vertices.front().x - vertices.back().x, vertices.front().y - vertices.back().y);
  }
  return total;
}

double CourseSegment::arcLength() const {
  return kind == Kind::Straight ? length : radius * std::abs(angle);
}

double CourseSpec::totalLength() const {
  double total = 0.0;
  for (const auto &s : segments) total += s.arcLength();
  return total;
}

CourseSpec CourseSpec::benchmark() {
  const double quarter = std::numbers::pi / 2.0;
  CourseSegment straight{CourseSegment::Kind::Straight, 11.5, 0.0, 0.0};
  CourseSegment arc{CourseSegment::Kind::Arc, 0.0, 3.0, quarter};
  CourseSpec spec;
  spec.segments = {straight, arc, arc, straight, arc, arc};
  spec.closed = true;
  return spec;
}

Path generatePath(const CourseSpec &spec) {
  if (!(spec.spacing > 0.0)) throw std::invalid_argument("course: spacing must be positive");
  if (spec.segments.empty()) throw std::invalid_argument("course: no segments");
  for (const auto &s : spec.segments) {
    if (s.kind == CourseSegment::Kind::Straight && !(s.length > 0.0)) {
      throw std::invalid_argument("course: straight length must be positive");
    }
    if (s.kind == CourseSegment::Kind::Arc && (!(s.radius > 0.0) || s.angle == 0.0)) {
      throw std::invalid_argument("course: arc radius must be positive and angle non-zero");
    }
  }

  // segment start poses
  struct Pose {
    double x, y, theta;
  };
  std::vector<Pose> starts;
  Pose pose{0.0, 0.0, 0.0};
  for (const auto &s : spec.segments) {
    starts.push_back(pose);
    if (s.kind == CourseSegment::Kind::Straight) {
      pose.x += s.length * std::cos(pose.theta);
      pose.y += s.length * std::sin(pose.theta);
    } else {
      const double k = (s.angle > 0.0 ? 1.0 : -1.0) / s.radius;
      const double th1 = pose.theta + s.angle;
      pose.x += (std::sin(th1) - std::sin(pose.theta)) / k;
      pose.y += (std::cos(pose.theta) - std::cos(th1)) / k;
      pose.theta = th1;
    }
  }

  const double total = spec.totalLength();
  std::size_t count = 0;
  if (spec.closed) {
    count = static_cast<std::size_t>(std::llround(total / spec.spacing));
  } else {
    count = static_cast<std::size_t>(std::floor(total / spec.spacing + 1e-9)) + 1;
  }

  Path path;
  path.closed = spec.closed;
  path.spacing = spec.spacing;
  path.vertices.reserve(count);
  std::size_t seg = 0;
  double seg_begin = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double s_along = static_cast<double>(i) * spec.spacing;
    while (seg + 1 < spec.segments.size() &&
           s_along >= seg_begin + spec.segments[seg].arcLength() - 1e-9) {
      seg_begin += spec.segments[seg].arcLength();
      ++seg;
    }
    const auto &s = spec.segments[seg];
    const Pose &p0 = starts[seg];
    const double ds = std::min(s_along - seg_begin, s.arcLength());
    PathVertex v;
    if (s.kind == CourseSegment::Kind::Straight) {
      v.x = p0.x + ds * std::cos(p0.theta);
      v.y = p0.y + ds * std::sin(p0.theta);
      v.theta = wrapAngle(p0.theta);
      v.curvature = 0.0;
    } else {
      const double k = (s.angle > 0.0 ? 1.0 : -1.0) / s.radius;
      const double th = p0.theta + k * ds;
      v.x = p0.x + (std::sin(th) - std::sin(p0.theta)) / k;
      v.y = p0.y + (std::cos(p0.theta) - std::cos(th)) / k;
      v.theta = wrapAngle(th);
      v.curvature = k;
    }
    path.vertices.push_back(v);
  }
  return path;
}

}  // namespace expreco
