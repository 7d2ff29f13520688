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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "expreco/mpc.hpp"

using namespace expreco;

namespace {

const std::vector<gp::Hyperparameters> kHypers(3, gp::Hyperparameters::defaults());

Path straight(double length = 40.0) {
  CourseSpec spec;
  spec.closed = false;
  spec.segments = {{CourseSegment::Kind::Straight, length, 0.0, 0.0}};
  return generatePath(spec);
}

gp::GPModel prior() { return gp::GPModel(3, kHypers); }

// Control GP fit to noise-free altered-mode samples over the operating range.
gp::GPModel alteredModel() {
  const auto mode = ModeConfig::altered();
  std::vector<Experience> xs;
  for (double w = -1.0; w <= 1.0; w += 0.1) {
    for (const double k : {0.0, 1.0 / 3.0}) {
      const Command u{1.5, w};
      xs.push_back({RunId{1}, 0, 0.0, makeFeature(u, k), disturbanceMean(mode, {}, u)});
    }
  }
  return gp::fit(featureMatrix(xs), observationMatrix(xs), kHypers);
}

std::vector<Command> trim(const ControllerConfig &c) { return std::vector<Command>(c.horizon_steps, {c.v_desired, 0.0}); }

// Closed loop over one lap of the benchmark course; returns cumulative stage cost.
double closedLoop(const ModeConfig &mode, const gp::GPModel &model, std::uint64_t seed, double *max_lateral = nullptr) {
  const Path path = generatePath(CourseSpec::benchmark());
  ControllerConfig config;
  MpcController ctl(config);
  ctl.reset({config.v_desired, 0.0});
  Rng rng(seed);
  VehicleState s{path[0].x, path[0].y, path[0].theta};
  VertexId v = 0;
  double cost = 0.0, worst = 0.0;
  const auto steps = static_cast<int>(path.length() / (config.v_desired * config.dt));
  for (int k = 0; k < steps; ++k) {
    const auto loc = localizeNear(s, path, v);
    v = loc.vertex;
    worst = std::max(worst, std::abs(loc.error.lateral));
    const Command prev = ctl.previous();
    const auto sol = ctl.solve(s, path, v, model);
    cost += stageCost(loc.error, sol.command, prev, config);
    s = step(s, sol.command, mode, config.dt, rng);
  }
  if (max_lateral) *max_lateral = worst;
  return cost;
}

}  // namespace

TEST(Localize, OnVertex) {
  const auto path = straight();
  const auto loc = localize({path[12].x, path[12].y, path[12].theta}, path);
  EXPECT_EQ(loc.vertex, 12u);
  EXPECT_NEAR(loc.error.lateral, 0.0, 1e-12);
  EXPECT_NEAR(loc.error.heading, 0.0, 1e-12);
}

TEST(Localize, LeftIsPositive) {
  const auto path = straight();
  EXPECT_NEAR(localize({3.0, 0.2, 0.0}, path).error.lateral, 0.2, 1e-12);
  EXPECT_NEAR(localize({3.0, -0.2, 0.0}, path).error.lateral, -0.2, 1e-12);
}

TEST(Localize, PastOpenEnd) {
  const auto path = straight(10.0);
  EXPECT_EQ(localize({25.0, 0.0, 0.0}, path).vertex, path.size() - 1);
}

TEST(Localize, NearHintOnClosedCourse) {
  const auto path = generatePath(CourseSpec::benchmark());
  const auto last = path.size() - 1;
  const auto loc = localizeNear({path[1].x, path[1].y, path[1].theta}, path, last);
  EXPECT_EQ(loc.vertex, 1u);
}

TEST(Rollout, EmptyGpIsUnicycleWithPriorSigma) {
  const auto path = straight();
  const std::vector<Command> u(10, {1.2, 0.3});
  const auto roll = predictRollout({0, 0, 0}, u, prior(), path, 0, 0.1);
  VehicleState s;
  const auto h = kHypers[0];
  for (std::size_t j = 0; j < u.size(); ++j) {
    s = unicycle(s, u[j], 0.1);
    EXPECT_NEAR(roll[j].state.x, s.x, 1e-12);
    EXPECT_NEAR(roll[j].state.theta, s.theta, 1e-12);
    for (const auto &p : roll[j].disturbance) EXPECT_DOUBLE_EQ(p.variance, h.signal_variance + h.noise_variance);
  }
}

TEST(Rollout, ZeroCommandsStationary) {
  const std::vector<Command> u(5, {0.0, 0.0});
  const auto roll = predictRollout({1, 2, 0.5}, u, prior(), straight(), 0, 0.1);
  for (const auto &r : roll) EXPECT_EQ(r.state, (VehicleState{1, 2, 0.5}));
}

TEST(Rollout, AlteredGpPredictsReducedTurn) {
  const std::vector<Command> u(10, {1.5, 0.5});
  const auto roll = predictRollout({0, 0, 0}, u, alteredModel(), straight(), 0, 0.1);
  EXPECT_NEAR(roll.back().state.theta / (10 * 0.1 * 0.5), 0.7, 0.02);
}

TEST(Tightening, MonotoneInGpSigma) {
  const std::vector<Command> u(15, {1.5, 0.2});
  auto roll = predictRollout({0, 0, 0}, u, alteredModel(), straight(), 0, 0.1);
  auto base = lateralTightening(roll, u, 0.1);
  for (int dim = 0; dim < 3; ++dim) {
    for (std::size_t k = 0; k < roll.size(); k += 4) {
      auto bumped = roll;
      bumped[k].disturbance[dim].variance *= 1.5;
      const auto t = lateralTightening(bumped, u, 0.1);
      for (std::size_t j = 0; j < t.size(); ++j) EXPECT_GE(t[j], base[j]);
      EXPECT_GT(t[k], base[k]) << "dim " << dim << " step " << k;
    }
  }
}

TEST(Tightening, PriorLeavesFeasibleBound) {
  ControllerConfig c;
  const std::vector<Command> u(c.horizon_steps, {c.v_max, c.omega_max});
  const auto roll = predictRollout({0, 0, 0}, u, prior(), straight(), 0, c.dt);
  for (const double t : lateralTightening(roll, u, c.dt)) {
    EXPECT_GT(t, 0.0);
    EXPECT_LT(t, c.lateral_bound);
  }
}

TEST(Mpc, TrimOnStraight) {
  ControllerConfig c;
  const auto path = straight();
  const auto sol = solveMpc({path[5].x, path[5].y, 0.0}, path, 5, prior(), {c.v_desired, 0.0}, trim(c), c);
  EXPECT_NEAR(sol.command.v, c.v_desired, 0.05);
  EXPECT_NEAR(sol.command.omega, 0.0, 0.01);
  EXPECT_FALSE(sol.fault);
}

TEST(Mpc, SteersBackTowardPath) {
  ControllerConfig c;
  const auto path = straight();
  EXPECT_LT(solveMpc({1.0, 0.3, 0.0}, path, 7, prior(), {c.v_desired, 0.0}, trim(c), c).command.omega, 0.0);
  EXPECT_GT(solveMpc({1.0, -0.3, 0.0}, path, 7, prior(), {c.v_desired, 0.0}, trim(c), c).command.omega, 0.0);
}

TEST(Mpc, DeterministicBoundedAndCostDecreasing) {
  ControllerConfig c;
  const auto path = generatePath(CourseSpec::benchmark());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto model = alteredModel();
  for (int trial = 0; trial < 25; ++trial) {
    const VertexId v = static_cast<VertexId>(rng() % path.size());
    const VehicleState s{path[v].x + 0.3 * u(rng), path[v].y + 0.3 * u(rng), path[v].theta + 0.4 * u(rng)};
    std::vector<Command> warm(c.horizon_steps);
    for (auto &w : warm) w = {1.5 + 0.5 * u(rng), 0.8 * u(rng)};
    const Command prev{1.4, 0.1 * u(rng)};
    const auto a = solveMpc(s, path, v, model, prev, warm, c);
    const auto b = solveMpc(s, path, v, model, prev, warm, c);
    EXPECT_EQ(a.command, b.command);
    EXPECT_EQ(a.cost, b.cost);
    EXPECT_LE(a.cost, a.warm_start_cost);
    for (const auto &cmd : a.sequence) {
      EXPECT_LE(std::abs(cmd.v), c.v_max);
      EXPECT_LE(std::abs(cmd.omega), c.omega_max);
    }
  }
}

TEST(Mpc, SequenceCostMatchesReportedCost) {
  ControllerConfig c;
  const auto path = straight();
  const auto sol = solveMpc({1.0, 0.2, 0.1}, path, 7, prior(), {c.v_desired, 0.0}, trim(c), c);
  EXPECT_NEAR(sequenceCost({1.0, 0.2, 0.1}, sol.sequence, {c.v_desired, 0.0}, prior(), path, 7, c), sol.cost,
              1e-9 * std::max(1.0, sol.cost));
}

TEST(Mpc, ConfigValidation) {
  ControllerConfig c;
  c.horizon_steps = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.dt = -0.1;
  EXPECT_THROW(MpcController{c}, std::invalid_argument);
}

TEST(ClosedLoop, NominalTracksTightly) {
  double worst = 0.0;
  closedLoop(ModeConfig::nominal(), prior(), 1, &worst);
  EXPECT_LT(worst, 0.15);
}

TEST(ClosedLoop, TrainedGpLowersCostInAlteredMode) {
  EXPECT_LT(closedLoop(ModeConfig::altered(), alteredModel(), 3), closedLoop(ModeConfig::altered(), prior(), 3));
}
