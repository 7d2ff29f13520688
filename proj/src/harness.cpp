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

#include "expreco/harness.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace expreco {

namespace {

Rng makeRng(std::uint64_t seed, std::size_t run_index, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run_index), stream};
  return Rng(seq);
}

constexpr std::uint32_t kPlantStream = 1;
constexpr std::uint32_t kRecommenderStream = 2;

std::string runPrefix(std::size_t index) {
  std::ostringstream s;
  s << "run_" << std::setw(3) << std::setfill('0') << index;
  return s.str();
}

std::ptrdiff_t signedVertexDelta(VertexId from, VertexId to, const Path &path) {
  const auto n = static_cast<std::ptrdiff_t>(path.size());
  std::ptrdiff_t d = static_cast<std::ptrdiff_t>(to) - static_cast<std::ptrdiff_t>(from);
  if (path.closed) {
    d = ((d % n) + n) % n;
    if (d > n / 2) d -= n;
  }
  return d;
}

struct RunContext {
  const ExperimentSchedule &schedule;
  const ExperimentConfig &config;
  const Path &path;
  ExperienceStore &store;
  const ExperienceRecommender &recommender;
  std::optional<RunId> previous_run;
};

RunReport simulateRun(const ScheduledRun &scheduled, RunContext &ctx) {
  const auto &cc = ctx.config.controller;
  const double dt = cc.dt;
  const Path &path = ctx.path;

  RunReport report;
  report.index = scheduled.index;
  report.mode = scheduled.mode;
  report.run = ctx.store.beginRun(scheduled.mode);

  Rng plant_rng = makeRng(ctx.schedule.seed, scheduled.index, kPlantStream);
  Rng rec_rng = makeRng(ctx.schedule.seed, scheduled.index, kRecommenderStream);

  MpcController controller(cc);
  controller.reset({cc.v_desired, 0.0});
  ControlGPSet control;
  ControlModelPublisher publisher(makeControlModel(control, ctx.config.hypers));

  VehicleState state{path[0].x, path[0].y, path[0].theta};
  VertexId vertex = 0;
  std::ptrdiff_t progress = 0;
  const auto lap_vertices = static_cast<std::ptrdiff_t>(path.size()) - 1;
  const auto max_steps = static_cast<std::size_t>(
      std::ceil(ctx.config.lap_time_factor * path.length() / (cc.v_desired * dt)));

  std::vector<std::vector<RatePrediction>> horizons;
  std::vector<double> realized;
  double distance = 0.0;

  std::optional<Experience> pending;  // experience awaiting the next measurement
  VehicleState prev_state = state;
  Command prev_command = controller.previous();

  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Localization loc = localizeNear(state, path, vertex, 5, 20);
    progress += signedVertexDelta(vertex, loc.vertex, path);
    vertex = loc.vertex;

    if (pending) {
      pending->g_hat = computeDisturbance(prev_state, prev_command, state, dt);
      ctx.store.record(*pending);
      pending.reset();
    }

    const bool lap_done = path.closed ? progress >= lap_vertices : vertex + 1 >= path.size();
    if (lap_done) break;
    if (std::abs(loc.error.lateral) > ctx.config.divergence_limit) {
      report.failed = true;
      report.failure = "lateral divergence at step " + std::to_string(k);
      break;
    }
    if (k >= max_steps) {
      report.failed = true;
      report.failure = "lap not completed within " + std::to_string(max_steps) + " steps";
      break;
    }

    // recommendation cycle, published before the controller reads the model
    switch (ctx.schedule.method) {
      case Method::Proposed: {
        const auto live = ctx.store.latest(report.run, ctx.recommender.config().live_window_samples);
        const RecommendationCycle cycle =
            ctx.recommender.step(ctx.store.snapshot(), live, vertex, control, rec_rng);
        if (!cycle.skipped) {
          report.events.push_back({k, vertex, path[vertex].curvature, cycle.recommendation.run});
          if (ctx.config.record_scores) {
            for (const auto &s : cycle.recommendation.scores) {
              report.scores.push_back({k, s, cycle.recommendation.run && *cycle.recommendation.run == s.run});
            }
          }
          publisher.publish(makeControlModel(control, ctx.config.hypers));
        }
        break;
      }
      case Method::LastRun: {
        std::optional<std::vector<Experience>> window;
        if (ctx.previous_run) {
          window = ctx.store.windowAhead(*ctx.previous_run, vertex, ctx.recommender.config().ahead_vertices);
        }
        report.events.push_back({k, vertex, path[vertex].curvature, ctx.previous_run});
        control = updateControlSet(control, window, rec_rng, ctx.recommender.config());
        publisher.publish(makeControlModel(control, ctx.config.hypers));
        break;
      }
      case Method::PriorOnly:
        break;
    }

    const auto model = publisher.latest();
    const Command previous = controller.previous();
    const MpcSolution sol = controller.solve(state, path, vertex, model->model);

    StepRecord rec;
    rec.step = k;
    rec.t = t;
    rec.state = state;
    rec.vertex = vertex;
    rec.error = loc.error;
    rec.command = sol.command;
    rec.stage_cost = stageCost(loc.error, sol.command, previous, cc);
    rec.control_set_size = model->set.experiences.size();
    rec.safety_flag = sol.safety_flag;
    rec.fault = sol.fault;
    if (!sol.rollout.empty() && sol.rollout.front().disturbance.size() == 3) {
      rec.gp_theta = sol.rollout.front().disturbance[2];
    }
    report.steps.push_back(rec);
    report.metrics.cumulative_cost += rec.stage_cost;
    if (sol.safety_flag) ++report.metrics.safety_flags;
    if (sol.fault) {
      report.failed = true;
      report.failure = "controller fault at step " + std::to_string(k);
      break;
    }

    std::vector<RatePrediction> horizon;
    horizon.reserve(sol.rollout.size());
    for (std::size_t j = 0; j < sol.rollout.size(); ++j) {
      const auto &d = sol.rollout[j].disturbance[2];
      horizon.push_back({sol.sequence[j].omega + d.mean, d.stddev()});
    }
    horizons.push_back(std::move(horizon));

    const std::string &mode_name =
        scheduled.mid_run_switch && k >= scheduled.mid_run_switch->at_step ? scheduled.mid_run_switch->mode
                                                                           : scheduled.mode;
    const VehicleState next = step(state, sol.command, ctx.schedule.modes.at(mode_name), dt, plant_rng);
    realized.push_back(wrapAngle(next.theta - state.theta) / dt);
    distance += std::hypot(next.x - state.x, next.y - state.y);

    pending = Experience{report.run, vertex, t, makeFeature(sol.command, path[vertex].curvature),
                         Eigen::Vector3d::Zero()};
    prev_state = state;
    prev_command = sol.command;
    state = next;
  }
  ctx.store.sealRun(report.run);

  report.metrics.steps = report.steps.size();
  if (!report.steps.empty()) {
    report.metrics.average_speed = distance / (static_cast<double>(report.steps.size()) * dt);
  }
  const HorizonMetrics hm = aggregateHorizonMetrics(horizons, realized, cc.horizon_steps);
  report.metrics.m_rmse = hm.m_rmse;
  report.metrics.m_rmsz = hm.m_rmsz;
  return report;
}

}  // namespace

bool ExperimentReport::anyFailed() const {
  for (const auto &r : runs) {
    if (r.failed) return true;
  }
  return false;
}

double ExperimentReport::totalCost() const {
  double total = 0.0;
  for (const auto &r : runs) total += r.metrics.cumulative_cost;
  return total;
}

ExperimentReport runExperiment(const ExperimentSchedule &schedule, const ExperimentConfig &config) {
  schedule.validate();
  const Path path = generatePath(schedule.course);
  ExperienceStore store = config.store_dir ? ExperienceStore::open(*config.store_dir, path) : ExperienceStore(path);
  const ExperienceRecommender recommender(config.recommender, config.hypers);

  ExperimentReport report;
  report.method = schedule.method;
  report.seed = schedule.seed;
  RunContext ctx{schedule, config, path, store, recommender, std::nullopt};
  for (const auto &scheduled : schedule.runs) {
    report.runs.push_back(simulateRun(scheduled, ctx));
    ctx.previous_run = report.runs.back().run;
  }

  for (const auto &id : store.runIds()) report.labels[id] = store.groundTruthLabel(id);
  const auto label_of = [&report](RunId id) { return report.labels.at(id); };
  std::vector<LabelledEvents> labelled;
  for (auto &r : report.runs) {
    r.metrics.source_fractions = sourceFractions(r.events, label_of);
    const auto none = r.metrics.source_fractions.find(kNoneColumn);
    r.metrics.none_fraction = none == r.metrics.source_fractions.end() ? 0.0 : none->second;
    labelled.push_back({r.mode, r.events});
  }
  report.confusion = confusionMatrix(labelled, label_of);
  return report;
}

// --- logs and reports -----------------------------------------------------------

void writeReport(const ExperimentReport &report, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  using nlohmann::ordered_json;
  ordered_json root;
  root["method"] = toString(report.method);
  root["seed"] = report.seed;
  root["runs"] = ordered_json::array();
  for (const auto &r : report.runs) {
    ordered_json j;
    j["index"] = r.index;
    j["run_id"] = r.run.value;
    j["mode"] = r.mode;
    j["failed"] = r.failed;
    j["failure"] = r.failure;
    j["m_rmse"] = r.metrics.m_rmse;
    j["m_rmsz"] = r.metrics.m_rmsz;
    j["cumulative_cost"] = r.metrics.cumulative_cost;
    j["average_speed"] = r.metrics.average_speed;
    j["none_fraction"] = r.metrics.none_fraction;
    j["source_fractions"] = r.metrics.source_fractions;
    j["steps"] = r.metrics.steps;
    j["safety_flags"] = r.metrics.safety_flags;
    root["runs"].push_back(j);

    const std::string prefix = runPrefix(r.index);
    std::ofstream steps(dir / (prefix + "_steps.csv"), std::ios::trunc);
    steps << "step,t,x,y,theta,vertex,lateral,heading,v_cmd,omega_cmd,stage_cost,gp_mu_theta,gp_sigma_theta,"
             "control_set_size,safety_flag,fault\n";
    for (const auto &s : r.steps) {
      steps << s.step << ',' << formatDouble(s.t) << ',' << formatDouble(s.state.x) << ','
            << formatDouble(s.state.y) << ',' << formatDouble(s.state.theta) << ',' << s.vertex << ','
            << formatDouble(s.error.lateral) << ',' << formatDouble(s.error.heading) << ','
            << formatDouble(s.command.v) << ',' << formatDouble(s.command.omega) << ','
            << formatDouble(s.stage_cost) << ',' << formatDouble(s.gp_theta.mean) << ','
            << formatDouble(s.gp_theta.stddev()) << ',' << s.control_set_size << ',' << int(s.safety_flag) << ','
            << int(s.fault) << '\n';
    }
    std::ofstream scores(dir / (prefix + "_scores.csv"), std::ios::trunc);
    scores << "step,candidate_run,p_b,n_out,trials,L_i,prior_L,accepted,chosen\n";
    for (const auto &s : r.scores) {
      scores << s.step << ',' << s.score.run.value << ',' << formatDouble(s.score.p_b) << ',' << s.score.n_out << ','
             << s.score.trials << ',' << formatDouble(s.score.log_likelihood) << ','
             << formatDouble(s.score.prior_log_likelihood) << ',' << int(s.score.accepted) << ',' << int(s.chosen)
             << '\n';
    }
    std::ofstream events(dir / (prefix + "_events.csv"), std::ios::trunc);
    events << "step,vertex,curvature,chosen_run,chosen_label\n";
    for (const auto &e : r.events) {
      events << e.step << ',' << e.vertex << ',' << formatDouble(e.curvature) << ','
             << (e.chosen ? e.chosen->value : -1) << ',' << (e.chosen ? report.labels.at(*e.chosen) : kNoneColumn)
             << '\n';
    }
  }
  double total = 0.0;
  std::size_t failed = 0;
  for (const auto &r : report.runs) {
    total += r.metrics.cumulative_cost;
    failed += r.failed ? 1 : 0;
  }
  root["aggregate"] = {{"total_cost", total}, {"failed_runs", failed}, {"runs", report.runs.size()}};
  ordered_json confusion;
  for (const auto &[row, cols] : report.confusion.fractions) {
    confusion[row] = cols;
  }
  root["confusion"] = confusion;
  std::ofstream(dir / "report.json", std::ios::trunc) << root.dump(2) << '\n';
}

ReportSummary readReport(const std::filesystem::path &dir) {
  std::ifstream in(dir / "report.json");
  if (!in) throw ConfigError("cannot read " + (dir / "report.json").string());
  const auto root = nlohmann::json::parse(in);
  ReportSummary s;
  s.method = root.at("method").get<std::string>();
  s.seed = root.at("seed").get<std::uint64_t>();
  for (const auto &j : root.at("runs")) {
    ReportSummary::Run r;
    r.index = j.at("index").get<std::size_t>();
    r.mode = j.at("mode").get<std::string>();
    r.failed = j.at("failed").get<bool>();
    r.m_rmse = j.at("m_rmse").get<double>();
    r.m_rmsz = j.at("m_rmsz").get<double>();
    r.cumulative_cost = j.at("cumulative_cost").get<double>();
    r.average_speed = j.at("average_speed").get<double>();
    r.none_fraction = j.at("none_fraction").get<double>();
    s.runs.push_back(r);
  }
  if (root.contains("confusion") && root["confusion"].is_object()) {
    for (const auto &[row, cols] : root["confusion"].items()) {
      for (const auto &[col, v] : cols.items()) s.confusion.fractions[row][col] = v.get<double>();
    }
  }
  return s;
}

std::string formatReport(const ReportSummary &summary) {
  std::ostringstream out;
  out << "method " << summary.method << ", seed " << summary.seed << "\n";
  out << std::left << std::setw(5) << "run" << std::setw(10) << "mode" << std::right << std::setw(10) << "M-RMSE"
      << std::setw(10) << "M-RMSZ" << std::setw(12) << "cost" << std::setw(9) << "speed" << std::setw(8) << "none"
      << "  status\n";
  out << std::fixed;
  double total = 0.0;
  for (const auto &r : summary.runs) {
    out << std::left << std::setw(5) << r.index << std::setw(10) << r.mode << std::right << std::setprecision(4)
        << std::setw(10) << r.m_rmse << std::setw(10) << r.m_rmsz << std::setprecision(1) << std::setw(12)
        << r.cumulative_cost << std::setprecision(3) << std::setw(9) << r.average_speed << std::setprecision(2)
        << std::setw(8) << r.none_fraction << "  " << (r.failed ? "FAILED" : "ok") << "\n";
    total += r.cumulative_cost;
  }
  out << "total cost " << std::setprecision(1) << total << "\n";
  if (!summary.confusion.fractions.empty()) {
    out << "\nrecommendation sources by live condition\n";
    for (const auto &[row, cols] : summary.confusion.fractions) {
      out << "  " << std::left << std::setw(10) << row;
      for (const auto &[col, v] : cols) out << "  " << col << "=" << std::setprecision(3) << v;
      out << "\n";
    }
  }
  return out.str();
}

std::string formatComparison(const ReportSummary &a, const ReportSummary &b) {
  std::ostringstream out;
  out << "deltas (" << b.method << " - " << a.method << ")\n";
  out << std::left << std::setw(5) << "run" << std::setw(10) << "mode" << std::right << std::setw(11) << "dM-RMSE"
      << std::setw(11) << "dM-RMSZ" << std::setw(12) << "dcost" << std::setw(9) << "dspeed\n";
  out << std::fixed;
  const std::size_t n = std::min(a.runs.size(), b.runs.size());
  double cost_a = 0.0;
  double cost_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto &ra = a.runs[i];
    const auto &rb = b.runs[i];
    out << std::left << std::setw(5) << ra.index << std::setw(10) << ra.mode << std::right << std::setprecision(4)
        << std::setw(11) << rb.m_rmse - ra.m_rmse << std::setw(11) << rb.m_rmsz - ra.m_rmsz << std::setprecision(1)
        << std::setw(12) << rb.cumulative_cost - ra.cumulative_cost << std::setprecision(3) << std::setw(9)
        << rb.average_speed - ra.average_speed << "\n";
    cost_a += ra.cumulative_cost;
    cost_b += rb.cumulative_cost;
  }
  if (a.runs.size() != b.runs.size()) out << "warning: run counts differ, compared the first " << n << "\n";
  out << std::setprecision(1) << "total cost a " << cost_a << ", b " << cost_b;
  if (cost_a > 0.0) out << std::setprecision(3) << ", ratio b/a " << cost_b / cost_a;
  out << "\n";
  return out.str();
}

}  // namespace expreco
