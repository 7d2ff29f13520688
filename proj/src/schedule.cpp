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

#include "expreco/schedule.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace expreco {

namespace {

CourseSpec courseFromNode(const YAML::Node &node) {
  if (node.IsScalar()) {
    if (node.as<std::string>() == "benchmark") return CourseSpec::benchmark();
    throw ConfigError("unknown course '" + node.as<std::string>() + "'");
  }
  CourseSpec spec;
  spec.closed = node["closed"] ? node["closed"].as<bool>() : true;
  spec.spacing = node["spacing"] ? node["spacing"].as<double>() : 0.15;
  if (!node["segments"] || !node["segments"].IsSequence()) throw ConfigError("course: missing segments");
  for (const auto &s : node["segments"]) {
    const auto type = s["type"].as<std::string>("");
    CourseSegment seg;
    if (type == "straight") {
      seg.kind = CourseSegment::Kind::Straight;
      seg.length = s["length"].as<double>(0.0);
    } else if (type == "arc") {
      seg.kind = CourseSegment::Kind::Arc;
      seg.radius = s["radius"].as<double>(0.0);
      if (s["angle_deg"]) {
        seg.angle = s["angle_deg"].as<double>() * std::numbers::pi / 180.0;
      } else {
        seg.angle = s["angle"].as<double>(0.0);
      }
    } else {
      throw ConfigError("course: unknown segment type '" + type + "'");
    }
    if (seg.kind == CourseSegment::Kind::Straight && !(seg.length > 0.0)) {
      throw ConfigError("course: straight length must be positive");
    }
    if (seg.kind == CourseSegment::Kind::Arc && (!(seg.radius > 0.0) || seg.angle == 0.0)) {
      throw ConfigError("course: arc radius must be positive and angle non-zero");
    }
    spec.segments.push_back(seg);
  }
  if (!(spec.spacing > 0.0)) throw ConfigError("course: spacing must be positive");
  return spec;
}

ModeConfig modeFromNode(const YAML::Node &node, const std::map<std::string, ModeConfig> &known) {
  const auto name = node["name"].as<std::string>("");
  if (name.empty()) throw ConfigError("mode: missing name");
  ModeConfig mode;
  if (auto it = known.find(name); it != known.end()) mode = it->second;
  mode.name = name;
  if (node["turn_gain"]) mode.turn_gain = node["turn_gain"].as<double>();
  if (node["lateral_slip_gain"]) mode.lateral_slip_gain = node["lateral_slip_gain"].as<double>();
  if (node["drag_gain"]) mode.drag_gain = node["drag_gain"].as<double>();
  if (node["noise_std"]) {
    const auto std_dev = node["noise_std"].as<std::vector<double>>();
    if (std_dev.size() != 3) throw ConfigError("mode '" + name + "': noise_std needs three entries");
    for (int i = 0; i < 3; ++i) mode.noise_variance[i] = std_dev[static_cast<std::size_t>(i)] * std_dev[static_cast<std::size_t>(i)];
  }
  try {
    mode.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(e.what());
  }
  return mode;
}

}  // namespace

std::string toString(Method method) {
  switch (method) {
    case Method::Proposed:
      return "proposed";
    case Method::LastRun:
      return "last_run";
    case Method::PriorOnly:
      return "prior_only";
  }
  return "unknown";
}

Method parseMethod(const std::string &text) {
  if (text == "proposed") return Method::Proposed;
  if (text == "last_run") return Method::LastRun;
  if (text == "prior_only") return Method::PriorOnly;
  throw ConfigError("unknown method '" + text + "'");
}

std::map<std::string, ModeConfig> ExperimentSchedule::builtinModes() {
  return {{"nominal", ModeConfig::nominal()}, {"altered", ModeConfig::altered()}, {"loaded", ModeConfig::loaded()}};
}

void ExperimentSchedule::validate() const {
  if (runs.empty()) throw ConfigError("schedule: no runs");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].index != i + 1) throw ConfigError("schedule: run indices must be contiguous from 1");
    if (!modes.count(runs[i].mode)) throw ConfigError("schedule: unknown mode '" + runs[i].mode + "'");
    if (runs[i].mid_run_switch && !modes.count(runs[i].mid_run_switch->mode)) {
      throw ConfigError("schedule: unknown mode '" + runs[i].mid_run_switch->mode + "'");
    }
  }
}

ExperimentSchedule ExperimentSchedule::cycling(const std::vector<std::string> &mode_names, std::size_t runs_per_block,
                                               std::size_t cycles, Method method, std::uint64_t seed) {
  ExperimentSchedule s;
  s.method = method;
  s.seed = seed;
  for (std::size_t c = 0; c < cycles; ++c) {
    for (const auto &m : mode_names) {
      for (std::size_t r = 0; r < runs_per_block; ++r) s.runs.push_back({s.runs.size() + 1, m, std::nullopt});
    }
  }
  return s;
}

ExperimentSchedule parseSchedule(const std::string &yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception &e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  ExperimentSchedule s;
  try {
    if (root["course"]) s.course = courseFromNode(root["course"]);
    if (root["modes"]) {
      for (const auto &m : root["modes"]) {
        ModeConfig mode = modeFromNode(m, s.modes);
        s.modes[mode.name] = mode;
      }
    }
    if (root["method"]) s.method = parseMethod(root["method"].as<std::string>());
    if (root["seed"]) s.seed = root["seed"].as<std::uint64_t>();
    if (!root["runs"] || !root["runs"].IsSequence()) throw ConfigError("schedule: missing runs list");
    for (const auto &r : root["runs"]) {
      ScheduledRun run;
      if (r.IsScalar()) {
        run.mode = r.as<std::string>();
        run.index = s.runs.size() + 1;
        s.runs.push_back(run);
        continue;
      }
      run.mode = r["mode"].as<std::string>("");
      if (r["switch_at_step"]) {
        run.mid_run_switch = MidRunSwitch{r["switch_at_step"].as<std::size_t>(), r["switch_to"].as<std::string>("")};
      }
      const auto repeat = r["repeat"].as<std::size_t>(1);
      for (std::size_t i = 0; i < repeat; ++i) {
        run.index = s.runs.size() + 1;
        s.runs.push_back(run);
      }
    }
  } catch (const YAML::Exception &e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
  s.validate();
  return s;
}

ExperimentSchedule loadSchedule(const std::filesystem::path &file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read schedule " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parseSchedule(buf.str());
}

CourseSpec parseCourse(const std::string &yaml_text) {
  try {
    return courseFromNode(YAML::Load(yaml_text));
  } catch (const YAML::Exception &e) {
    throw ConfigError(std::string("course: ") + e.what());
  }
}

}  // namespace expreco
