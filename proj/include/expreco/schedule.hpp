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
 * \file schedule.hpp
 * \brief Experiment schedules and their YAML representation.
 *
 * \code{.yaml}
 * course:                 # or "course: benchmark"
 *   closed: true
 *   spacing: 0.15
 *   segments:
 *     - {type: straight, length: 11.5}
 *     - {type: arc, radius: 3.0, angle_deg: 90}
 * modes:                  # optional; extends/overrides nominal, altered, loaded
 *   - {name: icy, turn_gain: 0.5, noise_std: [0.02, 0.02, 0.03]}
 * runs:
 *   - {mode: nominal, repeat: 3}
 *   - {mode: altered, switch_at_step: 120, switch_to: nominal}
 * method: proposed        # optional
 * seed: 7                 # optional
 * \endcode
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "expreco/vehicle.hpp"

namespace expreco {

enum class Method { Proposed, LastRun, PriorOnly };

std::string toString(Method method);
Method parseMethod(const std::string &text);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MidRunSwitch {
  std::size_t at_step = 0;
  std::string mode;
};

struct ScheduledRun {
  std::size_t index = 0;  // 1-based, contiguous
  std::string mode;
  std::optional<MidRunSwitch> mid_run_switch;
};

struct ExperimentSchedule {
  std::vector<ScheduledRun> runs;
  Method method = Method::Proposed;
  std::uint64_t seed = 0;
  CourseSpec course = CourseSpec::benchmark();
  std::map<std::string, ModeConfig> modes = builtinModes();

  /// Throws ConfigError when a run references an unknown mode or indices are
  /// not contiguous from 1.
  void validate() const;

  static std::map<std::string, ModeConfig> builtinModes();

  /// Blocks of `runs_per_block` runs cycling through `modes`, `cycles` times.
  static ExperimentSchedule cycling(const std::vector<std::string> &modes, std::size_t runs_per_block,
                                    std::size_t cycles, Method method, std::uint64_t seed);
};

ExperimentSchedule parseSchedule(const std::string &yaml_text);
ExperimentSchedule loadSchedule(const std::filesystem::path &file);

CourseSpec parseCourse(const std::string &yaml_text);

}  // namespace expreco
