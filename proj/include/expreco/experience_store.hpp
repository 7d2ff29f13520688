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
 * \file experience_store.hpp
 * \brief Vertex-indexed, run-partitioned experience storage and the data
 * windows used for run scoring and control-GP updates.
 *
 * Runs are appended to by a single writer while live and become immutable
 * once sealed. Ground-truth mode labels are kept apart from experience data:
 * StoreSnapshot, the only view handed to the recommender, carries no labels.
 */
#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "expreco/vehicle.hpp"

namespace expreco {

inline constexpr Eigen::Index kFeatureDim = 3;  // (v_cmd, omega_cmd, curvature)
inline constexpr Eigen::Index kOutputDim = 3;   // (g_x, g_y, g_theta)

using FeatureVector = Eigen::Vector3d;
using VertexId = std::size_t;

struct RunId {
  std::int64_t value = 0;
  auto operator<=>(const RunId &) const = default;
};

struct Experience {
  RunId run;
  VertexId vertex = 0;
  double t = 0.0;
  FeatureVector a = FeatureVector::Zero();
  Eigen::Vector3d g_hat = Eigen::Vector3d::Zero();
};

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observed disturbance (x_now - f(x_prev, u_prev)) / dt with the heading
/// difference wrapped before scaling.
Eigen::Vector3d computeDisturbance(const VehicleState &x_prev, const Command &u_prev, const VehicleState &x_now,
                                   double dt);

/// Feature vector a = (v_cmd, omega_cmd, curvature).
FeatureVector makeFeature(const Command &cmd, double curvature);

/// Stacks experience features (m x 3) and observations (m x 3).
Eigen::MatrixXd featureMatrix(std::span<const Experience> experiences);
Eigen::MatrixXd observationMatrix(std::span<const Experience> experiences);

/// Experience data for one run, indexed by vertex.
class RunData {
 public:
  RunData(RunId id, std::size_t vertex_count);

  RunId id() const { return id_; }
  const std::vector<Experience> &experiences() const { return experiences_; }
  std::size_t size() const { return experiences_.size(); }

  void append(const Experience &exp);

  /// Experiences at vertices first..last inclusive walking forward along the
  /// path (wrapping on closed paths), ordered by vertex then time.
  std::vector<Experience> range(VertexId first, std::size_t count) const;

 private:
  RunId id_;
  std::vector<Experience> experiences_;
  std::vector<std::vector<std::uint32_t>> by_vertex_;
};

/// Vertex-range arithmetic shared by all window queries.
struct PathTopology {
  std::size_t vertex_count = 0;
  bool closed = false;

  /// (first vertex, vertex count) of the n vertices ending at `current`.
  std::pair<VertexId, std::size_t> behind(VertexId current, std::size_t n) const;
  /// (first vertex, vertex count) of the n vertices strictly ahead of `current`.
  std::pair<VertexId, std::size_t> ahead(VertexId current, std::size_t n) const;
  /// Number of vertices walking forward from `first` to `last` inclusive.
  std::size_t span(VertexId first, VertexId last) const;
};

/// Immutable point-in-time view of sealed runs. Copying is O(1) in the
/// number of stored runs.
class StoreSnapshot {
 public:
  StoreSnapshot() = default;
  StoreSnapshot(PathTopology topology, std::shared_ptr<const std::vector<std::shared_ptr<const RunData>>> runs);

  std::size_t runCount() const { return runs_ ? runs_->size() : 0; }
  /// Sealed runs, oldest first.
  std::span<const std::shared_ptr<const RunData>> runs() const;
  const RunData *find(RunId id) const;
  const PathTopology &topology() const { return topology_; }

  std::vector<Experience> windowRange(RunId run, VertexId first, VertexId last) const;
  std::vector<Experience> windowBehind(RunId run, VertexId current, std::size_t n_v) const;
  std::vector<Experience> windowAhead(RunId run, VertexId current, std::size_t n_ahead) const;

 private:
  PathTopology topology_;
  std::shared_ptr<const std::vector<std::shared_ptr<const RunData>>> runs_;
};

class ExperienceStore {
 public:
  explicit ExperienceStore(Path path);

  /// Opens (or creates) a persistent store rooted at `dir`. Existing runs are
  /// loaded; new records are appended to per-run CSV files as they arrive.
  static ExperienceStore open(const std::filesystem::path &dir, Path path);
  /// Loads a persisted store including its path file.
  static ExperienceStore load(const std::filesystem::path &dir);

  ExperienceStore(ExperienceStore &&) = default;
  ExperienceStore &operator=(ExperienceStore &&) = default;

  const Path &path() const { return path_; }
  PathTopology topology() const { return {path_.size(), path_.closed}; }

  /// Starts a new live run. Any previous live run must be sealed first.
  RunId beginRun(const std::string &mode_label);
  void record(const Experience &exp);
  void sealRun(RunId run);

  std::optional<RunId> liveRun() const;
  std::vector<RunId> runIds() const;
  std::size_t runCount() const;

  std::vector<Experience> windowBehind(RunId run, VertexId current, std::size_t n_v) const;
  std::vector<Experience> windowAhead(RunId run, VertexId current, std::size_t n_ahead) const;
  std::vector<Experience> windowRange(RunId run, VertexId first, VertexId last) const;
  /// The `count` most recent experiences of a run in time order.
  std::vector<Experience> latest(RunId run, std::size_t count) const;
  const std::vector<Experience> &experiences(RunId run) const;

  StoreSnapshot snapshot() const;

  /// Ground-truth condition label. For reporting only.
  const std::string &groundTruthLabel(RunId run) const;

  /// Writes path.csv, runs.csv and one run_<id>.csv per run.
  void save(const std::filesystem::path &dir) const;

 private:
  const RunData &run(RunId id) const;
  void validate(const Experience &exp) const;
  void writeManifest() const;

  Path path_;
  std::map<RunId, std::shared_ptr<RunData>> runs_;
  std::map<RunId, std::string> labels_;
  std::optional<RunId> live_;
  std::int64_t next_id_ = 1;

  std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
  std::shared_ptr<const std::vector<std::shared_ptr<const RunData>>> sealed_ =
      std::make_shared<const std::vector<std::shared_ptr<const RunData>>>();

  std::optional<std::filesystem::path> dir_;
  std::unique_ptr<std::ofstream> live_log_;
};

// --- CSV formats --------------------------------------------------------------

/// run_id,vertex,t,a_0,a_1,a_2,g_x,g_y,g_theta
std::string experienceCsvHeader();
std::string toCsvRow(const Experience &exp);
Experience experienceFromCsv(const std::string &line);

/// vertex,x,y,theta,curvature. Spacing and closure are recovered from the
/// geometry on read.
void writePathCsv(const std::filesystem::path &file, const Path &path);
Path readPathCsv(const std::filesystem::path &file);

/// Shortest round-trip decimal representation.
std::string formatDouble(double value);

}  // namespace expreco
