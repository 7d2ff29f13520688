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

#include "expreco/experience_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace expreco {

namespace {

std::vector<std::string> splitCsv(const std::string &line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

double parseDouble(const std::string &text) {
  double value = 0.0;
  const auto *end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw StoreError("csv: bad number '" + text + "'");
  return value;
}

std::int64_t parseInt(const std::string &text) {
  std::int64_t value = 0;
  const auto *end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw StoreError("csv: bad integer '" + text + "'");
  return value;
}

std::string runFileName(RunId id) { return "run_" + std::to_string(id.value) + ".csv"; }

}  // namespace

std::string formatDouble(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

Eigen::Vector3d computeDisturbance(const VehicleState &x_prev, const Command &u_prev, const VehicleState &x_now,
                                   double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("computeDisturbance: dt must be positive");
  const VehicleState predicted = unicycle(x_prev, u_prev, dt);
  return {(x_now.x - predicted.x) / dt, (x_now.y - predicted.y) / dt,
          wrapAngle(x_now.theta - predicted.theta) / dt};
}

FeatureVector makeFeature(const Command &cmd, double curvature) { return {cmd.v, cmd.omega, curvature}; }

Eigen::MatrixXd featureMatrix(std::span<const Experience> experiences) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(experiences.size()), kFeatureDim);
  for (std::size_t i = 0; i < experiences.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = experiences[i].a;
  return m;
}

Eigen::MatrixXd observationMatrix(std::span<const Experience> experiences) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(experiences.size()), kOutputDim);
  for (std::size_t i = 0; i < experiences.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = experiences[i].g_hat;
  return m;
}

// --- RunData ----------------------------------------------------------------

RunData::RunData(RunId id, std::size_t vertex_count) : id_(id), by_vertex_(vertex_count) {}

void RunData::append(const Experience &exp) {
  by_vertex_.at(exp.vertex).push_back(static_cast<std::uint32_t>(experiences_.size()));
  experiences_.push_back(exp);
}

std::vector<Experience> RunData::range(VertexId first, std::size_t count) const {
  std::vector<Experience> out;
  const std::size_t n = by_vertex_.size();
  if (n == 0) return out;
  for (std::size_t i = 0; i < count; ++i) {
    for (auto idx : by_vertex_[(first + i) % n]) out.push_back(experiences_[idx]);
  }
  return out;
}

// --- PathTopology -------------------------------------------------------------

std::pair<VertexId, std::size_t> PathTopology::behind(VertexId current, std::size_t n) const {
  if (vertex_count == 0 || n == 0) return {0, 0};
  if (closed) {
    const std::size_t count = std::min(n, vertex_count);
    return {(current + vertex_count - (count - 1)) % vertex_count, count};
  }
  const std::size_t count = std::min(n, current + 1);
  return {current + 1 - count, count};
}

std::pair<VertexId, std::size_t> PathTopology::ahead(VertexId current, std::size_t n) const {
  if (vertex_count == 0 || n == 0) return {0, 0};
  if (closed) {
    return {(current + 1) % vertex_count, std::min(n, vertex_count - 1)};
  }
  if (current + 1 >= vertex_count) return {0, 0};
  return {current + 1, std::min(n, vertex_count - 1 - current)};
}

std::size_t PathTopology::span(VertexId first, VertexId last) const {
  if (vertex_count == 0) return 0;
  if (closed) return (last + vertex_count - first) % vertex_count + 1;
  return last >= first ? last - first + 1 : 0;
}

// --- StoreSnapshot --------------------------------------------------------------

StoreSnapshot::StoreSnapshot(PathTopology topology,
                             std::shared_ptr<const std::vector<std::shared_ptr<const RunData>>> runs)
    : topology_(topology), runs_(std::move(runs)) {}

std::span<const std::shared_ptr<const RunData>> StoreSnapshot::runs() const {
  if (!runs_) return {};
  return {runs_->data(), runs_->size()};
}

const RunData *StoreSnapshot::find(RunId id) const {
  if (!runs_) return nullptr;
  // runs are appended in id order
  auto it = std::lower_bound(runs_->begin(), runs_->end(), id,
                             [](const std::shared_ptr<const RunData> &r, RunId v) { return r->id() < v; });
  if (it == runs_->end() || (*it)->id() != id) return nullptr;
  return it->get();
}

std::vector<Experience> StoreSnapshot::windowRange(RunId run, VertexId first, VertexId last) const {
  const RunData *r = find(run);
  if (!r) return {};
  return r->range(first, topology_.span(first, last));
}

std::vector<Experience> StoreSnapshot::windowBehind(RunId run, VertexId current, std::size_t n_v) const {
  const RunData *r = find(run);
  if (!r) return {};
  auto [first, count] = topology_.behind(current, n_v);
  return r->range(first, count);
}

std::vector<Experience> StoreSnapshot::windowAhead(RunId run, VertexId current, std::size_t n_ahead) const {
  const RunData *r = find(run);
  if (!r) return {};
  auto [first, count] = topology_.ahead(current, n_ahead);
  return r->range(first, count);
}

// --- ExperienceStore ------------------------------------------------------------

ExperienceStore::ExperienceStore(Path path) : path_(std::move(path)) {
  if (path_.empty()) throw StoreError("store: path has no vertices");
}

const RunData &ExperienceStore::run(RunId id) const {
  auto it = runs_.find(id);
  if (it == runs_.end()) throw StoreError("store: unknown run " + std::to_string(id.value));
  return *it->second;
}

RunId ExperienceStore::beginRun(const std::string &mode_label) {
  if (live_) throw StoreError("store: run " + std::to_string(live_->value) + " is still live");
  const RunId id{next_id_++};
  runs_.emplace(id, std::make_shared<RunData>(id, path_.size()));
  labels_.emplace(id, mode_label);
  live_ = id;
  if (dir_) {
    live_log_ = std::make_unique<std::ofstream>(*dir_ / runFileName(id), std::ios::trunc);
    *live_log_ << experienceCsvHeader() << '\n';
    writeManifest();
  }
  return id;
}

void ExperienceStore::validate(const Experience &exp) const {
  if (!runs_.count(exp.run)) throw StoreError("store: unknown run " + std::to_string(exp.run.value));
  if (!live_ || *live_ != exp.run) {
    throw StoreError("store: run " + std::to_string(exp.run.value) + " is sealed");
  }
  if (exp.vertex >= path_.size()) throw StoreError("store: vertex out of range");
  if (!exp.a.allFinite() || !exp.g_hat.allFinite() || !std::isfinite(exp.t)) {
    throw StoreError("store: non-finite experience");
  }
  const auto &existing = runs_.at(exp.run)->experiences();
  if (!existing.empty() && exp.t < existing.back().t) {
    throw StoreError("store: experiences must arrive in time order");
  }
}

void ExperienceStore::record(const Experience &exp) {
  validate(exp);
  runs_.at(exp.run)->append(exp);
  if (live_log_) *live_log_ << toCsvRow(exp) << '\n';
}

void ExperienceStore::sealRun(RunId id) {
  if (!live_ || *live_ != id) throw StoreError("store: run " + std::to_string(id.value) + " is not live");
  auto sealed = std::make_shared<std::vector<std::shared_ptr<const RunData>>>(*sealed_);
  sealed->push_back(runs_.at(id));
  {
    std::lock_guard<std::mutex> lock(*mutex_);
    sealed_ = std::move(sealed);
  }
  live_.reset();
  if (live_log_) {
    live_log_->flush();
    live_log_.reset();
    writeManifest();
  }
}

std::optional<RunId> ExperienceStore::liveRun() const { return live_; }

std::vector<RunId> ExperienceStore::runIds() const {
  std::vector<RunId> ids;
  for (const auto &[id, _] : runs_) ids.push_back(id);
  return ids;
}

std::size_t ExperienceStore::runCount() const { return runs_.size(); }

std::vector<Experience> ExperienceStore::windowBehind(RunId id, VertexId current, std::size_t n_v) const {
  if (n_v == 0) throw std::invalid_argument("windowBehind: n_v must be at least 1");
  auto [first, count] = topology().behind(current, n_v);
  return run(id).range(first, count);
}

std::vector<Experience> ExperienceStore::windowAhead(RunId id, VertexId current, std::size_t n_ahead) const {
  if (n_ahead == 0) throw std::invalid_argument("windowAhead: n_ahead must be at least 1");
  auto [first, count] = topology().ahead(current, n_ahead);
  return run(id).range(first, count);
}

std::vector<Experience> ExperienceStore::windowRange(RunId id, VertexId first, VertexId last) const {
  return run(id).range(first, topology().span(first, last));
}

std::vector<Experience> ExperienceStore::latest(RunId id, std::size_t count) const {
  const auto &all = run(id).experiences();
  const std::size_t n = std::min(count, all.size());
  return {all.end() - static_cast<std::ptrdiff_t>(n), all.end()};
}

const std::vector<Experience> &ExperienceStore::experiences(RunId id) const { return run(id).experiences(); }

StoreSnapshot ExperienceStore::snapshot() const {
  std::lock_guard<std::mutex> lock(*mutex_);
  return StoreSnapshot(topology(), sealed_);
}

const std::string &ExperienceStore::groundTruthLabel(RunId id) const {
  auto it = labels_.find(id);
  if (it == labels_.end()) throw StoreError("store: unknown run " + std::to_string(id.value));
  return it->second;
}

// --- persistence ----------------------------------------------------------------

std::string experienceCsvHeader() { return "run_id,vertex,t,a_0,a_1,a_2,g_x,g_y,g_theta"; }

std::string toCsvRow(const Experience &exp) {
  std::string row = std::to_string(exp.run.value) + ',' + std::to_string(exp.vertex) + ',' + formatDouble(exp.t);
  for (Eigen::Index i = 0; i < kFeatureDim; ++i) row += ',' + formatDouble(exp.a[i]);
  for (Eigen::Index i = 0; i < kOutputDim; ++i) row += ',' + formatDouble(exp.g_hat[i]);
  return row;
}

Experience experienceFromCsv(const std::string &line) {
  const auto f = splitCsv(line);
  if (f.size() != 3 + kFeatureDim + kOutputDim) throw StoreError("csv: wrong column count in '" + line + "'");
  Experience exp;
  exp.run = RunId{parseInt(f[0])};
  exp.vertex = static_cast<VertexId>(parseInt(f[1]));
  exp.t = parseDouble(f[2]);
  for (Eigen::Index i = 0; i < kFeatureDim; ++i) exp.a[i] = parseDouble(f[3 + i]);
  for (Eigen::Index i = 0; i < kOutputDim; ++i) exp.g_hat[i] = parseDouble(f[3 + kFeatureDim + i]);
  return exp;
}

void writePathCsv(const std::filesystem::path &file, const Path &path) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw StoreError("cannot write " + file.string());
  out << "vertex,x,y,theta,curvature\n";
  for (std::size_t i = 0; i < path.size(); ++i) {
    const auto &v = path[i];
    out << i << ',' << formatDouble(v.x) << ',' << formatDouble(v.y) << ',' << formatDouble(v.theta) << ','
        << formatDouble(v.curvature) << '\n';
  }
}

Path readPathCsv(const std::filesystem::path &file) {
  std::ifstream in(file);
  if (!in) throw StoreError("cannot read " + file.string());
  std::string line;
  std::getline(in, line);
  Path path;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = splitCsv(line);
    if (f.size() != 5) throw StoreError("path csv: wrong column count");
    if (static_cast<std::size_t>(parseInt(f[0])) != path.size()) throw StoreError("path csv: vertices out of order");
    path.vertices.push_back({parseDouble(f[1]), parseDouble(f[2]), parseDouble(f[3]), parseDouble(f[4])});
  }
  if (path.size() >= 2) {
    const auto &a = path[0];
    const auto &b = path[1];
    path.spacing = std::hypot(b.x - a.x, b.y - a.y);
    const auto &last = path.vertices.back();
    const double gap = std::hypot(a.x - last.x, a.y - last.y);
    path.closed = path.size() > 2 && gap < 1.5 * path.spacing;
  }
  return path;
}

void ExperienceStore::writeManifest() const {
  if (!dir_) return;
  std::ofstream out(*dir_ / "runs.csv", std::ios::trunc);
  out << "run_id,label,sealed\n";
  for (const auto &[id, label] : labels_) {
    out << id.value << ',' << label << ',' << ((live_ && *live_ == id) ? 0 : 1) << '\n';
  }
}

void ExperienceStore::save(const std::filesystem::path &dir) const {
  std::filesystem::create_directories(dir);
  writePathCsv(dir / "path.csv", path_);
  std::ofstream manifest(dir / "runs.csv", std::ios::trunc);
  manifest << "run_id,label,sealed\n";
  for (const auto &[id, data] : runs_) {
    manifest << id.value << ',' << labels_.at(id) << ',' << ((live_ && *live_ == id) ? 0 : 1) << '\n';
    std::ofstream out(dir / runFileName(id), std::ios::trunc);
    out << experienceCsvHeader() << '\n';
    for (const auto &exp : data->experiences()) out << toCsvRow(exp) << '\n';
  }
}

ExperienceStore ExperienceStore::load(const std::filesystem::path &dir) {
  ExperienceStore store(readPathCsv(dir / "path.csv"));
  std::ifstream manifest(dir / "runs.csv");
  if (!manifest) return store;
  std::string line;
  std::getline(manifest, line);
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const auto f = splitCsv(line);
    if (f.size() != 3) throw StoreError("runs.csv: wrong column count");
    const RunId id{parseInt(f[0])};
    auto data = std::make_shared<RunData>(id, store.path_.size());
    std::ifstream in(dir / runFileName(id));
    std::string row;
    std::getline(in, row);
    while (std::getline(in, row)) {
      if (row.empty()) continue;
      Experience exp = experienceFromCsv(row);
      if (exp.run != id || exp.vertex >= store.path_.size()) throw StoreError("run log: inconsistent row");
      data->append(exp);
    }
    // an unsealed run left by an interrupted session is loaded as sealed
    store.runs_.emplace(id, data);
    store.labels_.emplace(id, f[1]);
    store.next_id_ = std::max(store.next_id_, id.value + 1);
  }
  auto sealed = std::make_shared<std::vector<std::shared_ptr<const RunData>>>();
  for (const auto &[id, data] : store.runs_) sealed->push_back(data);
  store.sealed_ = std::move(sealed);
  return store;
}

ExperienceStore ExperienceStore::open(const std::filesystem::path &dir, Path path) {
  std::filesystem::create_directories(dir);
  ExperienceStore store = std::filesystem::exists(dir / "path.csv") ? load(dir) : ExperienceStore(std::move(path));
  if (!std::filesystem::exists(dir / "path.csv")) writePathCsv(dir / "path.csv", store.path_);
  store.dir_ = dir;
  store.writeManifest();
  return store;
}

}  // namespace expreco
