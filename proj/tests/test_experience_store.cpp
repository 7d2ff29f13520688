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

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "expreco/experience_store.hpp"

using namespace expreco;
namespace fs = std::filesystem;

namespace {

Path straightPath(double length, bool closed = false) {
  CourseSpec spec;
  spec.closed = closed;
  spec.segments = {{CourseSegment::Kind::Straight, length, 0.0, 0.0}};
  if (closed) spec = CourseSpec::benchmark();
  return generatePath(spec);
}

Experience exp(RunId run, VertexId v, double t, double g = 0.0) {
  Experience e;
  e.run = run;
  e.vertex = v;
  e.t = t;
  e.a = FeatureVector(1.5, 0.1 * g, 0.0);
  e.g_hat = Eigen::Vector3d(g, -g, 0.5 * g);
  return e;
}

// One lap at roughly 1.5 m/s, a sample every 0.1 s.
RunId recordLap(ExperienceStore &store, const std::string &label) {
  const RunId id = store.beginRun(label);
  const auto n = store.path().size();
  double t = 0.0;
  for (VertexId v = 0; v < n; ++v) {
    store.record(exp(id, v, t, static_cast<double>(v)));
    t += 0.1;
  }
  return id;
}

using Key = std::tuple<std::int64_t, VertexId, double>;
std::set<Key> keys(const std::vector<Experience> &xs) {
  std::set<Key> out;
  for (const auto &x : xs) out.insert({x.run.value, x.vertex, x.t});
  return out;
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("expreco_store_" + std::to_string(std::random_device{}()))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path &path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

TEST(ComputeDisturbance, PerfectModelIsZero) {
  const VehicleState s0{1, 2, 0.4};
  const Command u{1.5, 0.3};
  EXPECT_LT(computeDisturbance(s0, u, unicycle(s0, u, 0.1), 0.1).norm(), 1e-12);
}

TEST(ComputeDisturbance, HeadingWrapAcrossPi) {
  const VehicleState s0{0, 0, 3.1};
  const Command u{1.0, 1.0};
  const auto s1 = unicycle(s0, u, 0.1);
  ASSERT_LT(s1.theta, 0.0);
  const auto g = computeDisturbance(s0, u, s1, 0.1);
  EXPECT_LT(std::abs(g(2)) * 0.1, std::numbers::pi);
  EXPECT_NEAR(g(2), 0.0, 1e-9);
}

TEST(ExperienceStore, RecordThenWindowContainsIt) {
  ExperienceStore store(straightPath(10));
  const auto id = store.beginRun("nominal");
  store.record(exp(id, 5, 0.0));
  const auto w = store.windowRange(id, 3, 7);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].vertex, 5u);
}

TEST(ExperienceStore, SameVertexTwiceKeepsBoth) {
  ExperienceStore store(straightPath(10));
  const auto id = store.beginRun("nominal");
  store.record(exp(id, 5, 0.0));
  store.record(exp(id, 5, 0.1));
  EXPECT_EQ(store.windowRange(id, 5, 5).size(), 2u);
}

TEST(ExperienceStore, RecordToSealedRunThrows) {
  ExperienceStore store(straightPath(10));
  const auto id = store.beginRun("nominal");
  store.sealRun(id);
  EXPECT_THROW(store.record(exp(id, 1, 0.0)), StoreError);
}

TEST(ExperienceStore, RejectsBadRecords) {
  ExperienceStore store(straightPath(10));
  const auto id = store.beginRun("nominal");
  EXPECT_THROW(store.record(exp(id, 10000, 0.0)), StoreError);
  auto bad = exp(id, 1, 0.0);
  bad.g_hat(0) = std::nan("");
  EXPECT_THROW(store.record(bad), StoreError);
  store.record(exp(id, 1, 1.0));
  EXPECT_THROW(store.record(exp(id, 2, 0.5)), StoreError);
  EXPECT_THROW(store.record(exp(RunId{99}, 1, 2.0)), StoreError);
}

TEST(ExperienceStore, OneLiveRunAtATime) {
  ExperienceStore store(straightPath(10));
  store.beginRun("nominal");
  EXPECT_THROW(store.beginRun("altered"), StoreError);
}

TEST(ExperienceStore, WholePathWindowIsFullLap) {
  ExperienceStore store(straightPath(10, true));
  const auto id = recordLap(store, "nominal");
  store.sealRun(id);
  EXPECT_EQ(store.windowBehind(id, 17, store.path().size()).size(), store.path().size());
}

TEST(ExperienceStore, WindowWithoutDataIsEmpty) {
  ExperienceStore store(straightPath(10));
  const auto id = store.beginRun("nominal");
  store.record(exp(id, 2, 0.0));
  EXPECT_TRUE(store.windowRange(id, 20, 30).empty());
  EXPECT_TRUE(store.windowAhead(id, 40, 15).empty());
}

TEST(ExperienceStore, LiveWindowOfThreeSeconds) {
  ExperienceStore store(straightPath(20));
  const auto id = store.beginRun("nominal");
  // 1.5 m/s at 10 Hz crosses one 0.15 m vertex per sample
  for (int k = 0; k < 100; ++k) store.record(exp(id, static_cast<VertexId>(k), 0.1 * k));
  const auto w = store.windowBehind(id, 99, 30);
  EXPECT_NEAR(static_cast<double>(w.size()), 30.0, 1.0);
  EXPECT_EQ(store.latest(id, 30).size(), 30u);
  EXPECT_EQ(store.latest(id, 30).front().vertex, 70u);
}

TEST(ExperienceStore, AheadWindowOfHorizon) {
  ExperienceStore store(straightPath(20));
  const auto id = recordLap(store, "nominal");
  store.sealRun(id);
  const auto w = store.windowAhead(id, 40, 15);
  ASSERT_EQ(w.size(), 15u);
  EXPECT_EQ(w.front().vertex, 41u);
  EXPECT_EQ(w.back().vertex, 55u);
}

TEST(ExperienceStore, AheadTruncatesAtOpenEnd) {
  ExperienceStore store(straightPath(3));
  const auto id = recordLap(store, "nominal");
  const auto n = store.path().size();
  EXPECT_EQ(store.windowAhead(id, n - 5, 15).size(), 4u);
}

TEST(ExperienceStore, AheadWrapsOnClosedPath) {
  ExperienceStore store(straightPath(0, true));
  const auto id = recordLap(store, "nominal");
  const auto n = store.path().size();
  const auto w = store.windowAhead(id, n - 3, 15);
  ASSERT_EQ(w.size(), 15u);
  EXPECT_EQ(w[2].vertex, 0u);
}

TEST(ExperienceStore, EmptyRunWindowsAreEmpty) {
  ExperienceStore store(straightPath(10));
  const auto id = store.beginRun("nominal");
  EXPECT_TRUE(store.windowBehind(id, 10, 30).empty());
  EXPECT_TRUE(store.latest(id, 30).empty());
}

TEST(ExperienceStore, DisjointRangesGiveDisjointSets) {
  ExperienceStore store(straightPath(0, true));
  const auto id = recordLap(store, "nominal");
  const auto a = keys(store.windowRange(id, 10, 40));
  const auto b = keys(store.windowRange(id, 41, 90));
  for (const auto &k : a) EXPECT_FALSE(b.count(k));
}

TEST(ExperienceStore, BehindAndAheadReconstructLap) {
  for (const bool closed : {false, true}) {
    ExperienceStore store(straightPath(12, closed));
    const auto id = recordLap(store, "nominal");
    store.sealRun(id);
    const auto n = store.path().size();
    const auto all = keys(store.experiences(id));
    for (const VertexId c : {VertexId{0}, VertexId{37}, n - 1}) {
      const std::size_t k = closed ? 20 : c + 1;
      auto u = keys(store.windowBehind(id, c, k));
      const auto ahead = k < n ? keys(store.windowAhead(id, c, n - k)) : decltype(u){};
      for (const auto &x : ahead) EXPECT_TRUE(u.insert(x).second) << "overlap at " << c;
      EXPECT_EQ(u, all) << "closed " << closed << " c " << c;
    }
  }
}

TEST(ExperienceStore, SnapshotIsImmutable) {
  ExperienceStore store(straightPath(0, true));
  const auto a = recordLap(store, "nominal");
  store.sealRun(a);
  const auto snap = store.snapshot();
  const auto b = recordLap(store, "altered");
  store.sealRun(b);
  EXPECT_EQ(snap.runCount(), 1u);
  EXPECT_EQ(store.snapshot().runCount(), 2u);
  EXPECT_EQ(snap.windowAhead(a, 10, 15).size(), 15u);
  EXPECT_EQ(snap.find(b), nullptr);
}

TEST(ExperienceStore, LiveRunNotInSnapshot) {
  ExperienceStore store(straightPath(10));
  const auto id = store.beginRun("nominal");
  store.record(exp(id, 1, 0.0));
  EXPECT_EQ(store.snapshot().runCount(), 0u);
}

TEST(ExperienceStore, SaveLoadRoundTrip) {
  TempDir dir;
  ExperienceStore store(straightPath(0, true));
  const auto a = recordLap(store, "nominal");
  store.sealRun(a);
  const auto b = recordLap(store, "altered");
  store.sealRun(b);
  store.save(dir.path());
  const auto loaded = ExperienceStore::load(dir.path());
  EXPECT_EQ(loaded.runIds(), store.runIds());
  EXPECT_EQ(loaded.groundTruthLabel(b), "altered");
  EXPECT_EQ(loaded.path().size(), store.path().size());
  EXPECT_TRUE(loaded.path().closed);
  const auto &x = loaded.experiences(b);
  const auto &y = store.experiences(b);
  ASSERT_EQ(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i].a, y[i].a);
    EXPECT_EQ(x[i].g_hat, y[i].g_hat);
    EXPECT_EQ(x[i].t, y[i].t);
  }
}

TEST(ExperienceStore, PersistentModeSurvivesReopen) {
  TempDir dir;
  RunId id;
  {
    auto store = ExperienceStore::open(dir.path(), straightPath(5));
    id = recordLap(store, "loaded");
    store.sealRun(id);
  }
  const auto loaded = ExperienceStore::load(dir.path());
  EXPECT_EQ(loaded.experiences(id).size(), loaded.path().size());
  EXPECT_EQ(loaded.groundTruthLabel(id), "loaded");
}

TEST(Csv, RowRoundTripExact) {
  auto e = exp(RunId{3}, 7, 0.30000000000000004, 1.0 / 3.0);
  e.a(1) = -1e-300;
  const auto back = experienceFromCsv(toCsvRow(e));
  EXPECT_EQ(back.run, e.run);
  EXPECT_EQ(back.vertex, e.vertex);
  EXPECT_EQ(back.t, e.t);
  EXPECT_EQ(back.a, e.a);
  EXPECT_EQ(back.g_hat, e.g_hat);
}

TEST(Csv, MalformedRowThrows) {
  EXPECT_THROW(experienceFromCsv("1,2,3"), StoreError);
  EXPECT_THROW(experienceFromCsv("1,2,x,0,0,0,0,0,0"), StoreError);
}
