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

// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_dec_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "expreco/harness.hpp"

using namespace expreco;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(int id, const std::string &name, bool pass, const std::string &detail) {
  std::printf("[%s] %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char *f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

constexpr int kSeeds = 10;

ExperimentSchedule alternating(Method method, std::uint64_t seed) {
  ExperimentSchedule s;
  s.method = method;
  s.seed = seed;
  for (const char *m : {"nominal", "altered", "nominal", "altered"}) {
    for (int i = 0; i < 3; ++i) s.runs.push_back({s.runs.size() + 1, m, std::nullopt});
  }
  return s;
}

ExperimentSchedule cyclingSchedule(Method method, std::uint64_t seed) {
  return ExperimentSchedule::cycling({"nominal", "loaded", "altered"}, 2, 5, method, seed);
}

ExperimentConfig quietConfig() {
  ExperimentConfig c;
  c.record_scores = false;
  return c;
}

// --- 1: dense-inversion GP oracle ------------------------------------------------

void gpOracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> size(1, 60);
  double worst = 0.0;
  for (int problem = 0; problem < 100; ++problem) {
    const int m = size(rng);
    gp::Hyperparameters h;
    h.length_scales = Eigen::Vector3d(0.3 + 0.5 * (u(rng) + 2.0), 0.3 + 0.5 * (u(rng) + 2.0), 0.3 + 0.5 * (u(rng) + 2.0));
    h.signal_variance = 0.05 + 0.1 * (u(rng) + 2.0);
    h.noise_variance = 0.01 + 0.01 * (u(rng) + 2.0);
    Eigen::MatrixXd X(m, 3), Y(m, 3);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < 3; ++j) {
        X(i, j) = u(rng);
        Y(i, j) = 0.3 * u(rng);
      }
    }
    const auto model = gp::fit(X, Y, {h, h, h});
    Eigen::MatrixXd K(m, m);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const Eigen::Array3d d = (X.row(i) - X.row(j)).transpose().array() / h.length_scales.array();
        K(i, j) = h.signal_variance * std::exp(-0.5 * d.square().sum());
      }
    }
    K.diagonal().array() += h.noise_variance;
    const Eigen::MatrixXd Kinv = K.inverse();
    for (int q = 0; q < 5; ++q) {
      const Eigen::Vector3d a(u(rng), u(rng), u(rng));
      Eigen::VectorXd k(m);
      for (int i = 0; i < m; ++i) {
        const Eigen::Array3d d = (X.row(i).transpose() - a).array() / h.length_scales.array();
        k(i) = h.signal_variance * std::exp(-0.5 * d.square().sum());
      }
      const double var = h.signal_variance - k.dot(Kinv * k) + h.noise_variance;
      const auto pred = model.predict(a);
      for (int dim = 0; dim < 3; ++dim) {
        const double mu = k.dot(Kinv * Y.col(dim));
        const double scale_mu = std::max(std::abs(mu), std::sqrt(h.signal_variance) * 1e-3);
        worst = std::max(worst, std::abs(pred[dim].mean - mu) / scale_mu);
        worst = std::max(worst, std::abs(pred[dim].variance - var) / var);
      }
    }
  }
  const double t = seconds(start);
  verdict(1, "gp-oracle-equivalence", worst <= 1e-9 && t < 5.0,
          "max rel err " + fmt("%.2e", worst) + ", " + fmt("%.2f s", t));
}

// --- 2: binomial tail vs exact summation ----------------------------------------

void binomialOracle() {
  using boost::multiprecision::cpp_int;
  using Dec = boost::multiprecision::cpp_dec_float_50;
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  // Pascal rows, exact
  std::vector<cpp_int> row{1};
  std::vector<std::vector<Dec>> choose(301);
  choose[0] = {Dec(1)};
  for (int m = 1; m <= 300; ++m) {
    std::vector<cpp_int> next(m + 1);
    next[0] = next[m] = 1;
    for (int k = 1; k < m; ++k) next[k] = row[k - 1] + row[k];
    row = std::move(next);
    choose[m].reserve(m + 1);
    for (const auto &c : row) choose[m].push_back(Dec(c));
  }
  for (const double pd : {0.0027, 0.05, 0.5}) {
    const Dec p(pd), q = Dec(1) - p;
    for (int m = 1; m <= 300; ++m) {
      std::vector<Dec> terms(m + 1);
      for (int k = 0; k <= m; ++k) terms[k] = choose[m][k] * pow(p, k) * pow(q, m - k);
      Dec tail = 0;
      for (int n = m; n >= 0; --n) {
        tail += terms[n];
        const double got = binomialTail(static_cast<std::size_t>(n), static_cast<std::size_t>(m), pd);
        worst = std::max(worst, std::abs(got - tail.convert_to<double>()));
      }
    }
  }
  const double t = seconds(start);
  verdict(2, "binomial-oracle", worst <= 1e-12 && t < 5.0, "max abs err " + fmt("%.2e", worst) + ", " + fmt("%.2f s", t));
}

// --- 3: alpha sensitivity ---------------------------------------------------------

void alphaSensitivity() {
  std::vector<std::size_t> counts;
  std::string detail;
  for (const double a : {0.01, 0.05, 0.10}) {
    counts.push_back(maxAcceptedOutliers(300, 0.0027, a));
    detail += "alpha " + fmt("%.2f", a) + " -> " + std::to_string(counts.back()) + "  ";
  }
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  verdict(3, "alpha-sensitivity", *hi - *lo <= 2, detail + "(spread " + std::to_string(*hi - *lo) + ")");
}

// --- experiment-level criteria -------------------------------------------------------

struct Experiments {
  std::vector<ExperimentReport> alt_proposed, alt_last, cyc_proposed, cyc_last;
};

Experiments runAll() {
  Experiments e;
  for (int s = 1; s <= kSeeds; ++s) {
    const auto seed = static_cast<std::uint64_t>(s);
    e.alt_proposed.push_back(runExperiment(alternating(Method::Proposed, seed), quietConfig()));
    e.alt_last.push_back(runExperiment(alternating(Method::LastRun, seed), quietConfig()));
    e.cyc_proposed.push_back(runExperiment(cyclingSchedule(Method::Proposed, seed), quietConfig()));
    e.cyc_last.push_back(runExperiment(cyclingSchedule(Method::LastRun, seed), quietConfig()));
  }
  return e;
}

// Runs whose mode appeared in an earlier run of the same schedule.
std::vector<bool> seenBefore(const ExperimentReport &r) {
  std::vector<bool> out;
  std::set<std::string> seen;
  for (const auto &run : r.runs) {
    out.push_back(seen.count(run.mode) > 0);
    seen.insert(run.mode);
  }
  return out;
}

void modeDiscrimination(const Experiments &e) {
  std::vector<double> per_seed;
  for (const auto &rep : e.alt_proposed) {
    const auto seen = seenBefore(rep);
    std::size_t same = 0, total = 0;
    for (std::size_t i = 0; i < rep.runs.size(); ++i) {
      if (!seen[i]) continue;
      for (const auto &ev : rep.runs[i].events) {
        if (std::abs(ev.curvature) <= 0.1) continue;
        ++total;
        if (ev.chosen && rep.labels.at(*ev.chosen) == rep.runs[i].mode) ++same;
      }
    }
    per_seed.push_back(total ? static_cast<double>(same) / static_cast<double>(total) : 0.0);
  }
  const double med = median(per_seed);
  verdict(4, "mode-discrimination", med >= 0.80, "median same-mode corner fraction " + fmt("%.3f", med));
}

void transitionRmse(const Experiments &e) {
  // first run after each nominal -> altered switch
  std::vector<std::size_t> transitions;
  const auto &runs = e.alt_proposed.front().runs;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i - 1].mode == "nominal" && runs[i].mode == "altered") transitions.push_back(i);
  }
  bool pass = true;
  std::string detail;
  for (const auto i : transitions) {
    std::vector<double> ratios;
    for (int s = 0; s < kSeeds; ++s) {
      ratios.push_back(e.alt_proposed[s].runs[i].metrics.m_rmse / e.alt_last[s].runs[i].metrics.m_rmse);
    }
    const double med = median(ratios);
    pass = pass && med <= 0.7;
    detail += "run " + std::to_string(i + 1) + " ratio " + fmt("%.3f", med) + "  ";
  }
  verdict(5, "transition-m-rmse", pass, detail + "(gate <= 0.70 each)");
}

void calibration(const Experiments &e) {
  bool pass = true;
  double lo = 1e9, hi = -1e9;
  for (const auto *set : {&e.alt_proposed, &e.cyc_proposed}) {
    const auto seen = seenBefore(set->front());
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (!seen[i]) continue;
      std::vector<double> z;
      for (const auto &rep : *set) z.push_back(rep.runs[i].metrics.m_rmsz);
      const double med = median(z);
      lo = std::min(lo, med);
      hi = std::max(hi, med);
      pass = pass && med >= 0.3 && med <= 1.5;
    }
  }
  verdict(6, "calibration-m-rmsz", pass, "per-run median range [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "]");
}

void longTermCost(const Experiments &e) {
  std::vector<double> ratios;
  for (int s = 0; s < kSeeds; ++s) ratios.push_back(e.cyc_proposed[s].totalCost() / e.cyc_last[s].totalCost());
  const double med = median(ratios);
  verdict(7, "long-term-cost", med <= 0.85, "median cost ratio " + fmt("%.3f", med) + " (gate <= 0.85)");
}

// --- 8: safe-mode decay -------------------------------------------------------------

void safeModeDecay() {
  RecommenderConfig config;
  const auto hypers = std::vector<gp::Hyperparameters>(3, gp::Hyperparameters::defaults());
  Rng rng(5);
  std::normal_distribution<double> n(0.0, 0.2);
  ControlGPSet set;
  for (std::size_t i = 0; i < config.n_control; ++i) {
    Experience x;
    x.run = RunId{1};
    x.vertex = i;
    x.t = 0.1 * static_cast<double>(i);
    x.a = FeatureVector(1.5, n(rng), 0.333);
    x.g_hat = Eigen::Vector3d(n(rng), n(rng), -0.3 + n(rng));
    set.experiences.push_back(x);
  }
  int updates = 0;
  while (!set.experiences.empty() && updates < 100) {
    set = updateControlSet(set, std::nullopt, rng, config);
    ++updates;
  }
  const auto model = makeControlModel(set, hypers);
  const auto prior = hypers.front();
  double worst = 0.0;
  for (const FeatureVector a : {FeatureVector(1.5, 0.5, 0.333), FeatureVector(1.0, -0.2, 0.0)}) {
    for (const auto &p : model->model.predict(a)) {
      worst = std::max({worst, std::abs(p.mean), std::abs(p.variance - prior.signal_variance - prior.noise_variance)});
    }
  }
  verdict(8, "safe-mode-decay", updates <= 5 && worst < 1e-12,
          "empty after " + std::to_string(updates) + " updates, max deviation from prior " + fmt("%.1e", worst));
}

// --- 9: throughput ------------------------------------------------------------------

void throughput() {
  const auto hypers = std::vector<gp::Hyperparameters>(3, gp::Hyperparameters::defaults());
  RecommenderConfig config;
  Rng rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  auto window = [&](RunId run, double gain) {
    std::vector<Experience> w;
    for (std::size_t i = 0; i < 30; ++i) {
      Experience x;
      x.run = run;
      x.vertex = i;
      x.t = 0.1 * static_cast<double>(i);
      x.a = FeatureVector(1.5 + 0.05 * n(rng), 0.5 * std::sin(0.2 * static_cast<double>(i)), 0.333);
      x.g_hat = Eigen::Vector3d(0.02 * n(rng), 0.02 * n(rng), (gain - 1.0) * x.a(1) + 0.03 * n(rng));
      w.push_back(x);
    }
    return w;
  };
  const auto live = window(RunId{1000}, 0.7);
  std::vector<CandidateWindow> all;
  for (int r = 0; r < 300; ++r) all.push_back({RunId{r + 1}, window(RunId{r + 1}, r % 2 ? 0.7 : 1.0)});

  std::vector<double> xs, ts;
  double worst_cycle = 0.0;
  for (std::size_t count = 30; count <= 300; count += 30) {
    std::span<const CandidateWindow> cands(all.data(), count);
    double best = 1e9;
    for (int rep = 0; rep < 3; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      const auto rec = recommend(live, cands, hypers, config);
      best = std::min(best, seconds(start));
      if (!rec.run && count > 0 && rec.scores.size() != count) best = 1e9;
    }
    xs.push_back(static_cast<double>(count));
    ts.push_back(best);
    worst_cycle = std::max(worst_cycle, best);
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  const double my = std::accumulate(ts.begin(), ts.end(), 0.0) / ts.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ts[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ts[i] - my) * (ts[i] - my);
  }
  const double r2 = sxy * sxy / (sxx * syy);
  verdict(9, "throughput", ts.back() < 0.5 && r2 > 0.95,
          "300 runs " + fmt("%.1f ms", 1e3 * ts.back()) + ", linear fit R^2 " + fmt("%.4f", r2));
}

// --- 10: determinism ------------------------------------------------------------------

std::map<std::string, std::string> readCsvs(const fs::path &dir) {
  std::map<std::string, std::string> out;
  for (const auto &entry : fs::recursive_directory_iterator(dir)) {
    if (entry.path().extension() != ".csv") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    out[fs::relative(entry.path(), dir).string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return out;
}

void determinism() {
  const fs::path base = fs::temp_directory_path() / "expreco_acceptance_determinism";
  fs::remove_all(base);
  bool pass = true;
  std::size_t files = 0;
  for (const auto method : {Method::Proposed, Method::LastRun}) {
    std::vector<std::map<std::string, std::string>> logs;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = base / (toString(method) + std::to_string(rep));
      ExperimentConfig config;
      config.store_dir = dir / "store";
      auto schedule = cyclingSchedule(method, 42);
      schedule.runs.resize(6);
      writeReport(runExperiment(schedule, config), dir / "logs");
      logs.push_back(readCsvs(dir));
    }
    pass = pass && !logs[0].empty() && logs[0] == logs[1];
    files += logs[0].size();
  }
  fs::remove_all(base);
  verdict(10, "determinism", pass, std::to_string(files) + " CSV files compared byte-for-byte");
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  gpOracle();
  binomialOracle();
  alphaSensitivity();
  const Experiments e = runAll();
  modeDiscrimination(e);
  transitionRmse(e);
  calibration(e);
  longTermCost(e);
  safeModeDecay();
  throughput();
  determinism();
  std::printf("%d of 10 criteria failed, %.1f s\n", failures, seconds(start));
  return failures == 0 ? 0 : 1;
}
