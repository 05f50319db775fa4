// One line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "cbo/analysis.hpp"
#include "cbo/consensus.hpp"
#include "cbo/harness.hpp"
#include "cbo/hopping_prox.hpp"
#include "cbo/objectives.hpp"
#include "cbo/parallel.hpp"
#include "cbo/rng.hpp"

using namespace cbo;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using Big = boost::multiprecision::cpp_bin_float_50;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cbo_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

Manifest run_preset(const std::string& preset, const std::string& dir, unsigned threads) {
  ScopedWorkerThreads t(threads);
  ExperimentSpec s;
  s.preset = preset;
  s.output_dir = scratch(dir).string();
  return run_experiment(s);
}

struct RandomEnsemble {
  PointMatrix points;
  Eigen::VectorXd values;
  double alpha;
};

RandomEnsemble random_ensemble(std::uint64_t trial) {
  NoiseStream s(99, StreamTag::kTesting);
  std::vector<double> u(4);
  s.uniform(trial, 0, u);
  const int n = 1 + static_cast<int>(u[0] * 20);
  const int d = 1 + static_cast<int>(u[1] * 3);
  RandomEnsemble out{PointMatrix(n, d), Eigen::VectorXd(n), std::pow(10.0, -1.0 + 4.0 * u[2])};
  std::vector<double> z(static_cast<std::size_t>(d + 1));
  for (int i = 0; i < n; ++i) {
    s.standard_normal(trial, static_cast<std::uint64_t>(i) + 1, z);
    for (int j = 0; j < d; ++j) out.points(i, j) = 3.0 * z[static_cast<std::size_t>(j)];
    out.values[i] = 10.0 * std::abs(z[static_cast<std::size_t>(d)]) + 5.0 * u[3];
  }
  return out;
}

Vector uniform_in_box(const TestBox& box, std::uint64_t seed, std::uint64_t k) {
  NoiseStream s(seed, StreamTag::kTesting);
  std::vector<double> u(static_cast<std::size_t>(box.lower.size()));
  s.uniform(k, 0, u);
  Vector x(box.lower.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = box.lower[j] + u[static_cast<std::size_t>(j)] * (box.upper[j] - box.lower[j]);
  return x;
}

// ---------------------------------------------------------------------------

Outcome reconstruction_identity() {
  const Objective o = make_objective("canyon3");
  SchemeConfig c;  // N=200, K=250, d=2
  c.tau = 0.05;
  c.sigma_tilde = coupled_sigma_tilde(*c.tau, c.alpha);
  c.couple_sigma_tilde = true;
  double worst = 0.0, slowest = 0.0;
  const int runs = 10;
  for (int s = 0; s < runs; ++s) {
    c.seed = static_cast<std::uint64_t>(s);
    const auto t0 = Clock::now();
    const CoupledTriple t = coupled_triple_run(o, c);
    const ResidualRecord r = decompose_residual(t, o, *c.tau);
    slowest = std::max(slowest, seconds_since(t0));
    worst = std::max(worst, r.max_reconstruction_residual());
  }
  return {worst <= 1e-10 && slowest < 1.0,
          fmt("max residual %.3g (<= 1e-10) over %d runs, slowest run %.3f s (< 1 s)", worst, runs, slowest)};
}

Outcome consensus_oracle() {
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const RandomEnsemble e = random_ensemble(t);
    Big total = 0;
    std::vector<Big> acc(static_cast<std::size_t>(e.points.cols()), Big(0));
    for (Eigen::Index i = 0; i < e.points.rows(); ++i) {
      const Big w = boost::multiprecision::exp(-Big(e.alpha) * Big(e.values[i]));
      total += w;
      for (Eigen::Index j = 0; j < e.points.cols(); ++j) acc[static_cast<std::size_t>(j)] += w * Big(e.points(i, j));
    }
    Vector ref(e.points.cols());
    for (Eigen::Index j = 0; j < ref.size(); ++j) ref[j] = static_cast<double>(acc[static_cast<std::size_t>(j)] / total);
    const Vector got = consensus_point(e.points, e.values, e.alpha);
    worst = std::max(worst, (got - ref).norm() / ref.norm());
  }
  return {worst <= 1e-10, fmt("max relative error %.3g (<= 1e-10) over 1000 ensembles", worst)};
}

Outcome laplace_sandwich() {
  int bad_bounds = 0, bad_concentration = 0, tested = 0;
  double worst_ratio = 0.0;
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const RandomEnsemble e = random_ensemble(t);
    const double g = gibbs_free_energy(e.values, e.alpha);
    const double n = static_cast<double>(e.values.size());
    const double lo = e.values.minCoeff() - std::log(n) / e.alpha;
    const double hi = e.values.mean();
    const double tol = 1e-12 * (1.0 + std::abs(g));
    if (g < lo - tol || g > hi + tol) ++bad_bounds;

    Eigen::Index best;
    const double vmin = e.values.minCoeff(&best);
    double gap = INFINITY, diam = 0.0;
    for (Eigen::Index i = 0; i < e.values.size(); ++i)
      if (i != best) gap = std::min(gap, e.values[i] - vmin);
    if (!(gap > 0.0) || !std::isfinite(gap)) continue;
    for (Eigen::Index i = 0; i < e.points.rows(); ++i)
      for (Eigen::Index k = i + 1; k < e.points.rows(); ++k) diam = std::max(diam, (e.points.row(i) - e.points.row(k)).norm());
    ++tested;
    const double dist = (consensus_point(e.points, e.values, 1e4 / gap) - e.points.row(best).transpose()).norm();
    worst_ratio = std::max(worst_ratio, dist / diam);
    if (dist > 1e-3 * diam) ++bad_concentration;
  }
  return {bad_bounds == 0 && bad_concentration == 0,
          fmt("sandwich violations %d/1000; concentration violations %d/%d, max dist/diam %.3g (<= 1e-3)", bad_bounds,
              bad_concentration, tested, worst_ratio)};
}

Outcome consensus_boundedness() {
  std::string detail;
  bool pass = true;
  for (const char* name : {"quadratic-2", "canyon3"}) {
    const Objective o = make_objective(name);
    int ok = 0;
    for (std::uint64_t t = 0; t < 1000; ++t) {
      const int n = 50;
      PointMatrix p(n, o.dim());
      for (int i = 0; i < n; ++i) p.row(i) = uniform_in_box(o.box(), 1000 + t, static_cast<std::uint64_t>(i)).transpose();
      ok += consensus_bound_check(p, evaluate_rows(o, p), 100.0, o).satisfied;
    }
    pass = pass && ok == 1000;
    detail += fmt("%s%s (%s branch) %d/1000", detail.empty() ? "" : "; ", name,
                  o.constants().bounded_branch() ? "bounded" : "growth", ok);
  }
  return {pass, detail};
}

Outcome scaling(const std::string& axis, double lo, double hi) {
  const auto t0 = Clock::now();
  const Manifest m = run_preset("scaling-" + axis, "scaling_" + axis, std::thread::hardware_concurrency());
  const double elapsed = seconds_since(t0);
  const double slope = m.summary.at("scaling").at("fitted_slope").get<double>();
  const auto ci = m.summary.at("scaling").at("slope_ci");
  return {slope >= lo && slope <= hi && elapsed < 300.0,
          fmt("slope %.3f in [%.1f, %.1f] (90%% CI [%.3f, %.3f]), runtime %.1f s (< 300 s)", slope, lo, hi,
              ci[0].get<double>(), ci[1].get<double>(), elapsed)};
}

Outcome quantitative_laplace() {
  const auto t0 = Clock::now();
  std::string detail;
  bool pass = true;
  struct Case {
    const char* name;
    double tau;
  };
  for (const Case& cs : {Case{"quadratic-2", 0.1}, Case{"canyon3", 0.05}}) {
    const Objective o = make_objective(cs.name);
    const double alpha = alpha0(cs.tau, o.dim());
    const double spread = std::sqrt(cs.tau / alpha);
    std::vector<int> ok(100, 0);
    std::vector<double> ratio(100, 0.0);
    parallel_for(100, [&](std::size_t a) {
      const Vector anchor = uniform_in_box(o.box(), 5000, a);
      const Vector star = prox(o, anchor, cs.tau).point;
      LaplaceBoundInputs in;
      in.r = (star - anchor).norm() + 3.0 * spread;
      in.q = 1.5 * cs.tau;
      in.sample_count = 100000;
      const LaplaceBound b = laplace_bound_check(o, anchor, cs.tau, in, alpha, a);
      ok[a] = b.satisfied;
      ratio[a] = b.lhs / b.rhs;
    });
    int count = 0;
    for (int v : ok) count += v;
    pass = pass && count == 100;
    detail += fmt("%s%s %d/100 (alpha0 %.1f, max lhs/rhs %.3f)", detail.empty() ? "" : "; ", cs.name, count, alpha,
                  *std::max_element(ratio.begin(), ratio.end()));
  }
  const double elapsed = seconds_since(t0);
  pass = pass && elapsed < 120.0;
  return {pass, detail + fmt("; runtime %.1f s (< 120 s)", elapsed)};
}

Outcome figure1() {
  const auto t0 = Clock::now();
  const Manifest m = run_preset("fig1", "fig1", std::thread::hardware_concurrency());
  const double elapsed = seconds_since(t0);
  const double rate = m.summary.at("success_rate").get<double>();
  const double m4 = m.summary.at("max_fourth_moment").get<double>();
  const int alarms = m.summary.at("fourth_moment_alarms").get<int>();
  return {rate >= 0.8 && elapsed < 30.0 && std::isfinite(m4) && alarms == 0,
          fmt("success rate %.2f (>= 0.80) over %d runs, runtime %.1f s (< 30 s), max fourth moment %.3g, %d cap alarms",
              rate, m.summary.at("runs").get<int>(), elapsed, m4, alarms)};
}

Outcome figure2b() {
  const Manifest m = run_preset("fig2b", "fig2b", std::thread::hardware_concurrency());
  const auto& grads = m.summary.at("terminal_gradient_norms");
  const auto& dists = m.summary.at("distances_to_minimizer");
  int stuck = 0;
  double max_grad = 0.0, min_dist = INFINITY;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const double g = grads[i].get<double>(), d = dists[i].get<double>();
    max_grad = std::max(max_grad, g);
    min_dist = std::min(min_dist, d);
    stuck += g <= 1e-3 && d > 1.0;
  }
  return {stuck == static_cast<int>(grads.size()),
          fmt("%d/%zu runs stuck, max |grad E| %.3g (<= 1e-3), min distance to x* %.3f (> 1)", stuck, grads.size(),
              max_grad, min_dist)};
}

Outcome figure3() {
  const Manifest m = run_preset("fig3-sweep", "fig3", std::thread::hardware_concurrency());
  std::vector<double> rates;
  for (const auto& v : m.summary.at("variants")) rates.push_back(v.at("success_rate").get<double>());
  const bool monotone = rates.size() == 3 && rates[0] <= rates[1] && rates[1] <= rates[2];
  return {monotone && rates.front() < rates.back(),
          fmt("success rates %.2f / %.2f / %.2f for widths 0.4 / 0.6 / 0.7 (non-decreasing, first < last)", rates[0],
              rates[1], rates[2])};
}

Outcome mms_dissipation() {
  std::string detail;
  bool pass = true;
  for (const char* name : {"canyon3", "canyon2", "rastrigin-2", "rastrigin-3", "quadratic-2", "quadratic-3"}) {
    const Objective o = make_objective(name);
    const double lam = o.constants().lambda_semiconvex;
    const double tau = lam < 0.0 ? 0.5 / (-2.0 * lam) : 0.1;
    std::vector<int> bad(100, 0);
    std::vector<double> excess(100, -INFINITY);
    parallel_for(100, [&](std::size_t s) {
      SchemeConfig c;
      c.tau = tau;
      c.n_steps = 50;
      c.init_mean = Vector::Zero(o.dim());
      const RunRecord r = mms_run(o, c, uniform_in_box(o.box(), 7000, s));
      for (int k = 1; k <= c.n_steps; ++k) {
        const double lhs = r.objective_values[k] + (r.iterate(k) - r.iterate(k - 1)).squaredNorm() / (2.0 * tau);
        const double e = lhs - r.objective_values[k - 1];
        excess[s] = std::max(excess[s], e);
        if (e > kProxTolerance) ++bad[s];
      }
    });
    int runs_ok = 0;
    for (int b : bad) runs_ok += b == 0;
    pass = pass && runs_ok == 100;
    detail += fmt("%s%s %d/100", detail.empty() ? "" : "; ", name, runs_ok);
  }
  return {pass, detail};
}

Outcome determinism() {
  std::string mismatches;
  int compared = 0;
  for (const char* preset : {"fig1", "fig2a", "fig2b", "fig2c", "fig3-sweep", "fig4", "decompose", "custom"}) {
    const Manifest a = run_preset(preset, std::string("det1_") + preset, 1);
    const Manifest b = run_preset(preset, std::string("det8_") + preset, 8);
    bool same = a.files.size() == b.files.size();
    for (std::size_t i = 0; same && i < a.files.size(); ++i)
      same = a.files[i].path == b.files[i].path && a.files[i].sha256 == b.files[i].sha256;
    compared += static_cast<int>(a.files.size());
    if (!same) mismatches += std::string(mismatches.empty() ? "" : ", ") + preset;
  }
  return {mismatches.empty(), mismatches.empty()
                                  ? fmt("%d files identical between 1 and 8 worker threads across 8 presets", compared)
                                  : "differing presets: " + mismatches};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"reconstruction identity", reconstruction_identity},
      {"consensus oracle equivalence", consensus_oracle},
      {"Laplace sandwich", laplace_sandwich},
      {"consensus boundedness", consensus_boundedness},
      {"tau rate of CH vs implicit CH", [] { return scaling("tau", 0.6, 1.4); }},
      {"particle-count rate", [] { return scaling("n_particles", -0.7, -0.3); }},
      {"lambda-gap rate", [] { return scaling("lambda_gap", 0.6, 1.4); }},
      {"quantitative Laplace principle", quantitative_laplace},
      {"figure-1 CBO success", figure1},
      {"figure-2b GD stuck", figure2b},
      {"figure-3 width monotonicity", figure3},
      {"MMS energy dissipation", mms_dissipation},
      {"determinism across thread counts", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
