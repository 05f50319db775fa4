#include "cbo/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "cbo/hopping_prox.hpp"
#include "cbo/parallel.hpp"
#include "cbo/rng.hpp"

namespace cbo {

CoupledTriple coupled_triple_run(const Objective& obj, const SchemeConfig& config) {
  require(config.tau.has_value() && config.sigma_tilde.has_value(), "coupled run needs tau and sigma_tilde");
  SchemeConfig checked = config;
  checked.couple_sigma_tilde = true;
  require_valid(checked, obj.constants().lambda_semiconvex);
  CoupledTriple out;
  out.cbo = cbo_run(obj, config);
  out.ch = ch_run(obj, config);
  out.ich = implicit_ch_run(obj, config, out.ch);
  return out;
}

double ResidualRecord::max_reconstruction_residual() const {
  return reconstruction_residual.size() ? reconstruction_residual.maxCoeff() : 0.0;
}

ResidualRecord decompose_residual(const CoupledTriple& t, const Objective& obj, double tau) {
  require(obj.has_grad(), "residual decomposition needs the objective gradient");
  require(tau > 0.0, "residual decomposition needs tau > 0");
  const Eigen::Index k_max = t.cbo.steps();
  require(t.ch.steps() == k_max && t.ich.steps() == k_max, "triple trajectories differ in length");
  const Eigen::Index d = t.cbo.iterates.cols();
  ResidualRecord r;
  r.g1.resize(k_max, d);
  r.g2.resize(k_max, d);
  r.g3.resize(k_max, d);
  r.g.resize(k_max, d);
  r.g1_norm.resize(k_max);
  r.g2_norm.resize(k_max);
  r.g3_norm.resize(k_max);
  r.g_norm.resize(k_max);
  r.reconstruction_residual.resize(k_max);
  for (Eigen::Index k = 1; k <= k_max; ++k) {
    const Vector cbo_prev = t.cbo.iterate(k - 1);
    const Vector cbo_k = t.cbo.iterate(k);
    const Vector grad_prev = obj.grad(cbo_prev);
    const Vector g1 = t.ch.iterate(k - 1) - cbo_prev;
    const Vector g2 = tau * (obj.grad(t.ich.iterate(k)) - grad_prev);
    const Vector g3 = cbo_k - t.ich.iterate(k);
    const Vector g = g1 - g2 + g3;
    const Eigen::Index row = k - 1;
    r.g1.row(row) = g1.transpose();
    r.g2.row(row) = g2.transpose();
    r.g3.row(row) = g3.transpose();
    r.g.row(row) = g.transpose();
    r.g1_norm[row] = g1.norm();
    r.g2_norm[row] = g2.norm();
    r.g3_norm[row] = g3.norm();
    r.g_norm[row] = g.norm();
    r.reconstruction_residual[row] = (cbo_k - (cbo_prev - tau * grad_prev + g)).norm();
  }
  const double worst = r.max_reconstruction_residual();
  if (!(worst <= kReconstructionTolerance)) {
    std::ostringstream os;
    os << "reconstruction identity violated: residual " << worst;
    throw NumericalError(os.str());
  }
  return r;
}

SlopeFit fit_log_log(const std::vector<double>& values, const std::vector<double>& errors) {
  require(values.size() == errors.size() && values.size() >= 2, "slope fit needs at least two points");
  const auto n = static_cast<double>(values.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    require(values[i] > 0.0 && errors[i] > 0.0, "slope fit needs positive values and errors");
    const double x = std::log(values[i]), y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  require(den > 0.0, "slope fit needs distinct values");
  SlopeFit f;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  return f;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double max_gap(const RunRecord& a, const RunRecord& b) {
  return (a.iterates - b.iterates).rowwise().norm().maxCoeff();
}

double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct Axis {
  double expected_sign;
  // Error of one run at grid value v for the given seed.
  std::function<double(double v, std::uint64_t seed)> error;
  std::function<double(std::uint64_t seed)> floor;
};

Axis make_axis(const std::string& axis, const Objective& obj, const SchemeConfig& base, const std::vector<double>& grid,
               const SweepOptions& opt) {
  const double inv_dt = 1.0 / base.dt;
  if (axis == "n_particles") {
    require(base.sigma_tilde.has_value(), "n_particles sweep needs sigma_tilde for the CH comparison");
    auto err = [&obj, base, inv_dt](double v, std::uint64_t seed) {
      SchemeConfig c = base;
      c.seed = seed;
      c.lambda = inv_dt;
      c.n_particles = static_cast<int>(std::lround(v));
      return max_gap(cbo_run(obj, c), ch_run(obj, c));
    };
    const double big = *std::max_element(grid.begin(), grid.end()) * opt.floor_multiplier;
    return {-1.0, err, [err, big](std::uint64_t seed) { return err(big, seed); }};
  }
  if (axis == "lambda_gap") {
    // Distance to the lambda = 1/dt trajectory under shared Brownian increments.
    auto gap = [&obj, base, inv_dt](double v, std::uint64_t seed) {
      SchemeConfig c = base;
      c.seed = seed;
      c.lambda = inv_dt;
      const RunRecord ref = cbo_run(obj, c);
      c.lambda = (1.0 - v) * inv_dt;
      return max_gap(cbo_run(obj, c), ref);
    };
    return {1.0, gap, [gap](std::uint64_t seed) { return gap(0.0, seed); }};
  }
  if (axis == "sigma_sqrt_dt") {
    auto gap = [&obj, base](double v, std::uint64_t seed) {
      SchemeConfig c = base;
      c.seed = seed;
      c.sigma = 0.0;
      const RunRecord ref = cbo_run(obj, c);
      c.sigma = v / std::sqrt(c.dt);
      return max_gap(cbo_run(obj, c), ref);
    };
    return {1.0, gap, [gap](std::uint64_t seed) { return gap(0.0, seed); }};
  }
  if (axis == "tau") {
    const int d = obj.dim();
    auto gap = [&obj, base, d](double v, std::uint64_t seed) {
      SchemeConfig c = base;
      c.seed = seed;
      c.tau = v;
      c.alpha = alpha0(v, d);
      c.sigma_tilde = coupled_sigma_tilde(v, c.alpha);
      c.couple_sigma_tilde = true;
      const RunRecord ch = ch_run(obj, c);
      return max_gap(ch, implicit_ch_run(obj, c, ch));
    };
    // What remains as tau -> 0 is the prox tolerance.
    return {1.0, gap, [](std::uint64_t) { return kProxTolerance; }};
  }
  throw InvalidArgument("unknown sweep axis '" + axis + "'");
}

}  // namespace

ScalingReport scaling_sweep(const std::string& axis, const Objective& obj, const SchemeConfig& base,
                            const std::vector<double>& grid, int seeds, const SweepOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  require(seeds >= 1, "sweep needs at least one seed");
  require(grid.size() >= 4, "sweep grid needs at least 4 values");
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    require(grid[i] < grid[i + 1], "sweep grid must be strictly increasing");
  require(grid.front() > 0.0, "sweep grid values must be positive");
  require(grid.back() / grid.front() >= 10.0 - 1e-9, "sweep grid must span at least one decade");
  if (axis == "lambda_gap") require(grid.back() < 1.0, "lambda gap fractions must be below 1");
  require(base.dim() == obj.dim(), "init_mean dimension does not match objective");
  const Axis ax = make_axis(axis, obj, base, grid, opt);

  ScalingReport rep;
  rep.swept_parameter = axis;
  rep.values = grid;
  const std::size_t n_seeds = static_cast<std::size_t>(seeds);
  rep.seed_errors.assign(grid.size(), std::vector<double>(n_seeds, 0.0));
  // Runs fan out over (grid, seed); each writes its own slot.
  parallel_for(grid.size() * n_seeds, [&](std::size_t flat) {
    const std::size_t gi = flat / n_seeds, s = flat % n_seeds;
    rep.seed_errors[gi][s] = ax.error(grid[gi], base.seed + s);
  });
  for (const auto& row : rep.seed_errors) {
    const double m = median(row);
    if (!(m > 0.0)) throw NumericalError("sweep '" + axis + "' produced a non-positive median error");
    rep.errors.push_back(m);
  }
  const SlopeFit fit = fit_log_log(rep.values, rep.errors);
  rep.fitted_slope = fit.slope;

  std::vector<double> floors(n_seeds);
  parallel_for(n_seeds, [&](std::size_t s) { floors[s] = ax.floor(base.seed + s); });
  rep.error_floor = median(floors);

  const NoiseStream boot(opt.bootstrap_seed, StreamTag::kBootstrap);
  std::vector<double> slopes(opt.bootstrap_resamples);
  parallel_for(opt.bootstrap_resamples, [&](std::size_t b) {
    std::vector<double> med(grid.size());
    std::vector<double> u(n_seeds), pick(n_seeds);
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      boot.uniform(b, gi, u);
      for (std::size_t s = 0; s < n_seeds; ++s)
        pick[s] = rep.seed_errors[gi][std::min(n_seeds - 1, static_cast<std::size_t>(u[s] * n_seeds))];
      med[gi] = std::max(median(pick), 1e-300);
    }
    slopes[b] = fit_log_log(rep.values, med).slope;
  });
  if (!slopes.empty()) rep.slope_ci = {quantile(slopes, 0.05), quantile(slopes, 0.95)};

  for (std::size_t i = 0; i + 1 < rep.errors.size(); ++i)
    if (ax.expected_sign * (rep.errors[i + 1] - rep.errors[i]) < 0.0) ++rep.inversions;

  // Runs exceeding the fitted rate at its 90th-percentile constant; the
  // seedwise variant counts a seed once if any of its grid runs exceeds it.
  std::vector<double> consts;
  for (std::size_t gi = 0; gi < grid.size(); ++gi)
    for (double e : rep.seed_errors[gi]) consts.push_back(e / std::pow(grid[gi], fit.slope));
  const double c90 = quantile(consts, 0.9);
  std::size_t violating_runs = 0, violating_seeds = 0;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    bool bad = false;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      const bool over = rep.seed_errors[gi][s] > c90 * std::pow(grid[gi], fit.slope);
      violating_runs += over;
      bad = bad || over;
    }
    violating_seeds += bad;
  }
  rep.bound_violation_fraction = static_cast<double>(violating_runs) / static_cast<double>(n_seeds * grid.size());
  rep.seedwise_violation_fraction = static_cast<double>(violating_seeds) / static_cast<double>(n_seeds);
  rep.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const double smallest = *std::min_element(rep.errors.begin(), rep.errors.end());
  if (rep.error_floor > 0.5 * smallest) {
    std::ostringstream os;
    os << "sweep '" << axis << "': error floor " << rep.error_floor << " exceeds half the smallest error " << smallest
       << "; the swept term does not dominate";
    throw NumericalError(os.str());
  }
  return rep;
}

nlohmann::json to_json(const ScalingReport& r) {
  return {{"swept_parameter", r.swept_parameter},
          {"values", r.values},
          {"errors", r.errors},
          {"fitted_slope", r.fitted_slope},
          {"slope_ci", {r.slope_ci[0], r.slope_ci[1]}},
          {"seed_errors", r.seed_errors},
          {"error_floor", r.error_floor},
          {"inversions", r.inversions},
          {"bound_violation_fraction", r.bound_violation_fraction},
          {"seedwise_violation_fraction", r.seedwise_violation_fraction}};
}

}  // namespace cbo
