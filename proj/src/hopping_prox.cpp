#include "cbo/hopping_prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "cbo/consensus.hpp"
#include "cbo/parallel.hpp"

namespace cbo {
namespace {

void require_prox_well_posed(const Objective& obj, double tau) {
  require(std::isfinite(tau) && tau > 0.0, "prox needs tau > 0");
  const double lam = obj.constants().lambda_semiconvex;
  if (!(1.0 + tau * lam > 0.0)) {
    std::ostringstream os;
    os << "prox is not strongly convex: 1 + tau*Lambda = " << 1.0 + tau * lam << " <= 0";
    throw InvalidArgument(os.str());
  }
}

}  // namespace

double modulated_value(const Objective& obj, PointRef anchor, double tau, PointRef x) {
  return (anchor - x).squaredNorm() / (2.0 * tau) + obj.eval(x);
}

ProxResult prox(const Objective& obj, PointRef anchor, double tau, double tol, std::size_t max_iter) {
  require(obj.has_grad(), "prox needs the objective gradient");
  require(anchor.size() == obj.dim(), "anchor dimension does not match objective");
  require(anchor.allFinite(), "prox anchor must be finite");
  require(tol > 0.0 && max_iter >= 1, "prox needs tol > 0 and max_iter >= 1");
  require_prox_well_posed(obj, tau);

  const auto& lip = obj.constants().lipschitz_smooth;
  const double fixed_step = lip ? 1.0 / (*lip + 1.0 / tau) : 0.0;
  bool backtracking = !lip;
  double step = lip ? fixed_step : tau;

  ProxResult out;
  Vector x = anchor;
  double value = modulated_value(obj, anchor, tau, x);
  Vector g = (x - anchor) / tau + obj.grad(x);
  double residual = g.norm();
  Vector best = x;
  double best_residual = residual;

  // (x - anchor) / tau cannot be resolved below a few ulps of x over tau.
  const double eps = std::numeric_limits<double>::epsilon();
  auto target = [&](const Vector& y) {
    return std::max(tol, 8.0 * eps * (anchor.cwiseAbs().maxCoeff() + y.cwiseAbs().maxCoeff()) / tau);
  };
  std::size_t it = 0;
  while (residual > target(x) && it < max_iter) {
    ++it;
    Vector trial = x - step * g;
    double trial_value = modulated_value(obj, anchor, tau, trial);
    const double g2 = g.squaredNorm();
    // Rounding slack so that steps near the optimum are not rejected.
    const double slack = 1e-14 * (1.0 + std::abs(value));
    if (!backtracking && !(trial_value <= value + slack)) backtracking = true;
    if (backtracking) {
      // Armijo with halving; the step grows again after a success.
      while (!(trial_value <= value - 0.5 * step * g2 + slack) && step > 1e-300) {
        step *= 0.5;
        trial = x - step * g;
        trial_value = modulated_value(obj, anchor, tau, trial);
      }
    }
    x = std::move(trial);
    value = trial_value;
    g = (x - anchor) / tau + obj.grad(x);
    residual = g.norm();
    if (!std::isfinite(residual)) throw NumericalError("prox iterate became non-finite");
    if (residual < best_residual) {
      best_residual = residual;
      best = x;
    }
    if (backtracking) step = std::min(step * 2.0, tau);
  }
  if (best_residual > target(best)) {
    std::ostringstream os;
    os << "prox did not converge in " << max_iter << " iterations; best residual " << best_residual;
    throw NumericalError(os.str());
  }
  out.point = std::move(best);
  out.residual = best_residual;
  out.iterations = it;
  return out;
}

RunRecord mms_run(const Objective& obj, const SchemeConfig& config, PointRef x0) {
  require(config.tau.has_value(), "MMS needs tau");
  require(x0.size() == obj.dim(), "x0 dimension does not match objective");
  require_valid(config, obj.constants().lambda_semiconvex);
  const double tau = *config.tau;
  RunRecord rec;
  rec.scheme = "mms";
  rec.config = config;
  rec.iterates.resize(config.n_steps + 1, obj.dim());
  rec.objective_values.resize(config.n_steps + 1);
  rec.iterates.row(0) = x0.transpose();
  rec.objective_values[0] = obj.eval(x0);
  Vector x = x0;
  double max_res = 0.0;
  std::size_t iters = 0;
  for (int k = 1; k <= config.n_steps; ++k) {
    ProxResult p = prox(obj, x, tau);
    max_res = std::max(max_res, p.residual);
    iters += p.iterations;
    x = std::move(p.point);
    rec.iterates.row(k) = x.transpose();
    rec.objective_values[k] = obj.eval(x);
  }
  rec.diagnostics["max_prox_residual"] = max_res;
  rec.diagnostics["prox_iterations"] = static_cast<double>(iters);
  return rec;
}

RunRecord mms_run(const Objective& obj, const SchemeConfig& config) {
  return mms_run(obj, config, initial_point(config));
}

Vector ch_step(PointRef prev, const Objective& obj, const SchemeConfig& config, std::uint64_t step) {
  require(config.sigma_tilde.has_value(), "CH needs sigma_tilde");
  require(prev.size() == obj.dim(), "CH iterate dimension does not match objective");
  const double width = *config.sigma_tilde;
  const int d = obj.dim();
  const NoiseStream stream(config.seed, StreamTag::kHoppingSamples);
  PointMatrix samples(config.n_particles, d);
  Eigen::VectorXd values(config.n_particles);
  parallel_for(static_cast<std::size_t>(config.n_particles), [&](std::size_t i) {
    double* row = samples.data() + static_cast<std::ptrdiff_t>(i) * d;
    stream.standard_normal(step, i, std::span<double>(row, static_cast<std::size_t>(d)));
    for (int j = 0; j < d; ++j) row[j] = prev[j] + width * row[j];
    values[static_cast<Eigen::Index>(i)] = obj.eval(samples.row(static_cast<Eigen::Index>(i)).transpose());
  });
  return consensus_point(samples, values, config.alpha);
}

RunRecord ch_run(const Objective& obj, const SchemeConfig& config) {
  require(config.sigma_tilde.has_value(), "CH needs sigma_tilde");
  require(config.dim() == obj.dim(), "init_mean dimension does not match objective");
  require_valid(config, obj.constants().lambda_semiconvex);
  RunRecord rec;
  rec.scheme = "ch";
  rec.config = config;
  rec.iterates.resize(config.n_steps + 1, obj.dim());
  rec.objective_values.resize(config.n_steps + 1);
  Vector x = initial_point(config);
  rec.iterates.row(0) = x.transpose();
  rec.objective_values[0] = obj.eval(x);
  for (int k = 1; k <= config.n_steps; ++k) {
    x = ch_step(x, obj, config, static_cast<std::uint64_t>(k));
    rec.iterates.row(k) = x.transpose();
    rec.objective_values[k] = obj.eval(x);
  }
  return rec;
}

RunRecord implicit_ch_run(const Objective& obj, const SchemeConfig& config, const RunRecord& coupled_ch) {
  require(config.tau.has_value(), "implicit CH needs tau");
  require_valid(config, obj.constants().lambda_semiconvex);
  const SchemeConfig& other = coupled_ch.config;
  if (coupled_ch.scheme != "ch" || other.seed != config.seed || other.n_steps != config.n_steps ||
      other.dim() != config.dim() || other.init_mean != config.init_mean || other.init_std != config.init_std ||
      coupled_ch.iterates.rows() != config.n_steps + 1)
    throw InvalidArgument("implicit CH: coupled CH run does not match the config");
  const double tau = *config.tau;
  RunRecord rec;
  rec.scheme = "implicit_ch";
  rec.config = config;
  rec.iterates.resize(config.n_steps + 1, obj.dim());
  rec.objective_values.resize(config.n_steps + 1);
  rec.iterates.row(0) = coupled_ch.iterates.row(0);
  rec.objective_values[0] = obj.eval(rec.iterate(0));
  std::vector<ProxResult> steps(static_cast<std::size_t>(config.n_steps));
  // Each step depends only on the CH trajectory, so steps are independent.
  parallel_for(steps.size(), [&](std::size_t i) {
    steps[i] = prox(obj, coupled_ch.iterates.row(static_cast<Eigen::Index>(i)).transpose(), tau);
  });
  double max_res = 0.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i + 1);
    rec.iterates.row(k) = steps[i].point.transpose();
    rec.objective_values[k] = obj.eval(steps[i].point);
    max_res = std::max(max_res, steps[i].residual);
  }
  rec.diagnostics["max_prox_residual"] = max_res;
  return rec;
}

LaplaceBound laplace_bound_check(const Objective& obj, PointRef anchor, double tau, const LaplaceBoundInputs& in,
                                 double alpha, std::uint64_t seed) {
  require(in.r > 0.0 && in.q > 0.0, "Laplace bound needs r > 0 and q > 0");
  require(in.sample_count >= 1, "Laplace bound needs samples");
  require(std::isfinite(alpha) && alpha > 0.0, "Laplace bound needs alpha > 0");
  require_prox_well_posed(obj, tau);
  const int d = obj.dim();
  const double lam = obj.constants().lambda_semiconvex;
  LaplaceBound out;
  out.eta = std::sqrt(1.0 / (2.0 * tau) + lam / 2.0);
  out.slack = 3.0 / std::sqrt(static_cast<double>(in.sample_count));
  out.prox_point = prox(obj, anchor, tau, 1e-10).point;
  const Vector& xs = out.prox_point;
  const double e_min = modulated_value(obj, anchor, tau, xs);

  // rho = N(anchor, 2 sigma_tilde^2 Id) with sigma_tilde^2 = tau / (2 alpha).
  const double spread = std::sqrt(tau / alpha);
  const NoiseStream stream(seed, StreamTag::kLaplaceSamples);
  const auto n = static_cast<Eigen::Index>(in.sample_count);
  PointMatrix samples(n, d);
  Eigen::VectorXd values(n);
  parallel_for(in.sample_count, [&](std::size_t i) {
    double* row = samples.data() + static_cast<std::ptrdiff_t>(i) * d;
    stream.standard_normal(0, i, std::span<double>(row, static_cast<std::size_t>(d)));
    for (int j = 0; j < d; ++j) row[j] = anchor[j] + spread * row[j];
    values[static_cast<Eigen::Index>(i)] =
        modulated_value(obj, anchor, tau, samples.row(static_cast<Eigen::Index>(i)).transpose());
  });
  out.consensus = consensus_point(samples, values, alpha);
  out.lhs = (out.consensus - xs).norm();

  std::size_t inside = 0;
  double dist_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dist = (samples.row(i).transpose() - xs).norm();
    dist_sum += dist;
    if (dist <= in.r) ++inside;
  }
  out.ball_mass = static_cast<double>(inside) / static_cast<double>(n);
  out.mean_distance = dist_sum / static_cast<double>(n);
  if (inside == 0) throw NumericalError("Laplace bound: no sample fell in the r-ball; increase r or samples");

  // Sup over the ball: uniform interior draws plus a boundary grid in d <= 2.
  double sup = e_min;
  const std::size_t interior = 10000;
  std::vector<double> dir(static_cast<std::size_t>(d));
  double radial = 0.0;
  Vector probe(d);
  for (std::size_t i = 0; i < interior; ++i) {
    stream.standard_normal(1, i, dir);
    stream.uniform(2, i, std::span<double>(&radial, 1));
    const Vector u = Eigen::Map<const Vector>(dir.data(), d).normalized();
    probe = xs + in.r * std::pow(radial, 1.0 / d) * u;
    sup = std::max(sup, modulated_value(obj, anchor, tau, probe));
  }
  if (d == 1) {
    for (double s : {-1.0, 1.0}) {
      probe[0] = xs[0] + s * in.r;
      sup = std::max(sup, modulated_value(obj, anchor, tau, probe));
    }
  } else if (d == 2) {
    const int grid = 720;
    for (int i = 0; i < grid; ++i) {
      const double t = 2.0 * std::numbers::pi * i / grid;
      probe[0] = xs[0] + in.r * std::cos(t);
      probe[1] = xs[1] + in.r * std::sin(t);
      sup = std::max(sup, modulated_value(obj, anchor, tau, probe));
    }
  }
  out.energy_gap_r = sup - e_min;
  out.rhs = std::sqrt(in.q + out.energy_gap_r) / out.eta + std::exp(-alpha * in.q) / out.ball_mass * out.mean_distance;
  out.satisfied = out.lhs <= out.rhs * (1.0 + out.slack);
  return out;
}

}  // namespace cbo
