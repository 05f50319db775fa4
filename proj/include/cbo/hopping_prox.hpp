#pragma once

#include <cstdint>

#include "cbo/cbo_engine.hpp"
#include "cbo/config.hpp"
#include "cbo/objectives.hpp"

namespace cbo {

inline constexpr double kProxTolerance = 1e-10;
inline constexpr std::size_t kProxMaxIter = 100000;

struct ProxResult {
  Vector point;
  double residual = 0.0;  // |(x - anchor)/tau + grad E(x)|
  std::size_t iterations = 0;
};

/// argmin_x |anchor - x|^2 / (2 tau) + E(x) by gradient descent, warm-started
/// at the anchor. Uses step 1/(L + 1/tau) when L is declared and falls back
/// to backtracking otherwise (or if the fixed step fails to decrease).
/// Throws NumericalError if the residual does not reach `tol`.
ProxResult prox(const Objective& obj, PointRef anchor, double tau, double tol = kProxTolerance,
                std::size_t max_iter = kProxMaxIter);

/// Modulated objective |anchor - x|^2 / (2 tau) + E(x).
double modulated_value(const Objective& obj, PointRef anchor, double tau, PointRef x);

/// Iterated prox on the scheme's own iterate, from x_0.
RunRecord mms_run(const Objective& obj, const SchemeConfig& config, PointRef x0);
/// As above with x_0 drawn from rho_0.
RunRecord mms_run(const Objective& obj, const SchemeConfig& config);

/// Consensus of N samples prev + sigma_tilde xi, xi addressed by (seed, step, i).
Vector ch_step(PointRef prev, const Objective& obj, const SchemeConfig& config, std::uint64_t step);

RunRecord ch_run(const Objective& obj, const SchemeConfig& config);

/// x~_k = prox(coupled_ch.iterates[k-1], tau); x~_0 = x_0.
RunRecord implicit_ch_run(const Objective& obj, const SchemeConfig& config, const RunRecord& coupled_ch);

struct LaplaceBoundInputs {
  double r = 0.0;
  double q = 0.0;
  std::size_t sample_count = 100000;
};

struct LaplaceBound {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // 3 / sqrt(sample_count)
  bool satisfied = false;
  Vector prox_point;
  Vector consensus;
  double energy_gap_r = 0.0;  // sup over the r-ball minus the minimum
  double ball_mass = 0.0;
  double mean_distance = 0.0;
  double eta = 0.0;
};

/// Samples rho = N(anchor, (tau/alpha) Id) and compares the consensus of the
/// modulated objective with its minimizer against the quantitative Laplace
/// bound (q + E_r)^(1/2) / eta + exp(-alpha q) / rho(B_r) * int |x - x*| d rho.
LaplaceBound laplace_bound_check(const Objective& obj, PointRef anchor, double tau, const LaplaceBoundInputs& inputs,
                                 double alpha, std::uint64_t seed);

}  // namespace cbo
