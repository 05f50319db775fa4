#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "cbo/cbo_engine.hpp"
#include "cbo/config.hpp"
#include "cbo/objectives.hpp"

namespace cbo {

struct CoupledTriple {
  RunRecord cbo;
  RunRecord ch;
  RunRecord ich;
};

/// CBO, CH and implicit CH on a shared seed root and a shared x_0.
CoupledTriple coupled_triple_run(const Objective& obj, const SchemeConfig& config);

struct ResidualRecord {
  PointMatrix g1;  // x^CH_{k-1} - x^CBO_{k-1}
  PointMatrix g2;  // tau (grad E(x~^CH_k) - grad E(x^CBO_{k-1}))
  PointMatrix g3;  // x^CBO_k - x~^CH_k
  PointMatrix g;   // g1 - g2 + g3
  Eigen::VectorXd g1_norm, g2_norm, g3_norm, g_norm;
  Eigen::VectorXd reconstruction_residual;  // |x^CBO_k - (x^CBO_{k-1} - tau grad E(x^CBO_{k-1}) + g_k)|

  Eigen::Index steps() const { return g.rows(); }
  double max_reconstruction_residual() const;
};

inline constexpr double kReconstructionTolerance = 1e-10;

/// Row k-1 holds step k. Throws NumericalError if the reconstruction
/// identity fails by more than kReconstructionTolerance.
ResidualRecord decompose_residual(const CoupledTriple& triple, const Objective& obj, double tau);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares fit of log(errors) against log(values).
SlopeFit fit_log_log(const std::vector<double>& values, const std::vector<double>& errors);

struct ScalingReport {
  std::string swept_parameter;
  std::vector<double> values;
  std::vector<double> errors;                    // median over seeds
  std::vector<std::vector<double>> seed_errors;  // [grid][seed]
  double fitted_slope = 0.0;
  std::array<double, 2> slope_ci{0.0, 0.0};      // bootstrap 90%
  double error_floor = 0.0;
  int inversions = 0;                 // steps against the expected direction
  double bound_violation_fraction = 0.0;     // per (grid value, seed) run
  double seedwise_violation_fraction = 0.0;  // seeds with any violating run
  double elapsed_seconds = 0.0;
};

struct SweepOptions {
  std::size_t bootstrap_resamples = 1000;
  std::uint64_t bootstrap_seed = 0;
  // Multiplier of the largest N used to measure the floor on the N axis.
  double floor_multiplier = 16.0;
};

/// axis in {"n_particles", "lambda_gap", "sigma_sqrt_dt", "tau"}. Grid
/// semantics: particle counts; |lambda - 1/dt| as a fraction of 1/dt;
/// sigma sqrt(dt); tau. Seeds are base.seed + s for s < seeds.
/// Throws NumericalError if the floor exceeds half the smallest error.
ScalingReport scaling_sweep(const std::string& axis, const Objective& obj, const SchemeConfig& base,
                            const std::vector<double>& grid, int seeds, const SweepOptions& options = {});

nlohmann::json to_json(const ScalingReport& report);

}  // namespace cbo
