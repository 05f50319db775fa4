#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cbo/config.hpp"
#include "cbo/objectives.hpp"
#include "cbo/rng.hpp"
#include "cbo/types.hpp"

namespace cbo {

struct Ensemble {
  PointMatrix positions;
  std::uint64_t step = 0;
};

struct RunRecord {
  std::string scheme;
  PointMatrix iterates;               // (K+1) x d
  Eigen::VectorXd objective_values;  // K+1
  SchemeConfig config;
  std::vector<PointMatrix> ensemble_snapshots;
  // Scalar diagnostics, e.g. "max_fourth_moment", "max_prox_residual".
  std::map<std::string, double> diagnostics;

  Eigen::Index steps() const { return iterates.rows() - 1; }
  Vector iterate(Eigen::Index k) const { return iterates.row(k).transpose(); }
  Vector final_iterate() const { return iterate(steps()); }
};

/// B_k^i ~ N(0, dt Id), addressed by (seed, step, particle).
Vector noise_matrix(std::uint64_t step, std::size_t particle, const SchemeConfig& config);

/// N i.i.d. draws from N(init_mean, init_std^2 Id) on the ensemble sub-stream.
PointMatrix initial_ensemble(const SchemeConfig& config);

/// x_0 ~ rho_0 drawn on its own sub-stream; shared by every scheme.
Vector initial_point(const SchemeConfig& config);

struct StepResult {
  Ensemble ensemble;
  Vector consensus;
};

/// One CBO step: c = consensus of `ens`, then
/// X_i <- X_i - dt lambda (X_i - c) + sigma D(X_i - c) B_i.
StepResult cbo_step(const Ensemble& ens, const Objective& obj, const SchemeConfig& config);

/// Moves `ens` one step toward the given consensus point `c`.
Ensemble cbo_advance(const Ensemble& ens, PointRef c, const SchemeConfig& config);

/// Alarm level for the running fourth moment (1/N) sum |X_i|^4: the initial
/// moment times E[(1 - dt lambda + sigma sqrt(dt) xi)^4]^K with a factor 16
/// for the consensus shift. Exceeding it sets "fourth_moment_alarm".
double fourth_moment_cap(const SchemeConfig& config, double initial_fourth_moment);

/// Consensus-point trajectory: iterates[0] = x_0 ~ rho_0, iterates[k] is the
/// consensus of the ensemble after step k.
RunRecord cbo_run(const Objective& obj, const SchemeConfig& config, bool keep_snapshots = false);

}  // namespace cbo
