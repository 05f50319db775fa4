#include "cbo/cbo_engine.hpp"

#include <cmath>

#include "cbo/consensus.hpp"
#include "cbo/parallel.hpp"

namespace cbo {
namespace {

void require_finite(const PointMatrix& positions, std::uint64_t step) {
  if (!positions.allFinite()) throw NumericalError("CBO ensemble became non-finite at step " + std::to_string(step));
}

double fourth_moment(const PointMatrix& positions) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < positions.rows(); ++i) {
    const double r2 = positions.row(i).squaredNorm();
    acc += r2 * r2;
  }
  return acc / static_cast<double>(positions.rows());
}

}  // namespace

double fourth_moment_cap(const SchemeConfig& config, double initial_fourth_moment) {
  const double a = 1.0 - config.dt * config.lambda;
  const double s2 = config.sigma * config.sigma * config.dt;
  const double growth = std::max(1.0, a * a * a * a + 6.0 * a * a * s2 + 3.0 * s2 * s2);
  return 16.0 * std::max(initial_fourth_moment, 1.0) * std::pow(growth, config.n_steps);
}

Vector noise_matrix(std::uint64_t step, std::size_t particle, const SchemeConfig& config) {
  const NoiseStream stream(config.seed, StreamTag::kCboNoise);
  Vector b(config.dim());
  stream.standard_normal(step, particle, std::span<double>(b.data(), static_cast<std::size_t>(b.size())));
  return std::sqrt(config.dt) * b;
}

PointMatrix initial_ensemble(const SchemeConfig& config) {
  const int d = config.dim();
  PointMatrix x(config.n_particles, d);
  const NoiseStream stream(config.seed, StreamTag::kInitialEnsemble);
  parallel_for(static_cast<std::size_t>(config.n_particles), [&](std::size_t i) {
    double* row = x.data() + static_cast<std::ptrdiff_t>(i) * d;
    stream.standard_normal(0, i, std::span<double>(row, static_cast<std::size_t>(d)));
    for (int j = 0; j < d; ++j) row[j] = config.init_mean[j] + config.init_std * row[j];
  });
  return x;
}

Vector initial_point(const SchemeConfig& config) {
  const NoiseStream stream(config.seed, StreamTag::kStartPoint);
  Vector x(config.dim());
  stream.standard_normal(0, 0, std::span<double>(x.data(), static_cast<std::size_t>(x.size())));
  return config.init_mean + config.init_std * x;
}

Ensemble cbo_advance(const Ensemble& ens, PointRef c, const SchemeConfig& config) {
  const Eigen::Index n = ens.positions.rows();
  const Eigen::Index d = ens.positions.cols();
  require(c.size() == d, "consensus dimension mismatch");
  Ensemble next{PointMatrix(n, d), ens.step + 1};
  const NoiseStream stream(config.seed, StreamTag::kCboNoise);
  const double drift = config.dt * config.lambda;
  const double diffusion = config.sigma * std::sqrt(config.dt);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    double b[16];
    std::vector<double> heap;
    double* buf = b;
    if (d > 16) {
      heap.resize(static_cast<std::size_t>(d));
      buf = heap.data();
    }
    stream.standard_normal(next.step, i, std::span<double>(buf, static_cast<std::size_t>(d)));
    for (Eigen::Index j = 0; j < d; ++j) {
      const double x = ens.positions(row, j);
      const double gap = x - c[j];
      next.positions(row, j) = (1.0 - drift) * x + drift * c[j] + diffusion * gap * buf[j];
    }
  });
  require_finite(next.positions, next.step);
  return next;
}

StepResult cbo_step(const Ensemble& ens, const Objective& obj, const SchemeConfig& config) {
  require(ens.positions.cols() == obj.dim(), "ensemble dimension does not match objective");
  require(ens.step < static_cast<std::uint64_t>(config.n_steps), "ensemble already at the final step");
  const Eigen::VectorXd values = evaluate_rows(obj, ens.positions);
  Vector c = consensus_point(ens.positions, values, config.alpha);
  return {cbo_advance(ens, c, config), std::move(c)};
}

RunRecord cbo_run(const Objective& obj, const SchemeConfig& config, bool keep_snapshots) {
  require_valid(config, obj.constants().lambda_semiconvex);
  require(config.dim() == obj.dim(), "init_mean dimension does not match objective");
  const int k_max = config.n_steps;
  RunRecord rec;
  rec.scheme = "cbo";
  rec.config = config;
  rec.iterates.resize(k_max + 1, obj.dim());
  rec.objective_values.resize(k_max + 1);

  Ensemble ens{initial_ensemble(config), 0};
  const Vector x0 = initial_point(config);
  rec.iterates.row(0) = x0.transpose();
  rec.objective_values[0] = obj.eval(x0);
  if (keep_snapshots) rec.ensemble_snapshots.push_back(ens.positions);

  const double initial_m4 = fourth_moment(ens.positions);
  double max_m4 = initial_m4;
  // One consensus per step: computed on the post-step ensemble, recorded as
  // x^CBO_k and reused as the drift target of step k + 1.
  Vector target = consensus_point(ens.positions, evaluate_rows(obj, ens.positions), config.alpha);
  for (int k = 1; k <= k_max; ++k) {
    ens = cbo_advance(ens, target, config);
    const Eigen::VectorXd values = evaluate_rows(obj, ens.positions);
    target = consensus_point(ens.positions, values, config.alpha);
    rec.iterates.row(k) = target.transpose();
    rec.objective_values[k] = obj.eval(target);
    max_m4 = std::max(max_m4, fourth_moment(ens.positions));
    if (keep_snapshots) rec.ensemble_snapshots.push_back(ens.positions);
  }
  rec.diagnostics["max_fourth_moment"] = max_m4;
  const double cap = fourth_moment_cap(config, initial_m4);
  rec.diagnostics["fourth_moment_cap"] = cap;
  rec.diagnostics["fourth_moment_alarm"] = max_m4 > cap ? 1.0 : 0.0;
  return rec;
}

}  // namespace cbo
