#include "cbo/baselines.hpp"

#include <cmath>

namespace cbo {

double AnnealSchedule::beta(double t) const {
  return kind == Kind::kLog ? scale * std::log1p(t) : scale;
}

AnnealSchedule AnnealSchedule::parse(const std::string& kind, double scale) {
  require(scale > 0.0, "anneal schedule scale must be positive");
  if (kind == "log") return {Kind::kLog, scale};
  if (kind == "constant") return {Kind::kConstant, scale};
  throw InvalidArgument("unknown anneal schedule '" + kind + "'");
}

RunRecord gd_run(const Objective& obj, PointRef x0, double step, int n_steps) {
  require(obj.has_grad(), "gradient descent needs the objective gradient");
  require(x0.size() == obj.dim(), "x0 dimension does not match objective");
  require(std::isfinite(step) && step > 0.0, "GD step must be positive");
  require(n_steps >= 1, "GD needs at least one step");
  RunRecord rec;
  rec.scheme = "gd";
  rec.config.dt = step;
  rec.config.n_steps = n_steps;
  rec.config.init_mean = x0;
  rec.iterates.resize(n_steps + 1, obj.dim());
  rec.objective_values.resize(n_steps + 1);
  Vector x = x0;
  rec.iterates.row(0) = x.transpose();
  rec.objective_values[0] = obj.eval(x);
  for (int k = 1; k <= n_steps; ++k) {
    x -= step * obj.grad(x);
    if (!x.allFinite()) throw NumericalError("GD diverged at step " + std::to_string(k));
    rec.iterates.row(k) = x.transpose();
    rec.objective_values[k] = obj.eval(x);
  }
  rec.diagnostics["terminal_gradient_norm"] = obj.grad(x).norm();
  return rec;
}

RunRecord langevin_run(const Objective& obj, PointRef x0, double dt, int n_steps, const AnnealSchedule& schedule,
                       std::uint64_t seed) {
  require(obj.has_grad(), "Langevin dynamics needs the objective gradient");
  require(x0.size() == obj.dim(), "x0 dimension does not match objective");
  require(std::isfinite(dt) && dt > 0.0, "Langevin dt must be positive");
  require(n_steps >= 1, "Langevin needs at least one step");
  require(schedule.scale > 0.0, "anneal schedule scale must be positive");
  const int d = obj.dim();
  const NoiseStream stream(seed, StreamTag::kLangevin);
  RunRecord rec;
  rec.scheme = "langevin";
  rec.config.dt = dt;
  rec.config.n_steps = n_steps;
  rec.config.init_mean = x0;
  rec.config.seed = seed;
  rec.iterates.resize(n_steps + 1, d);
  rec.objective_values.resize(n_steps + 1);
  Vector x = x0;
  Vector xi(d);
  rec.iterates.row(0) = x.transpose();
  rec.objective_values[0] = obj.eval(x);
  for (int k = 0; k < n_steps; ++k) {
    const double beta = schedule.beta((k + 1) * dt);
    const double amp = std::sqrt(2.0 * dt / beta);
    x -= dt * obj.grad(x);
    if (amp != 0.0) {
      stream.standard_normal(static_cast<std::uint64_t>(k), 0, std::span<double>(xi.data(), static_cast<std::size_t>(d)));
      x += amp * xi;
    }
    if (!x.allFinite()) throw NumericalError("Langevin iterate became non-finite at step " + std::to_string(k + 1));
    rec.iterates.row(k + 1) = x.transpose();
    rec.objective_values[k + 1] = obj.eval(x);
  }
  return rec;
}

}  // namespace cbo
