#include <cmath>
#include <vector>

#include "doctest.h"

#include "cbo/cbo_engine.hpp"
#include "cbo/config.hpp"
#include "cbo/consensus.hpp"
#include "cbo/objectives.hpp"
#include "cbo/parallel.hpp"

using namespace cbo;

namespace {

bool has_error(const ConfigIssues& issues, const std::string& needle) {
  for (const auto& e : issues.errors)
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

SchemeConfig small_config() {
  SchemeConfig c;
  c.n_particles = 50;
  c.n_steps = 20;
  c.init_mean = Vector::Constant(2, 1.0);
  c.init_std = 0.5;
  return c;
}

}  // namespace

TEST_CASE("config invariants") {
  SchemeConfig c;
  CHECK(check_config(c).ok());
  c.dt = 0.1;
  c.lambda = 15.0;
  CHECK(has_error(check_config(c), "drift overshoot"));
  c.lambda = 10.0;
  CHECK(check_config(c).ok());

  SchemeConfig t;
  t.tau = 0.1;
  CHECK_FALSE(check_config(t, -10.0).ok());
  t.tau = 0.049;
  CHECK(check_config(t, -10.0).ok());

  SchemeConfig k;
  k.tau = 0.05;
  k.couple_sigma_tilde = true;
  k.sigma_tilde = 0.1;
  CHECK_FALSE(check_config(k).ok());
  k.sigma_tilde = coupled_sigma_tilde(0.05, k.alpha);
  CHECK(check_config(k).ok());

  SchemeConfig w;
  w.tau = 0.05;
  w.alpha = 10.0;
  const ConfigIssues issues = check_config(w);
  CHECK(issues.ok());
  CHECK(issues.warnings.size() == 1);

  SchemeConfig bad;
  bad.n_particles = 0;
  bad.sigma = -1.0;
  bad.init_std = 0.0;
  CHECK(check_config(bad).errors.size() >= 3);
  CHECK_THROWS_AS(require_valid(bad), InvalidArgument);
}

TEST_CASE("settings parse and type-check") {
  SchemeConfig c;
  CHECK(apply_setting(c, "lambda", "2.5"));
  CHECK(c.lambda == 2.5);
  CHECK(apply_setting(c, "init_mean", "1, 2, 3"));
  CHECK(c.dim() == 3);
  CHECK(apply_setting(c, "tau", "0.05"));
  CHECK(apply_setting(c, "sigma_tilde", "coupled"));
  resolve_coupling(c);
  CHECK(c.couple_sigma_tilde);
  CHECK(*c.sigma_tilde == doctest::Approx(std::sqrt(0.05 / 200.0)));
  CHECK_FALSE(apply_setting(c, "nonsense", "1"));
  CHECK_THROWS_AS(apply_setting(c, "alpha", "abc"), InvalidArgument);
  CHECK_THROWS_AS(apply_setting(c, "n_particles", "2.5"), InvalidArgument);
}

TEST_CASE("alpha0 for d = 2") {
  CHECK(alpha0(1.0, 2) == doctest::Approx(2.0 * std::log(2.0) + std::log(3.0)));
  CHECK(alpha0(0.05, 2) == doctest::Approx(20.0 * alpha0(1.0, 2)));
}

TEST_CASE("noise addressing and moments") {
  SchemeConfig c;
  c.dt = 0.04;
  CHECK(noise_matrix(3, 5, c) == noise_matrix(3, 5, c));
  CHECK(noise_matrix(3, 5, c) != noise_matrix(3, 6, c));
  c.lambda = 7.0;  // lambda does not change the increments
  SchemeConfig d = c;
  d.lambda = 2.0;
  CHECK(noise_matrix(9, 1, c) == noise_matrix(9, 1, d));

  const int n = 100000;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    const Vector b = noise_matrix(1, static_cast<std::size_t>(i), c);
    mean += b;
    cov += b * b.transpose();
  }
  mean /= n;
  cov /= n;
  CHECK(std::abs(mean[0]) <= 5e-3 * std::sqrt(c.dt));
  CHECK(std::abs(mean[1]) <= 5e-3 * std::sqrt(c.dt));
  CHECK((cov - c.dt * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <= 3e-2 * c.dt);
}

TEST_CASE("cbo_step hand computation") {
  const Objective q = quadratic_objective(1, 2.0);  // E = x^2
  SchemeConfig c;
  c.sigma = 0.0;
  c.lambda = 1.0;
  c.dt = 0.1;
  c.alpha = 1.0;
  c.init_mean = Vector::Zero(1);
  Ensemble e{PointMatrix(2, 1), 0};
  e.positions << 0.0, 1.0;
  const StepResult r = cbo_step(e, q, c);
  const double cons = std::exp(-1.0) / (1.0 + std::exp(-1.0));
  CHECK(r.consensus[0] == doctest::Approx(cons).epsilon(1e-15));
  CHECK(r.ensemble.positions(0, 0) == doctest::Approx(0.1 * cons).epsilon(1e-15));
  CHECK(r.ensemble.positions(1, 0) == doctest::Approx(0.9 + 0.1 * cons).epsilon(1e-15));
  CHECK(r.ensemble.step == 1);
}

TEST_CASE("deterministic hopping limit and fixed points") {
  const Objective q = quadratic_objective(2, 1.0);
  SchemeConfig c = small_config();
  c.sigma = 0.0;
  c.lambda = 1.0 / c.dt;
  Ensemble e{initial_ensemble(c), 0};
  const StepResult r = cbo_step(e, q, c);
  for (Eigen::Index i = 0; i < r.ensemble.positions.rows(); ++i)
    CHECK(r.ensemble.positions.row(i).transpose() == r.consensus);

  Ensemble same{PointMatrix::Constant(10, 2, 0.7), 0};
  c.lambda = 3.0;
  c.sigma = 1.0;
  const StepResult s = cbo_step(same, q, c);
  CHECK(s.ensemble.positions == same.positions);
}

TEST_CASE("diameter contracts by 1 - dt lambda without noise") {
  const Objective q = quadratic_objective(2, 1.0);
  SchemeConfig c = small_config();
  c.sigma = 0.0;
  c.lambda = 3.0;
  Ensemble e{initial_ensemble(c), 0};
  auto diam = [](const PointMatrix& p) {
    double d = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index k = i + 1; k < p.rows(); ++k) d = std::max(d, (p.row(i) - p.row(k)).norm());
    return d;
  };
  for (int k = 0; k < 5; ++k) {
    const double before = diam(e.positions);
    e = cbo_step(e, q, c).ensemble;
    CHECK(diam(e.positions) == doctest::Approx((1.0 - c.dt * c.lambda) * before).epsilon(1e-12));
  }
}

TEST_CASE("cbo_run records the start point and post-step consensus") {
  const Objective q = quadratic_objective(2, 1.0);
  SchemeConfig c = small_config();
  const RunRecord r = cbo_run(q, c, true);
  CHECK(r.steps() == c.n_steps);
  CHECK(r.iterate(0) == initial_point(c));
  CHECK(r.ensemble_snapshots.size() == static_cast<std::size_t>(c.n_steps + 1));
  for (int k = 1; k <= c.n_steps; ++k) {
    const PointMatrix& p = r.ensemble_snapshots[static_cast<std::size_t>(k)];
    const Vector cons = consensus_point(p, evaluate_rows(q, p), c.alpha);
    CHECK(r.iterate(k) == cons);
    for (Eigen::Index j = 0; j < 2; ++j) {
      CHECK(cons[j] >= p.col(j).minCoeff());
      CHECK(cons[j] <= p.col(j).maxCoeff());
    }
    CHECK(r.objective_values[k] == q.eval(r.iterate(k)));
  }
  CHECK(std::isfinite(r.diagnostics.at("max_fourth_moment")));
}

TEST_CASE("single particle tracks itself") {
  const Objective q = quadratic_objective(2, 1.0);
  SchemeConfig c = small_config();
  c.n_particles = 1;
  const RunRecord r = cbo_run(q, c, true);
  for (int k = 1; k <= c.n_steps; ++k)
    CHECK(r.iterate(k) == r.ensemble_snapshots[static_cast<std::size_t>(k)].row(0).transpose());
}

TEST_CASE("hopping on a convex function decreases the objective") {
  const Objective q = quadratic_objective(2, 1.0);
  SchemeConfig c = small_config();
  c.sigma = 0.0;
  c.lambda = 1.0 / c.dt;
  c.alpha = 1.0;
  const RunRecord r = cbo_run(q, c);
  for (int k = 2; k <= c.n_steps; ++k) CHECK(r.objective_values[k] <= r.objective_values[k - 1]);
}

TEST_CASE("cbo_run is bit-identical across thread counts") {
  const Objective o = make_objective("canyon3");
  SchemeConfig c;
  c.n_steps = 30;
  RunRecord one, eight;
  {
    ScopedWorkerThreads t(1);
    one = cbo_run(o, c);
  }
  {
    ScopedWorkerThreads t(8);
    eight = cbo_run(o, c);
  }
  CHECK(one.iterates == eight.iterates);
  CHECK(one.objective_values == eight.objective_values);
}
