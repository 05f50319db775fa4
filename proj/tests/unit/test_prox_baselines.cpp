#include <cmath>
#include <vector>

#include "doctest.h"

#include "cbo/baselines.hpp"
#include "cbo/cbo_engine.hpp"
#include "cbo/config.hpp"
#include "cbo/hopping_prox.hpp"
#include "cbo/objectives.hpp"

using namespace cbo;

namespace {

SchemeConfig quad_config(double tau) {
  SchemeConfig c;
  c.tau = tau;
  c.n_steps = 20;
  c.n_particles = 200;
  c.init_mean = Vector{{1.0, -0.5}};
  c.init_std = 0.3;
  return c;
}

}  // namespace

TEST_CASE("prox of a quadratic is closed form") {
  const double curv = 3.0, tau = 0.2;
  const Objective q = quadratic_objective(2, curv);
  const Vector p{{1.5, -2.0}};
  const ProxResult r = prox(q, p, tau);
  CHECK((r.point - p / (1.0 + tau * curv)).norm() <= 1e-8);
  CHECK(r.residual <= kProxTolerance);
}

TEST_CASE("prox limits and fixed points") {
  const Objective c = make_objective("canyon3");
  const Vector p{{7.0, 6.5}};
  CHECK((prox(c, p, 1e-6).point - p).norm() <= 1e-4);
  const ProxResult at_min = prox(c, *c.minimizer(), 0.05);
  CHECK(at_min.point == *c.minimizer());
  CHECK(at_min.iterations == 0);
}

TEST_CASE("prox rejects ill-posed steps") {
  const Objective c = make_objective("canyon3");
  const double lam = c.constants().lambda_semiconvex;
  CHECK_THROWS_AS(prox(c, Vector{{1.0, 1.0}}, -1.0 / lam), InvalidArgument);
  CHECK_THROWS_AS(prox(c, Vector{{1.0, 1.0}}, 2.0 / -lam), InvalidArgument);
}

TEST_CASE("prox agrees with dense grid minimization in 1-d") {
  const Objective r = rastrigin_objective(1);
  const double tau = 0.002;  // 1 + tau Lambda > 0
  for (double a : {-2.3, 0.37, 1.9, 4.4}) {
    const Vector anchor = Vector::Constant(1, a);
    const ProxResult pr = prox(r, anchor, tau);
    const int n = 100000;
    const double lo = a - 1.0, hi = a + 1.0, h = (hi - lo) / (n - 1);
    double best = INFINITY, arg = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = lo + h * i;
      const double v = modulated_value(r, anchor, tau, Vector::Constant(1, x));
      if (v < best) best = v, arg = x;
    }
    CHECK(std::abs(pr.point[0] - arg) <= h);
  }
}

TEST_CASE("mms on a quadratic is geometric") {
  const double curv = 1.0, tau = 0.1;
  const Objective q = quadratic_objective(2, curv);
  const SchemeConfig c = quad_config(tau);
  const Vector x0{{2.0, 1.0}};
  const RunRecord r = mms_run(q, c, x0);
  for (int k = 0; k <= c.n_steps; ++k)
    CHECK((r.iterate(k) - x0 / std::pow(1.0 + tau * curv, k)).norm() <= 1e-9);
  const RunRecord still = mms_run(q, c, Vector::Zero(2));
  CHECK(still.iterates.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mms on canyon3 dissipates and stalls away from the minimizer") {
  const Objective o = make_objective("canyon3");
  SchemeConfig c = quad_config(0.05);
  c.n_steps = 400;
  const RunRecord r = mms_run(o, c, Vector{{8.0, 8.0}});
  const double tau = *c.tau;
  for (int k = 1; k <= c.n_steps; ++k) {
    const double step = (r.iterate(k) - r.iterate(k - 1)).squaredNorm() / (2.0 * tau);
    CHECK(r.objective_values[k] + step <= r.objective_values[k - 1] + kProxTolerance);
  }
  CHECK(o.grad(r.final_iterate()).norm() <= 10.0 * kProxTolerance);
  CHECK((r.final_iterate() - *o.minimizer()).norm() > 1.0);
}

TEST_CASE("ch_step limits") {
  const Objective q = quadratic_objective(1, 1.0);
  SchemeConfig c;
  c.init_mean = Vector::Zero(1);
  c.sigma_tilde = 0.0;
  const Vector prev = Vector::Constant(1, 1.0);
  CHECK(ch_step(prev, q, c, 1) == prev);

  c.sigma_tilde = 0.1;
  c.alpha = 100.0;
  c.n_particles = 10000;
  const double moved = ch_step(prev, q, c, 1)[0];
  CHECK(moved > 0.0);
  CHECK(moved < 1.0);
  c.alpha = 1.0;
  const double mild = ch_step(prev, q, c, 1)[0];
  // Gibbs reweighting of N(1, s^2) under exp(-alpha x^2 / 2) has mean 1 / (1 + alpha s^2).
  CHECK(mild == doctest::Approx(1.0 / (1.0 + 0.01)).epsilon(3e-3));

  c.alpha = 1e-12;
  const double mean = ch_step(prev, q, c, 1)[0];
  CHECK(std::abs(mean - 1.0) <= 5.0 * 0.1 / std::sqrt(10000.0));
}

TEST_CASE("ch_run with zero width is constant") {
  const Objective q = quadratic_objective(2, 1.0);
  SchemeConfig c = quad_config(0.1);
  c.sigma_tilde = 0.0;
  const RunRecord r = ch_run(q, c);
  for (int k = 0; k <= c.n_steps; ++k) CHECK(r.iterate(k) == initial_point(c));
}

TEST_CASE("implicit ch follows the ch anchors") {
  const double curv = 1.0, tau = 0.1;
  const Objective q = quadratic_objective(2, curv);
  SchemeConfig c = quad_config(tau);
  c.sigma_tilde = coupled_sigma_tilde(tau, c.alpha);
  const RunRecord ch = ch_run(q, c);
  const RunRecord ich = implicit_ch_run(q, c, ch);
  CHECK(ich.iterate(0) == ch.iterate(0));
  for (int k = 1; k <= c.n_steps; ++k) {
    CHECK((ich.iterate(k) - ch.iterate(k - 1) / (1.0 + tau * curv)).norm() <= 1e-9);
    const Vector res = (ich.iterate(k) - ch.iterate(k - 1)) / tau + q.grad(ich.iterate(k));
    CHECK(res.norm() <= kProxTolerance);
    const double c1 = q.constants().c1;
    CHECK((ich.iterate(k) - ch.iterate(k - 1)).norm() <=
          2.0 * tau * c1 * (ch.iterate(k - 1).norm() + ich.iterate(k).norm()) + kProxTolerance);
  }
  SchemeConfig other = c;
  other.seed = 5;
  CHECK_THROWS_AS(implicit_ch_run(q, other, ch), InvalidArgument);
}

TEST_CASE("laplace bound on quadratic and at a prox fixed point") {
  const Objective q = quadratic_objective(2, 1.0);
  const LaplaceBoundInputs in{0.5, 0.1, 100000};
  const LaplaceBound b = laplace_bound_check(q, Vector{{0.8, -0.3}}, 0.1, in, 1e3, 1);
  CHECK(b.satisfied);
  CHECK(b.lhs <= b.rhs * (1.0 + b.slack));
  CHECK(b.eta == doctest::Approx(std::sqrt(1.0 / 0.2 + 0.5)));

  const LaplaceBound fixed = laplace_bound_check(q, Vector::Zero(2), 0.1, in, 1e3, 2);
  CHECK(fixed.prox_point.norm() == 0.0);
  CHECK(fixed.lhs <= 0.01);
  CHECK(fixed.satisfied);

  const LaplaceBoundInputs tiny{1e-9, 0.1, 1000};
  CHECK_THROWS_AS(laplace_bound_check(q, Vector{{0.8, -0.3}}, 0.1, tiny, 1e3, 1), NumericalError);
}

TEST_CASE("gd on a quadratic is 0.8^k") {
  const Objective q = quadratic_objective(1, 2.0);
  const RunRecord r = gd_run(q, Vector::Constant(1, 1.0), 0.1, 50);
  for (int k = 0; k <= 50; ++k) CHECK(r.iterate(k)[0] == doctest::Approx(std::pow(0.8, k)).epsilon(1e-12));
  const RunRecord still = gd_run(q, Vector::Zero(1), 0.1, 10);
  CHECK(still.iterates.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gd descends with step below 1/L") {
  for (const auto& name : {"canyon3", "canyon2", "rastrigin-2"}) {
    const Objective o = make_objective(name);
    const double step = 1.0 / *o.constants().lipschitz_smooth;
    const RunRecord r = gd_run(o, o.box().upper * 0.5, step, 500);
    for (int k = 1; k <= 500; ++k)
      CHECK(r.objective_values[k] <= r.objective_values[k - 1] + 1e-12 * (1.0 + std::abs(r.objective_values[k - 1])));
  }
}

TEST_CASE("gd diverging is reported") {
  const Objective q = quadratic_objective(1, 2.0);
  CHECK_THROWS_AS(gd_run(q, Vector::Constant(1, 1.0), 5.0, 2000), NumericalError);
}

TEST_CASE("anneal schedule") {
  AnnealSchedule s;
  CHECK(s.beta(std::exp(1.0) - 1.0) == doctest::Approx(0.02));
  CHECK(AnnealSchedule::parse("constant", 3.0).beta(100.0) == 3.0);
  CHECK_THROWS_AS(AnnealSchedule::parse("log", 0.0), InvalidArgument);
  CHECK_THROWS_AS(AnnealSchedule::parse("cubic", 1.0), InvalidArgument);
}

TEST_CASE("langevin without noise reproduces gd bitwise") {
  const Objective o = make_objective("canyon3");
  const Vector x0{{8.0, 8.0}};
  const RunRecord gd = gd_run(o, x0, 0.001, 2000);
  const AnnealSchedule cold{AnnealSchedule::Kind::kConstant, INFINITY};
  const RunRecord lv = langevin_run(o, x0, 0.001, 2000, cold, 3);
  CHECK(gd.iterates == lv.iterates);
}

TEST_CASE("langevin matches the discrete Ornstein-Uhlenbeck second moment") {
  const double curv = 1.0, beta = 4.0, dt = 0.01;
  const Objective q = quadratic_objective(2, curv);
  const AnnealSchedule s{AnnealSchedule::Kind::kConstant, beta};
  const RunRecord r = langevin_run(q, Vector::Zero(2), dt, 400000, s, 9);
  double m2 = 0.0;
  int count = 0;
  for (Eigen::Index k = 1000; k < r.iterates.rows(); ++k, ++count) m2 += r.iterates.row(k).squaredNorm();
  m2 /= count;
  // Stationary variance of x <- (1 - c dt) x + sqrt(2 dt / beta) xi, per coordinate.
  const double exact = 2.0 * (2.0 * dt / beta) / (1.0 - std::pow(1.0 - curv * dt, 2));
  CHECK(m2 == doctest::Approx(exact).epsilon(0.05));
  CHECK(exact == doctest::Approx(2.0 / (curv * beta)).epsilon(0.01));
}
