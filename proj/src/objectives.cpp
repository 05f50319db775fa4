#include "cbo/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cbo/parallel.hpp"
#include "cbo/rng.hpp"

namespace cbo {

void TestBox::validate(int dim) const {
  require(lower.size() == dim && upper.size() == dim, "test box dimension mismatch");
  require(grid_per_axis >= 2, "test box needs at least 2 grid points per axis");
  for (int j = 0; j < dim; ++j) {
    require(std::isfinite(lower[j]) && std::isfinite(upper[j]), "test box bounds must be finite");
    require(lower[j] < upper[j], "test box requires lower < upper componentwise");
  }
}

Objective::Objective(Definition def) {
  require(def.dim >= 1, "objective dimension must be positive");
  require(static_cast<bool>(def.eval), "objective needs an evaluation function");
  if (def.minimizer) require(def.minimizer->size() == def.dim, "minimizer dimension mismatch");
  def.box.validate(def.dim);
  def_ = std::make_shared<const Definition>(std::move(def));
}

double Objective::eval(PointRef x) const {
  if (x.size() != def_->dim) throw InvalidArgument("point dimension does not match objective " + name());
  if (!x.allFinite()) throw InvalidArgument("non-finite point passed to objective " + name());
  return def_->eval(x);
}

Vector Objective::grad(PointRef x) const {
  if (!def_->grad) throw InvalidArgument("objective " + name() + " has no gradient");
  if (x.size() != def_->dim) throw InvalidArgument("point dimension does not match objective " + name());
  return def_->grad(x);
}

double Objective::minimum_value() const {
  if (!def_->minimizer) throw InvalidArgument("objective " + name() + " has no registered minimizer");
  return def_->eval(*def_->minimizer);
}

Objective Objective::with_constants(const RegularityConstants& constants) const {
  Definition copy = *def_;
  copy.constants = constants;
  return Objective(std::move(copy));
}

Eigen::VectorXd evaluate_rows(const Objective& obj, const PointMatrix& points) {
  require(points.cols() == obj.dim(), "point matrix width does not match objective dimension");
  Eigen::VectorXd values(points.rows());
  parallel_for(static_cast<std::size_t>(points.rows()), [&](std::size_t i) {
    values[static_cast<Eigen::Index>(i)] = obj.eval(points.row(static_cast<Eigen::Index>(i)).transpose());
  });
  return values;
}

// ---------------------------------------------------------------------------
// canyon

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }
double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

TestBox make_box(std::initializer_list<double> lo, std::initializer_list<double> hi, int grid) {
  TestBox b;
  b.lower = Eigen::Map<const Vector>(lo.begin(), static_cast<Eigen::Index>(lo.size()));
  b.upper = Eigen::Map<const Vector>(hi.begin(), static_cast<Eigen::Index>(hi.size()));
  b.grid_per_axis = grid;
  return b;
}

struct CanyonField {
  CanyonShape s;
  double amp;
  double freq;

  double v(double t) const {
    double acc = 0.0;
    for (auto it = s.valley.rbegin(); it != s.valley.rend(); ++it) acc = acc * t + *it;
    return acc;
  }
  double dv(double t) const {
    double acc = 0.0;
    for (std::size_t j = s.valley.size() - 1; j >= 1; --j) acc = acc * t + static_cast<double>(j) * s.valley[j];
    return acc;
  }

  double eval(double x1, double x2) const {
    const double g = x2 - v(x1);
    const double d = s.wall_width;
    const double walls = s.wall * d * d * (std::sqrt(1.0 + (g / d) * (g / d)) - 1.0);
    const double rho = std::hypot(x1, x2, s.smoothing) - s.smoothing;
    const double w = s.blend_width;
    const double tilt = s.slope_outer * rho + (s.slope_inner - s.slope_outer) * w *
                                                  (softplus(s.plateau_radius / w) - softplus((s.plateau_radius - rho) / w));
    const double osc = amp * (1.0 - std::cos(freq * x1) * std::cos(freq * x2));
    return walls + tilt + osc;
  }

  Vector grad(double x1, double x2) const {
    const double g = x2 - v(x1);
    const double d = s.wall_width;
    const double pw = s.wall * g / std::sqrt(1.0 + (g / d) * (g / d));
    const double q = std::hypot(x1, x2, s.smoothing);
    const double rho = q - s.smoothing;
    const double dtilt = s.slope_outer + (s.slope_inner - s.slope_outer) * logistic((s.plateau_radius - rho) / s.blend_width);
    const double c1 = std::cos(freq * x1), c2 = std::cos(freq * x2);
    const double s1 = std::sin(freq * x1), s2 = std::sin(freq * x2);
    Vector out(2);
    out[0] = -pw * dv(x1) + dtilt * x1 / q + amp * freq * s1 * c2;
    out[1] = pw + dtilt * x2 / q + amp * freq * c1 * s2;
    return out;
  }
};

}  // namespace

CanyonShape canyon_shape(int degree) {
  require(degree == 2 || degree == 3, "canyon degree must be 2 or 3");
  CanyonShape s;
  s.degree = degree;
  if (degree == 3) {
    // v(t) = t + 0.02 t (t - 4)(t - 8): passes (0,0), (4,4), (8,8).
    s.valley = {0.0, 1.64, -0.24, 0.02};
    s.plateau_radius = 8.0;
    s.box = make_box({-3.0, -3.0}, {11.0, 15.0}, 701);
    s.base_lambda = -2.5;
    s.base_lipschitz = 140.0;
    s.base_c1 = 48.0;
    s.base_c2 = 5.0;
    s.base_upper = 113.0;
  } else {
    // v(t) = 0.2 t^2 - 1.2 t: passes (0,0) and (5,-1).
    s.valley = {0.0, -1.2, 0.2};
    s.plateau_radius = 2.5;
    s.box = make_box({-4.0, -6.0}, {8.0, 4.0}, 601);
    s.base_lambda = -2.5;
    s.base_lipschitz = 62.0;
    s.base_c1 = 35.0;
    s.base_c2 = 4.0;
    s.base_upper = 60.0;
  }
  return s;
}

Objective canyon_objective(int degree, double oscillation_amplitude, double oscillation_frequency) {
  require(degree == 2 || degree == 3, "canyon degree must be 2 or 3");
  require(std::isfinite(oscillation_amplitude) && oscillation_amplitude >= 0.0,
          "oscillation amplitude must be nonnegative");
  require(std::isfinite(oscillation_frequency) && oscillation_frequency > 0.0,
          "oscillation frequency must be positive");
  auto field = std::make_shared<CanyonField>(CanyonField{canyon_shape(degree), oscillation_amplitude, oscillation_frequency});
  const CanyonShape& s = field->s;
  // The oscillation adds at most a w^2 to every curvature bound and 2a to the value.
  const double aw2 = oscillation_amplitude * oscillation_frequency * oscillation_frequency;

  Objective::Definition def;
  def.name = "canyon" + std::to_string(degree);
  def.dim = 2;
  def.eval = [field](PointRef x) { return field->eval(x[0], x[1]); };
  def.grad = [field](PointRef x) { return field->grad(x[0], x[1]); };
  def.minimizer = Vector::Zero(2);
  def.constants.lambda_semiconvex = s.base_lambda - aw2;
  def.constants.lipschitz_smooth = s.base_lipschitz + aw2;
  def.constants.c1 = s.base_c1 + aw2;
  def.constants.c2 = s.base_c2 + 2.0 * oscillation_amplitude;
  def.constants.upper_bound = s.base_upper + 2.0 * oscillation_amplitude;
  def.box = s.box;
  def.parameters = {
      {"family", "canyon"},
      {"degree", degree},
      {"formula",
       "wall*d^2*(sqrt(1+(g/d)^2)-1) + s_out*rho + (s_in-s_out)*b*(softplus(r_p/b)-softplus((r_p-rho)/b))"
       " + a*(1-cos(w*x1)*cos(w*x2)); g = x2 - v(x1); v(t) = sum_j valley[j]*t^j; rho = sqrt(x1^2+x2^2+eps^2)-eps"},
      {"valley", s.valley},
      {"wall", s.wall},
      {"d", s.wall_width},
      {"s_in", s.slope_inner},
      {"s_out", s.slope_outer},
      {"r_p", s.plateau_radius},
      {"b", s.blend_width},
      {"eps", s.smoothing},
      {"a", oscillation_amplitude},
      {"w", oscillation_frequency},
  };
  return Objective(std::move(def));
}

Objective rastrigin_objective(int dim) {
  require(dim >= 1, "rastrigin dimension must be positive");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  Objective::Definition def;
  def.name = "rastrigin-" + std::to_string(dim);
  def.dim = dim;
  def.eval = [](PointRef x) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) acc += x[j] * x[j] + 10.0 * (1.0 - std::cos(two_pi * x[j]));
    return acc;
  };
  def.grad = [](PointRef x) {
    Vector g(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) g[j] = 2.0 * x[j] + 10.0 * two_pi * std::sin(two_pi * x[j]);
    return g;
  };
  def.minimizer = Vector::Zero(dim);
  const double hess = 10.0 * two_pi * two_pi;
  def.constants.lambda_semiconvex = 2.0 - hess;
  def.constants.lipschitz_smooth = 2.0 + hess;
  def.constants.c1 = 2.0 + hess;
  def.constants.c2 = 20.0 * dim;
  def.constants.c3 = 1.0;
  def.constants.c4 = 1.0;
  def.box.lower = Vector::Constant(dim, -5.12);
  def.box.upper = Vector::Constant(dim, 5.12);
  def.box.grid_per_axis = dim <= 2 ? 513 : 33;
  def.parameters = {{"family", "rastrigin"}, {"dim", dim}, {"formula", "sum_j x_j^2 + 10*(1-cos(2*pi*x_j))"}};
  return Objective(std::move(def));
}

Objective quadratic_objective(int dim, double curvature) {
  require(dim >= 1, "quadratic dimension must be positive");
  require(std::isfinite(curvature) && curvature > 0.0, "quadratic curvature must be positive");
  Objective::Definition def;
  def.name = "quadratic-" + std::to_string(dim);
  def.dim = dim;
  def.eval = [curvature](PointRef x) { return 0.5 * curvature * x.squaredNorm(); };
  def.grad = [curvature](PointRef x) { return Vector(curvature * x); };
  def.minimizer = Vector::Zero(dim);
  def.constants.lambda_semiconvex = curvature;
  def.constants.lipschitz_smooth = curvature;
  def.constants.c1 = 0.5 * curvature;
  def.constants.c2 = 0.5 * curvature;
  def.constants.c3 = 0.5 * curvature;
  def.constants.c4 = 1.0;
  def.box.lower = Vector::Constant(dim, -3.0);
  def.box.upper = Vector::Constant(dim, 3.0);
  def.box.grid_per_axis = dim <= 2 ? 201 : 21;
  def.parameters = {{"family", "quadratic"}, {"dim", dim}, {"curvature", curvature},
                    {"formula", "curvature/2 * |x|^2"}};
  return Objective(std::move(def));
}

Objective make_objective(const std::string& name) {
  if (name == "canyon3") return canyon_objective(3);
  if (name == "canyon2") return canyon_objective(2);
  auto suffix_dim = [&](const std::string& prefix) -> int {
    const std::string rest = name.substr(prefix.size());
    require(!rest.empty() && std::all_of(rest.begin(), rest.end(), [](char c) { return c >= '0' && c <= '9'; }),
            "bad objective dimension in '" + name + "'");
    return std::stoi(rest);
  };
  if (name.rfind("rastrigin-", 0) == 0) return rastrigin_objective(suffix_dim("rastrigin-"));
  if (name.rfind("quadratic-", 0) == 0) return quadratic_objective(suffix_dim("quadratic-"), 1.0);
  throw InvalidArgument("unknown objective '" + name + "'");
}

std::vector<std::string> registered_objective_names() {
  return {"canyon3", "canyon2", "rastrigin-<d>", "quadratic-<d>"};
}

Vector finite_difference_gradient(const Objective& obj, PointRef x, double h) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + h;
    const double up = obj.eval(probe);
    probe[j] = x[j] - h;
    const double down = obj.eval(probe);
    probe[j] = x[j];
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

// ---------------------------------------------------------------------------
// assumption checks

namespace {

constexpr double kRoundoff = 1e-9;

class CheckAccumulator {
 public:
  explicit CheckAccumulator(std::string name) { check_.name = std::move(name); }

  void record(double lhs, double rhs, PointRef x, PointRef y) {
    ++check_.samples;
    const double excess = lhs - rhs;
    if (rhs > 0.0) check_.max_ratio = std::max(check_.max_ratio, lhs / rhs);
    if (excess > check_.max_excess) {
      check_.max_excess = excess;
      check_.witness = x;
      check_.witness_other = y;
    }
    if (excess > kRoundoff * (1.0 + std::abs(lhs) + std::abs(rhs))) check_.passed = false;
  }

  AssumptionCheck take() { return std::move(check_); }

 private:
  AssumptionCheck check_;
};

class BoxSampler {
 public:
  BoxSampler(const TestBox& box, std::uint64_t seed)
      : box_(box), stream_(seed, StreamTag::kAssumptionChecks), buf_(static_cast<std::size_t>(box.lower.size())) {}

  Vector uniform(std::uint64_t index, std::uint32_t salt) {
    stream_.uniform(0, index, buf_, salt);
    Vector x(box_.lower.size());
    for (Eigen::Index j = 0; j < x.size(); ++j)
      x[j] = box_.lower[j] + (box_.upper[j] - box_.lower[j]) * buf_[static_cast<std::size_t>(j)];
    return x;
  }

  Vector normal(std::uint64_t index, std::uint32_t salt) {
    stream_.standard_normal(0, index, buf_, salt);
    return Eigen::Map<const Vector>(buf_.data(), static_cast<Eigen::Index>(buf_.size()));
  }

  double scalar(std::uint64_t index, std::uint32_t salt) {
    double u = 0.0;
    stream_.uniform(0, index, std::span<double>(&u, 1), salt);
    return u;
  }

  // Nearby point, clamped into the box so segments stay inside it.
  Vector near(PointRef x, double scale, std::uint64_t index, std::uint32_t salt) {
    Vector y = x + scale * normal(index, salt);
    return y.cwiseMax(box_.lower).cwiseMin(box_.upper);
  }

 private:
  const TestBox& box_;
  NoiseStream stream_;
  std::vector<double> buf_;
};

double box_diameter(const TestBox& box) { return (box.upper - box.lower).norm(); }

}  // namespace

bool AssumptionReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.passed; });
}

const AssumptionCheck& AssumptionReport::check(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw InvalidArgument("no assumption check named '" + name + "'");
}

AssumptionReport validate_assumptions(const Objective& obj, const TestBox& box, std::size_t samples,
                                      std::uint64_t seed) {
  box.validate(obj.dim());
  require(samples >= 1, "validate_assumptions needs at least one sample");
  require(obj.minimizer().has_value(), "validate_assumptions needs a registered minimizer");
  const RegularityConstants& k = obj.constants();
  const int d = obj.dim();
  const Vector& xstar = *obj.minimizer();
  const double emin = obj.minimum_value();
  const double diam = box_diameter(box);
  BoxSampler sampler(box, seed);
  AssumptionReport report;

  {
    CheckAccumulator acc("minimizer");
    const double cells = std::pow(static_cast<double>(box.grid_per_axis), d);
    if (cells <= 4e6) {
      const auto total = static_cast<std::size_t>(cells);
      Vector x(d);
      for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (int j = 0; j < d; ++j) {
          const auto idx = static_cast<double>(rem % static_cast<std::size_t>(box.grid_per_axis));
          rem /= static_cast<std::size_t>(box.grid_per_axis);
          x[j] = box.lower[j] + (box.upper[j] - box.lower[j]) * idx / (box.grid_per_axis - 1);
        }
        acc.record(emin, obj.eval(x), xstar, x);
      }
    } else {
      for (std::size_t i = 0; i < samples; ++i) {
        const Vector x = sampler.uniform(i, 1);
        acc.record(emin, obj.eval(x), xstar, x);
      }
    }
    report.checks.push_back(acc.take());
  }

  {
    CheckAccumulator acc("local_lipschitz");
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector x = sampler.uniform(i, 2);
      const Vector y = (i % 2 == 0) ? sampler.uniform(i, 3) : sampler.near(x, 0.01 * diam, i, 3);
      const double lhs = std::abs(obj.eval(x) - obj.eval(y));
      acc.record(lhs, k.c1 * (x.norm() + y.norm()) * (x - y).norm(), x, y);
    }
    report.checks.push_back(acc.take());
  }

  {
    CheckAccumulator acc("quadratic_growth_upper");
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector x = sampler.uniform(i, 4);
      acc.record(std::abs(obj.eval(x) - emin), k.c2 * (1.0 + x.squaredNorm()), x, x);
    }
    report.checks.push_back(acc.take());
  }

  if (k.bounded_branch() == k.growth_branch()) {
    AssumptionCheck bad;
    bad.name = "growth_branch";
    bad.passed = false;
    report.checks.push_back(bad);
  } else if (k.bounded_branch()) {
    CheckAccumulator acc("bounded_above");
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector x = sampler.uniform(i, 5);
      acc.record(obj.eval(x), *k.upper_bound, x, x);
    }
    report.checks.push_back(acc.take());
  } else {
    CheckAccumulator acc("quadratic_growth_lower");
    const double reach = std::max(box.lower.cwiseAbs().maxCoeff(), box.upper.cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < samples; ++i) {
      // Half in the box, half on shells between c4 and a few times past the box.
      Vector x = sampler.uniform(i, 5);
      if (i % 2 == 1) {
        const Vector dir = sampler.normal(i, 6).normalized();
        const double r = *k.c4 + sampler.scalar(i, 7) * (*k.c4 + 3.0 * reach);
        x = xstar + r * dir;
      }
      if (x.norm() < *k.c4) continue;
      acc.record(*k.c3 * x.squaredNorm(), obj.eval(x) - emin, x, x);
    }
    report.checks.push_back(acc.take());
  }

  {
    CheckAccumulator acc("semi_convexity");
    const double lam = k.lambda_semiconvex;
    auto h = [&](const Vector& z) { return obj.eval(z) - 0.5 * lam * z.squaredNorm(); };
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector x = sampler.uniform(i, 8);
      const double scale = (i % 3 == 0) ? 1.0 : (i % 3 == 1 ? 0.05 : 0.005);
      const Vector y = (i % 3 == 0) ? sampler.uniform(i, 9) : sampler.near(x, scale * diam, i, 9);
      const double t = sampler.scalar(i, 10);
      const Vector m = t * x + (1.0 - t) * y;
      acc.record(h(m), t * h(x) + (1.0 - t) * h(y), x, y);
    }
    report.checks.push_back(acc.take());
  }

  if (k.lipschitz_smooth && obj.has_grad()) {
    CheckAccumulator acc("gradient_lipschitz");
    for (std::size_t i = 0; i < samples; ++i) {
      const Vector x = sampler.uniform(i, 11);
      const Vector y = (i % 2 == 0) ? sampler.uniform(i, 12) : sampler.near(x, 0.005 * diam, i, 12);
      acc.record((obj.grad(x) - obj.grad(y)).norm(), *k.lipschitz_smooth * (x - y).norm(), x, y);
    }
    report.checks.push_back(acc.take());
  }
  return report;
}

nlohmann::json to_json(const RegularityConstants& k) {
  nlohmann::json j = {{"lambda_semiconvex", k.lambda_semiconvex}, {"c1", k.c1}, {"c2", k.c2}};
  j["lipschitz_smooth"] = k.lipschitz_smooth ? nlohmann::json(*k.lipschitz_smooth) : nlohmann::json();
  j["c3"] = k.c3 ? nlohmann::json(*k.c3) : nlohmann::json();
  j["c4"] = k.c4 ? nlohmann::json(*k.c4) : nlohmann::json();
  j["upper_bound"] = k.upper_bound ? nlohmann::json(*k.upper_bound) : nlohmann::json();
  return j;
}

nlohmann::json to_json(const AssumptionReport& report) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    nlohmann::json j = {{"name", c.name}, {"passed", c.passed}, {"samples", c.samples}, {"max_ratio", c.max_ratio}};
    j["max_excess"] = std::isfinite(c.max_excess) ? nlohmann::json(c.max_excess) : nlohmann::json();
    if (c.witness.size() > 0) j["witness"] = std::vector<double>(c.witness.begin(), c.witness.end());
    if (c.witness_other.size() > 0)
      j["witness_other"] = std::vector<double>(c.witness_other.begin(), c.witness_other.end());
    checks.push_back(std::move(j));
  }
  return {{"all_passed", report.all_passed()}, {"checks", checks}};
}

}  // namespace cbo
