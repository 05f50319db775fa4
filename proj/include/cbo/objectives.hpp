#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cbo/types.hpp"

namespace cbo {

/// Declared regularity of an objective. Exactly one of {upper_bound} or
/// {c3, c4} is set, selecting the bounded or the quadratic-growth branch.
struct RegularityConstants {
  double lambda_semiconvex = 0.0;
  std::optional<double> lipschitz_smooth;
  double c1 = 0.0;
  double c2 = 0.0;
  std::optional<double> c3;
  std::optional<double> c4;
  std::optional<double> upper_bound;

  bool bounded_branch() const { return upper_bound.has_value(); }
  bool growth_branch() const { return c3.has_value() && c4.has_value(); }
};

struct TestBox {
  Vector lower;
  Vector upper;
  int grid_per_axis = 100;

  void validate(int dim) const;
};

class Objective {
 public:
  using EvalFn = std::function<double(PointRef)>;
  using GradFn = std::function<Vector(PointRef)>;

  struct Definition {
    std::string name;
    int dim = 0;
    EvalFn eval;
    GradFn grad;
    std::optional<Vector> minimizer;
    RegularityConstants constants;
    TestBox box;
    nlohmann::json parameters = nlohmann::json::object();
  };

  explicit Objective(Definition def);

  int dim() const { return def_->dim; }
  const std::string& name() const { return def_->name; }
  double eval(PointRef x) const;
  double operator()(PointRef x) const { return eval(x); }
  bool has_grad() const { return static_cast<bool>(def_->grad); }
  Vector grad(PointRef x) const;

  const std::optional<Vector>& minimizer() const { return def_->minimizer; }
  /// E(x*); throws if no minimizer is registered.
  double minimum_value() const;
  const RegularityConstants& constants() const { return def_->constants; }
  const TestBox& box() const { return def_->box; }
  /// Formula parameters, as exported for external plotting.
  const nlohmann::json& parameters() const { return def_->parameters; }

  /// Copy with replaced constants (used to test mislabeled metadata).
  Objective with_constants(const RegularityConstants& constants) const;

 private:
  std::shared_ptr<const Definition> def_;
};

/// Objective values of every row of `points`.
Eigen::VectorXd evaluate_rows(const Objective& obj, const PointMatrix& points);

/// Parameters of the canyon family
///   E = A d^2 (sqrt(1 + (g/d)^2) - 1) + tilt(rho) + a (1 - cos(w x1) cos(w x2)),
/// g = x2 - v(x1), rho = sqrt(|x|^2 + eps^2) - eps, and tilt a softplus blend
/// of slope s_inner (rho < r_plateau) and s_outer (rho > r_plateau).
struct CanyonShape {
  int degree = 3;
  std::vector<double> valley;  // v(t) = sum_j valley[j] t^j
  double wall = 10.0;
  double wall_width = 0.35;
  double slope_inner = 4.0;
  double slope_outer = 0.3;
  double plateau_radius = 8.0;
  double blend_width = 1.0;
  double smoothing = 0.5;
  TestBox box;
  // Constants of the oscillation-free part, by sampled maximization over box.
  double base_lambda = 0.0;
  double base_lipschitz = 0.0;
  double base_c1 = 0.0;
  double base_c2 = 0.0;
  double base_upper = 0.0;
};

CanyonShape canyon_shape(int degree);

inline constexpr double kCanyonAmplitude = 1.0;
inline constexpr double kCanyonFrequency = 1.5;

Objective canyon_objective(int degree, double oscillation_amplitude = kCanyonAmplitude,
                           double oscillation_frequency = kCanyonFrequency);
Objective rastrigin_objective(int dim);
Objective quadratic_objective(int dim, double curvature);

/// "canyon3", "canyon2", "rastrigin-<d>", "quadratic-<d>" (curvature 1).
Objective make_objective(const std::string& name);
std::vector<std::string> registered_objective_names();

struct AssumptionCheck {
  std::string name;
  bool passed = true;
  std::size_t samples = 0;
  double max_excess = -std::numeric_limits<double>::infinity();  // max(lhs - rhs)
  double max_ratio = 0.0;                                        // max(lhs / rhs), rhs > 0
  Vector witness;
  Vector witness_other;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  bool all_passed() const;
  const AssumptionCheck& check(const std::string& name) const;
};

/// Monte Carlo spot checks of the registered constants: minimizer on the box
/// grid, local Lipschitz (c1), growth (c2), the declared growth branch,
/// semi-convexity, and L-smoothness when declared.
AssumptionReport validate_assumptions(const Objective& obj, const TestBox& box,
                                      std::size_t samples, std::uint64_t seed);

nlohmann::json to_json(const AssumptionReport& report);
nlohmann::json to_json(const RegularityConstants& constants);

/// Central finite-difference gradient.
Vector finite_difference_gradient(const Objective& obj, PointRef x, double h = 1e-6);

}  // namespace cbo
