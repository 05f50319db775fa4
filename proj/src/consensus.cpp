#include "cbo/consensus.hpp"

#include <cmath>

namespace cbo {
namespace {

void check_values(const Eigen::VectorXd& values, double alpha) {
  require(values.size() >= 1, "consensus needs at least one particle");
  require(std::isfinite(alpha) && alpha >= 0.0, "alpha must be finite and nonnegative");
  for (Eigen::Index i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i])) throw InvalidArgument("non-finite objective value at particle " + std::to_string(i));
}

void check_points(const PointMatrix& points, const Eigen::VectorXd& values) {
  require(points.rows() == values.size(), "points and values differ in length");
  require(points.cols() >= 1, "points must have positive dimension");
  if (!points.allFinite()) throw InvalidArgument("non-finite particle position");
}

}  // namespace

Eigen::VectorXd consensus_weights(const Eigen::VectorXd& values, double alpha) {
  check_values(values, alpha);
  const Eigen::Index n = values.size();
  Eigen::VectorXd w(n);
  if (alpha == 0.0) {
    w.setConstant(1.0 / static_cast<double>(n));
    return w;
  }
  const double shift = values.minCoeff();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = std::exp(-alpha * (values[i] - shift));
    total += w[i];
  }
  // The minimizing particle contributes exp(0) = 1, so total >= 1.
  if (!(total >= 1.0)) throw NumericalError("consensus weights underflowed");
  w /= total;
  return w;
}

Vector consensus_point(const PointMatrix& points, const Eigen::VectorXd& values, double alpha) {
  check_points(points, values);
  const Eigen::VectorXd w = consensus_weights(values, alpha);
  // Offsets from the best particle, so coincident points are reproduced exactly.
  Eigen::Index ref = 0;
  values.minCoeff(&ref);
  const Vector base = points.row(ref).transpose();
  Vector shift = Vector::Zero(points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) shift += w[i] * (points.row(i).transpose() - base);
  return base + shift;
}

double gibbs_free_energy(const Eigen::VectorXd& values, double alpha) {
  check_values(values, alpha);
  const auto n = static_cast<double>(values.size());
  if (alpha == 0.0) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) sum += values[i];
    return sum / n;
  }
  const double shift = values.minCoeff();
  double total = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) total += std::exp(-alpha * (values[i] - shift));
  return shift - (std::log(total) - std::log(n)) / alpha;
}

ConsensusBound consensus_bound_check(const PointMatrix& points, const Eigen::VectorXd& values, double alpha,
                                     const Objective& obj) {
  check_points(points, values);
  require(alpha > 0.0, "consensus bound needs alpha > 0");
  const RegularityConstants& k = obj.constants();
  ConsensusBound out;
  if (k.bounded_branch()) {
    out.b1 = 0.0;
    out.b2 = std::exp(alpha * (*k.upper_bound - obj.minimum_value()));
  } else if (k.growth_branch()) {
    const double c3 = *k.c3, c4 = *k.c4;
    out.b2 = 2.0 * (k.c2 / c3) * (1.0 + 1.0 / (alpha * c3 * c4 * c4));
    out.b1 = c4 * c4 + out.b2;
  } else {
    throw InvalidArgument("objective " + obj.name() + " declares neither growth branch");
  }
  out.lhs = consensus_point(points, values, alpha).squaredNorm();
  double second_moment = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) second_moment += points.row(i).squaredNorm();
  second_moment /= static_cast<double>(points.rows());
  out.rhs = second_moment > 0.0 ? out.b1 + out.b2 * second_moment : out.b1;
  out.satisfied = out.lhs <= out.rhs;
  return out;
}

}  // namespace cbo
