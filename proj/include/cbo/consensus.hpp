#pragma once

#include "cbo/objectives.hpp"
#include "cbo/types.hpp"

namespace cbo {

/// Normalized Gibbs weights exp(-alpha (E_i - min E)) / sum. alpha = 0 gives
/// uniform weights. Summation runs in ascending index order.
Eigen::VectorXd consensus_weights(const Eigen::VectorXd& values, double alpha);

/// Gibbs-weighted mean of the rows of `points`. alpha = 0 takes the plain mean.
Vector consensus_point(const PointMatrix& points, const Eigen::VectorXd& values, double alpha);

/// -(1/alpha) log((1/N) sum_i exp(-alpha E_i)); alpha = 0 gives the mean.
double gibbs_free_energy(const Eigen::VectorXd& values, double alpha);

struct ConsensusBound {
  double lhs = 0.0;
  double rhs = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  bool satisfied = false;
};

/// |x_alpha|^2 <= b1 + b2 (1/N) sum |X_i|^2 with (b1, b2) chosen by the
/// objective's declared growth branch.
ConsensusBound consensus_bound_check(const PointMatrix& points, const Eigen::VectorXd& values, double alpha,
                                     const Objective& obj);

}  // namespace cbo
