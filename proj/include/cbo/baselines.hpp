#pragma once

#include <cstdint>
#include <string>

#include "cbo/cbo_engine.hpp"
#include "cbo/objectives.hpp"

namespace cbo {

struct AnnealSchedule {
  enum class Kind { kLog, kConstant };
  Kind kind = Kind::kLog;
  double scale = 0.02;

  /// beta(t) = scale log(t + 1) or scale.
  double beta(double t) const;
  static AnnealSchedule parse(const std::string& kind, double scale);
  std::string kind_name() const { return kind == Kind::kLog ? "log" : "constant"; }
};

/// x_k = x_{k-1} - step grad E(x_{k-1}).
RunRecord gd_run(const Objective& obj, PointRef x0, double step, int n_steps);

/// Euler-Maruyama for dX = -grad E dt + sqrt(2 / beta_t) dB. Step k (0-based)
/// uses beta at t = (k + 1) dt, avoiding the singular beta_0 of the log schedule.
RunRecord langevin_run(const Objective& obj, PointRef x0, double dt, int n_steps, const AnnealSchedule& schedule,
                       std::uint64_t seed);

}  // namespace cbo
