#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbo/types.hpp"

namespace cbo {

struct SchemeConfig {
  double dt = 0.1;
  double lambda = 1.0;
  double sigma = 1.6;
  double alpha = 100.0;
  int n_particles = 200;
  int n_steps = 250;
  std::optional<double> tau;
  std::optional<double> sigma_tilde;
  Vector init_mean = Vector::Constant(2, 8.0);
  double init_std = 0.70710678118654757;  // covariance 0.5 Id
  std::uint64_t seed = 0;
  // Request sigma_tilde^2 = tau / (2 alpha).
  bool couple_sigma_tilde = false;

  int dim() const { return static_cast<int>(init_mean.size()); }
};

struct ConfigIssues {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
  std::string joined_errors() const;
};

/// Checks every invariant of `config`. `lambda_semiconvex` (from the
/// objective) enables the tau bound for nonconvex objectives.
ConfigIssues check_config(const SchemeConfig& config, std::optional<double> lambda_semiconvex = std::nullopt);

/// Throws InvalidArgument listing all errors.
void require_valid(const SchemeConfig& config, std::optional<double> lambda_semiconvex = std::nullopt);

/// sigma_tilde with sigma_tilde^2 = tau / (2 alpha).
double coupled_sigma_tilde(double tau, double alpha);

/// alpha_0(tau) = (d log 2 + log(1 + d) + 2 log Gamma(d/2 + 1)) / tau.
double alpha0(double tau, int dim);

/// Applies one `key=value` setting. Keys: dt, lambda, sigma, alpha,
/// n_particles, n_steps, tau, sigma_tilde (number or "coupled"), init_mean
/// (comma list), init_std, seed, couple_sigma_tilde. Returns false for an
/// unknown key; throws InvalidArgument on a malformed value.
bool apply_setting(SchemeConfig& config, const std::string& key, const std::string& value);

/// Resolves sigma_tilde = "coupled" after all settings are applied.
void resolve_coupling(SchemeConfig& config);

std::string describe(const SchemeConfig& config);

}  // namespace cbo
