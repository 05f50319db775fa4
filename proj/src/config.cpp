#include "cbo/config.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace cbo {
namespace {

double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("setting '" + key + "': expected a number, got '" + text + "'");
  }
  if (used != text.size()) throw InvalidArgument("setting '" + key + "': trailing characters in '" + text + "'");
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw InvalidArgument("setting '" + key + "': expected an integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw InvalidArgument("setting '" + key + "': expected true/false, got '" + text + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string ConfigIssues::joined_errors() const {
  std::string out;
  for (const auto& e : errors) {
    if (!out.empty()) out += "; ";
    out += e;
  }
  return out;
}

double coupled_sigma_tilde(double tau, double alpha) {
  require(tau > 0.0 && alpha > 0.0, "coupling needs tau > 0 and alpha > 0");
  return std::sqrt(tau / (2.0 * alpha));
}

double alpha0(double tau, int dim) {
  require(tau > 0.0, "alpha0 needs tau > 0");
  require(dim >= 1, "alpha0 needs a positive dimension");
  const double d = dim;
  return (d * std::log(2.0) + std::log1p(d) + 2.0 * std::lgamma(d / 2.0 + 1.0)) / tau;
}

ConfigIssues check_config(const SchemeConfig& c, std::optional<double> lambda_semiconvex) {
  ConfigIssues out;
  auto positive = [&](double v, const char* name) {
    if (!(std::isfinite(v) && v > 0.0)) out.errors.push_back(std::string(name) + " must be positive and finite");
  };
  positive(c.dt, "dt");
  positive(c.lambda, "lambda");
  positive(c.alpha, "alpha");
  positive(c.init_std, "init_std");
  if (!(std::isfinite(c.sigma) && c.sigma >= 0.0)) out.errors.push_back("sigma must be nonnegative and finite");
  if (c.n_particles < 1) out.errors.push_back("n_particles must be positive");
  if (c.n_steps < 1) out.errors.push_back("n_steps must be positive");
  if (c.init_mean.size() < 1) out.errors.push_back("init_mean must have positive dimension");
  else if (!c.init_mean.allFinite()) out.errors.push_back("init_mean must be finite");
  if (c.sigma_tilde && !(std::isfinite(*c.sigma_tilde) && *c.sigma_tilde >= 0.0))
    out.errors.push_back("sigma_tilde must be nonnegative and finite");

  // A relative slack keeps lambda = 1/dt admissible after rounding.
  if (std::isfinite(c.dt * c.lambda) && c.dt * c.lambda > 1.0 + 1e-12)
    out.errors.push_back("drift overshoot: dt*lambda = " + fmt(c.dt * c.lambda) + " exceeds 1");

  if (c.tau) {
    const double tau = *c.tau;
    positive(tau, "tau");
    if (lambda_semiconvex && *lambda_semiconvex < 0.0 && tau > 0.0) {
      const double cap = 1.0 / (-2.0 * *lambda_semiconvex);
      if (!(tau < cap))
        out.errors.push_back("tau = " + fmt(tau) + " violates tau < 1/(-2 Lambda) = " + fmt(cap));
    }
    const int d = c.dim();
    if (d >= 2 && tau > 0.0 && c.alpha > 0.0) {
      const double guide = d * std::log(static_cast<double>(d)) / tau;
      if (c.alpha < guide)
        out.warnings.push_back("alpha = " + fmt(c.alpha) + " is below the guidance (1/tau) d log d = " + fmt(guide));
    }
  }
  if (c.couple_sigma_tilde) {
    if (!c.tau || !c.sigma_tilde) {
      out.errors.push_back("coupling requested but tau or sigma_tilde is unset");
    } else if (*c.tau > 0.0 && c.alpha > 0.0) {
      const double want = *c.tau / (2.0 * c.alpha);
      const double have = *c.sigma_tilde * *c.sigma_tilde;
      if (std::abs(have - want) > 1e-12 * want)
        out.errors.push_back("coupling requires sigma_tilde^2 = tau/(2 alpha) = " + fmt(want) + ", got " + fmt(have));
    }
  }
  return out;
}

void require_valid(const SchemeConfig& config, std::optional<double> lambda_semiconvex) {
  const ConfigIssues issues = check_config(config, lambda_semiconvex);
  if (!issues.ok()) throw InvalidArgument("invalid config: " + issues.joined_errors());
}

bool apply_setting(SchemeConfig& c, const std::string& key, const std::string& value) {
  if (key == "dt") c.dt = parse_double(key, value);
  else if (key == "lambda") c.lambda = parse_double(key, value);
  else if (key == "sigma") c.sigma = parse_double(key, value);
  else if (key == "alpha") c.alpha = parse_double(key, value);
  else if (key == "n_particles") c.n_particles = static_cast<int>(parse_integer(key, value));
  else if (key == "n_steps") c.n_steps = static_cast<int>(parse_integer(key, value));
  else if (key == "tau") c.tau = parse_double(key, value);
  else if (key == "sigma_tilde") {
    if (value == "coupled") {
      c.couple_sigma_tilde = true;
      c.sigma_tilde = std::numeric_limits<double>::quiet_NaN();
    } else {
      c.sigma_tilde = parse_double(key, value);
    }
  } else if (key == "init_mean") {
    std::vector<double> parts;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(parse_double(key, item));
    if (parts.empty()) throw InvalidArgument("setting 'init_mean': empty list");
    c.init_mean = Eigen::Map<const Vector>(parts.data(), static_cast<Eigen::Index>(parts.size()));
  } else if (key == "init_std") c.init_std = parse_double(key, value);
  else if (key == "seed") {
    const long long s = parse_integer(key, value);
    if (s < 0) throw InvalidArgument("setting 'seed': must be nonnegative");
    c.seed = static_cast<std::uint64_t>(s);
  } else if (key == "couple_sigma_tilde") c.couple_sigma_tilde = parse_bool(key, value);
  else return false;
  return true;
}

void resolve_coupling(SchemeConfig& c) {
  if (c.sigma_tilde && std::isnan(*c.sigma_tilde)) {
    if (!c.tau) throw InvalidArgument("sigma_tilde = coupled needs tau");
    c.sigma_tilde = coupled_sigma_tilde(*c.tau, c.alpha);
  }
}

std::string describe(const SchemeConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "dt = " << c.dt << "\nlambda = " << c.lambda << "\nsigma = " << c.sigma << "\nalpha = " << c.alpha
     << "\nn_particles = " << c.n_particles << "\nn_steps = " << c.n_steps;
  if (c.tau) os << "\ntau = " << *c.tau;
  if (c.sigma_tilde) os << "\nsigma_tilde = " << *c.sigma_tilde;
  os << "\ninit_mean = ";
  for (Eigen::Index j = 0; j < c.init_mean.size(); ++j) os << (j ? "," : "") << c.init_mean[j];
  os << "\ninit_std = " << c.init_std << "\nseed = " << c.seed
     << "\ncouple_sigma_tilde = " << (c.couple_sigma_tilde ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace cbo
