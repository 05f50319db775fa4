#include "cbo/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <openssl/evp.h>

#include "cbo/analysis.hpp"
#include "cbo/hopping_prox.hpp"
#include "cbo/objectives.hpp"
#include "cbo/parallel.hpp"

namespace cbo {
namespace fs = std::filesystem;

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(trim(item), &used));
    } catch (const std::exception&) {
      throw InvalidArgument("setting '" + key + "': bad list entry '" + item + "'");
    }
  }
  return out;
}

SchemeConfig fig1_config() {
  SchemeConfig c;
  c.dt = 0.1;
  c.lambda = 1.0;
  c.sigma = 1.6;
  c.alpha = 100.0;
  c.n_particles = 200;
  c.n_steps = 250;
  c.init_mean = Vector::Constant(2, 8.0);
  c.init_std = std::sqrt(0.5);
  return c;
}

Variant cbo_variant(const std::string& objective, const SchemeConfig& c) {
  Variant v;
  v.scheme = Scheme::kCbo;
  v.objective = objective;
  v.config = c;
  v.success_radius = 0.5;
  return v;
}

Variant ch_variant(const std::string& objective, SchemeConfig c, double width, std::string label = "") {
  Variant v;
  v.label = std::move(label);
  v.scheme = Scheme::kCh;
  v.objective = objective;
  c.sigma_tilde = width;
  v.config = c;
  v.success_radius = 0.5;
  return v;
}

Variant gd_variant(const std::string& objective, SchemeConfig c) {
  Variant v;
  v.scheme = Scheme::kGd;
  v.objective = objective;
  c.n_steps = 10000;
  c.init_std = 0.2;
  v.config = c;
  v.gd_step = 0.01;
  v.success_radius = 0.5;
  return v;
}

Variant langevin_variant(const std::string& objective, SchemeConfig c) {
  Variant v;
  v.scheme = Scheme::kLangevin;
  v.objective = objective;
  c.dt = 0.001;
  c.n_steps = 10000;
  v.config = c;
  v.schedule = {AnnealSchedule::Kind::kLog, 0.02};
  v.success_radius = 1.0;
  return v;
}

struct PresetDefaults {
  PresetKind kind = PresetKind::kTrajectories;
  std::vector<Variant> variants;
  int runs = 50;
  std::string axis;
  std::vector<double> grid;
  int sweep_seeds = 20;
};

const std::vector<std::string> kAxes = {"n_particles", "lambda_gap", "sigma_sqrt_dt", "tau"};

PresetDefaults preset_defaults(const std::string& preset) {
  PresetDefaults p;
  const SchemeConfig base = fig1_config();
  if (preset == "fig1") {
    p.variants = {cbo_variant("canyon3", base)};
  } else if (preset == "fig2a") {
    p.variants = {ch_variant("canyon3", base, 0.6)};
  } else if (preset == "fig2b") {
    p.variants = {gd_variant("canyon3", base)};
    p.runs = 9;
  } else if (preset == "fig2c") {
    p.variants = {langevin_variant("canyon3", base)};
  } else if (preset == "fig3-sweep") {
    for (double w : {0.4, 0.6, 0.7}) {
      char label[32];
      std::snprintf(label, sizeof label, "sigma%.1f", w);
      p.variants.push_back(ch_variant("canyon3", base, w, label));
    }
  } else if (preset == "fig4") {
    SchemeConfig c = base;
    c.init_mean = (Vector(2) << 5.0, -1.0).finished();
    p.variants = {cbo_variant("canyon2", c), ch_variant("canyon2", c, 0.6), gd_variant("canyon2", c),
                  langevin_variant("canyon2", c)};
    p.variants[0].label = "cbo";
    p.variants[1].label = "ch";
    p.variants[2].label = "gd";
    p.variants[3].label = "langevin";
  } else if (preset == "decompose") {
    p.kind = PresetKind::kDecompose;
    SchemeConfig c = base;
    c.tau = 0.05;
    c.sigma_tilde = coupled_sigma_tilde(*c.tau, c.alpha);
    c.couple_sigma_tilde = true;
    p.variants = {cbo_variant("canyon3", c)};
    p.runs = 10;
  } else if (preset.rfind("scaling-", 0) == 0) {
    p.kind = PresetKind::kScaling;
    p.axis = preset.substr(8);
    SchemeConfig c;
    c.dt = 0.1;
    c.alpha = 100.0;
    c.init_mean = Vector::Zero(2);
    if (p.axis == "n_particles") {
      c.lambda = 10.0;
      c.sigma = 0.05;
      c.sigma_tilde = 0.1;
      c.init_std = 1e-6;
      c.n_steps = 50;
      p.grid = {25, 100, 400, 1600};
    } else if (p.axis == "lambda_gap") {
      c.lambda = 10.0;
      c.sigma = 0.0;
      c.alpha = 1.0;
      c.n_particles = 10000;
      c.n_steps = 20;
      c.init_mean = (Vector(2) << 1.0, 1.0).finished();
      c.init_std = 0.5;
      p.grid = {0.08, 0.1, 0.2, 0.4, 0.8};
    } else if (p.axis == "sigma_sqrt_dt") {
      c.lambda = 10.0;
      c.alpha = 1.0;
      c.n_particles = 200;
      c.n_steps = 50;
      c.init_std = 0.5;
      p.grid = {0.01, 0.02, 0.05, 0.1, 0.2};
    } else if (p.axis == "tau") {
      c.n_particles = 10000;
      c.n_steps = 20;
      c.init_mean = (Vector(2) << 1.5, 1.0).finished();
      c.init_std = 1e-3;
      c.tau = 0.05;
      p.grid = {0.0125, 0.025, 0.05, 0.1, 0.2};
    } else {
      throw ValidationError({"unknown scaling axis '" + p.axis + "' (expected one of " + join(kAxes, ", ") + ")"});
    }
    Variant v;
    v.scheme = Scheme::kCbo;
    v.objective = "quadratic-2";
    v.config = c;
    p.variants = {v};
    p.runs = 1;
  } else if (preset == "custom") {
    p.variants = {cbo_variant("canyon3", base)};
    p.runs = 1;
  } else {
    throw ValidationError({"unknown preset '" + preset + "'"});
  }
  return p;
}

std::optional<Objective> try_objective(const std::string& name, std::vector<std::string>& errors) {
  try {
    return make_objective(name);
  } catch (const InvalidArgument& e) {
    errors.push_back(e.what());
    return std::nullopt;
  }
}

std::string variant_prefix(const ExperimentPlan& plan, const Variant& v) {
  return v.label.empty() ? plan.preset : plan.preset + "-" + v.label;
}

}  // namespace

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kCbo: return "cbo";
    case Scheme::kCh: return "ch";
    case Scheme::kImplicitCh: return "implicit_ch";
    case Scheme::kMms: return "mms";
    case Scheme::kGd: return "gd";
    case Scheme::kLangevin: return "langevin";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  for (Scheme s : {Scheme::kCbo, Scheme::kCh, Scheme::kImplicitCh, Scheme::kMms, Scheme::kGd, Scheme::kLangevin})
    if (scheme_name(s) == name) return s;
  throw InvalidArgument("unknown scheme '" + name + "'");
}

ValidationError::ValidationError(const std::vector<std::string>& errors)
    : InvalidArgument(join(errors, "; ")), errors_(errors) {}

std::vector<std::string> preset_names() {
  std::vector<std::string> out = {"fig1", "fig2a", "fig2b", "fig2c", "fig3-sweep", "fig4", "decompose", "custom"};
  for (const auto& a : kAxes) out.push_back("scaling-" + a);
  return out;
}

ExperimentPlan resolve_plan(const ExperimentSpec& spec) {
  PresetDefaults d = preset_defaults(spec.preset);
  ExperimentPlan plan;
  plan.preset = spec.preset;
  plan.kind = d.kind;
  plan.variants = std::move(d.variants);
  plan.runs = spec.runs > 0 ? spec.runs : d.runs;
  plan.base_seed = spec.base_seed;
  plan.axis = d.axis;
  plan.grid = d.grid;
  plan.sweep_seeds = d.sweep_seeds;

  std::vector<std::string> errors;
  if (spec.runs < 0) errors.push_back("runs must be positive");
  if (!spec.objective.empty())
    for (auto& v : plan.variants) v.objective = spec.objective;

  for (const auto& [key, value] : spec.overrides) {
    try {
      if (key == "scheme") {
        if (plan.preset != "custom") throw InvalidArgument("'scheme' can only be set for the custom preset");
        for (auto& v : plan.variants) v.scheme = parse_scheme(value);
      } else if (key == "success_radius") {
        const double r = std::stod(value);
        if (!(r > 0.0)) throw InvalidArgument("success_radius must be positive");
        for (auto& v : plan.variants) v.success_radius = r;
      } else if (key == "gd_step") {
        const double h = std::stod(value);
        if (!(h > 0.0)) throw InvalidArgument("gd_step must be positive");
        for (auto& v : plan.variants) v.gd_step = h;
      } else if (key == "schedule") {
        for (auto& v : plan.variants) v.schedule = AnnealSchedule::parse(value, v.schedule.scale);
      } else if (key == "schedule_scale") {
        const double s = std::stod(value);
        for (auto& v : plan.variants) v.schedule = AnnealSchedule::parse(v.schedule.kind_name(), s);
      } else if (key == "grid") {
        plan.grid = parse_list(key, value);
      } else if (key == "sweep_seeds") {
        plan.sweep_seeds = std::stoi(value);
      } else {
        bool known = true;
        for (auto& v : plan.variants) known = apply_setting(v.config, key, value) && known;
        if (!known) throw InvalidArgument("unknown setting '" + key + "'");
      }
    } catch (const InvalidArgument& e) {
      errors.push_back(e.what());
    } catch (const std::exception&) {
      errors.push_back("setting '" + key + "': malformed value '" + value + "'");
    }
  }

  for (auto& v : plan.variants) {
    const std::string where = v.label.empty() ? "" : "[" + v.label + "] ";
    try {
      resolve_coupling(v.config);
    } catch (const InvalidArgument& e) {
      errors.push_back(where + e.what());
      continue;
    }
    const auto obj = try_objective(v.objective, errors);
    if (!obj) continue;
    if (obj->dim() != v.config.dim())
      errors.push_back(where + "init_mean has dimension " + std::to_string(v.config.dim()) + " but objective " +
                       v.objective + " has dimension " + std::to_string(obj->dim()));
    const ConfigIssues issues = check_config(v.config, obj->constants().lambda_semiconvex);
    for (const auto& e : issues.errors) errors.push_back(where + e);
    for (const auto& w : issues.warnings) plan.warnings.push_back(where + w);
    if (v.scheme == Scheme::kCh && !v.config.sigma_tilde) errors.push_back(where + "CH needs sigma_tilde");
    if ((v.scheme == Scheme::kImplicitCh || v.scheme == Scheme::kMms) && !v.config.tau)
      errors.push_back(where + scheme_name(v.scheme) + " needs tau");
    if (v.scheme == Scheme::kImplicitCh && !v.config.sigma_tilde) errors.push_back(where + "implicit CH needs sigma_tilde");
    if ((v.scheme == Scheme::kGd || v.scheme == Scheme::kLangevin || v.scheme == Scheme::kMms ||
         v.scheme == Scheme::kImplicitCh) && !obj->has_grad())
      errors.push_back(where + scheme_name(v.scheme) + " needs a gradient");
    if (plan.kind == PresetKind::kDecompose && (!v.config.tau || !v.config.sigma_tilde))
      errors.push_back(where + "decompose needs tau and sigma_tilde");
  }
  if (plan.kind == PresetKind::kScaling) {
    if (plan.grid.size() < 4) errors.push_back("scaling grid needs at least 4 values");
    for (std::size_t i = 0; i + 1 < plan.grid.size(); ++i)
      if (!(plan.grid[i] < plan.grid[i + 1])) errors.push_back("scaling grid must be strictly increasing");
    if (!plan.grid.empty() && !(plan.grid.front() > 0.0)) errors.push_back("scaling grid values must be positive");
    if (plan.grid.size() >= 2 && plan.grid.front() > 0.0 && plan.grid.back() / plan.grid.front() < 10.0 - 1e-9)
      errors.push_back("scaling grid must span at least one decade");
    if (plan.sweep_seeds < 1) errors.push_back("sweep_seeds must be positive");
  }
  if (!errors.empty()) throw ValidationError(errors);
  return plan;
}

void merge_config_text(ExperimentSpec& spec, const std::string& raw) {
  std::vector<std::string> errors;
  std::vector<std::pair<std::string, std::string>> settings;
  std::istringstream in(raw);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      errors.push_back("line " + std::to_string(lineno) + ": empty key or value");
      continue;
    }
    try {
      if (key == "preset") spec.preset = value;
      else if (key == "objective") spec.objective = value;
      else if (key == "runs") spec.runs = std::stoi(value);
      else if (key == "base_seed") spec.base_seed = std::stoull(value);
      else if (key == "output_dir") spec.output_dir = value;
      else settings.emplace_back(key, value);
    } catch (const std::exception&) {
      errors.push_back("line " + std::to_string(lineno) + ": malformed value for '" + key + "'");
    }
  }
  if (!errors.empty()) throw ValidationError(errors);
  spec.overrides.insert(spec.overrides.begin(), settings.begin(), settings.end());
}

ConfigValidation validate_config(const std::string& raw) {
  ConfigValidation out;
  try {
    merge_config_text(out.spec, raw);
    const ExperimentPlan plan = resolve_plan(out.spec);
    for (const auto& v : plan.variants) out.configs.push_back(v.config);
    out.warnings = plan.warnings;
    out.ok = true;
  } catch (const ValidationError& e) {
    out.errors = e.errors();
  } catch (const InvalidArgument& e) {
    out.errors = {e.what()};
  }
  return out;
}

// ---------------------------------------------------------------------------
// serialization

std::string trajectory_csv(const RunRecord& rec, const std::vector<double>& values) {
  require(values.size() == static_cast<std::size_t>(rec.iterates.rows()), "objective values do not match iterates");
  std::string out = "k";
  for (Eigen::Index j = 0; j < rec.iterates.cols(); ++j) out += ",x" + std::to_string(j + 1);
  out += ",objective\n";
  for (Eigen::Index k = 0; k < rec.iterates.rows(); ++k) {
    out += std::to_string(k);
    for (Eigen::Index j = 0; j < rec.iterates.cols(); ++j) out += "," + num(rec.iterates(k, j));
    out += "," + num(values[static_cast<std::size_t>(k)]) + "\n";
  }
  return out;
}

std::string trajectory_csv(const RunRecord& rec) {
  return trajectory_csv(rec, std::vector<double>(rec.objective_values.begin(), rec.objective_values.end()));
}

std::pair<PointMatrix, Eigen::VectorXd> parse_trajectory_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "empty trajectory CSV");
  const long cols = std::count(line.begin(), line.end(), ',') + 1;
  require(cols >= 3 && line.rfind("k,", 0) == 0, "bad trajectory CSV header");
  const Eigen::Index d = cols - 2;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) row.push_back(std::strtod(item.c_str(), nullptr));
    require(static_cast<long>(row.size()) == cols, "ragged trajectory CSV row");
    rows.push_back(std::move(row));
  }
  PointMatrix x(static_cast<Eigen::Index>(rows.size()), d);
  Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (Eigen::Index j = 0; j < d; ++j) x(static_cast<Eigen::Index>(k), j) = rows[k][static_cast<std::size_t>(j + 1)];
    v[static_cast<Eigen::Index>(k)] = rows[k].back();
  }
  return {x, v};
}

std::string residual_csv(const ResidualRecord& r) {
  std::string out = "k,g1,g2,g3,g,reconstruction_residual\n";
  for (Eigen::Index i = 0; i < r.steps(); ++i) {
    out += std::to_string(i + 1) + "," + num(r.g1_norm[i]) + "," + num(r.g2_norm[i]) + "," + num(r.g3_norm[i]) + "," +
           num(r.g_norm[i]) + "," + num(r.reconstruction_residual[i]) + "\n";
  }
  return out;
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

nlohmann::json to_json(const SchemeConfig& c) {
  nlohmann::json j = {{"dt", c.dt},
                      {"lambda", c.lambda},
                      {"sigma", c.sigma},
                      {"alpha", c.alpha},
                      {"n_particles", c.n_particles},
                      {"n_steps", c.n_steps},
                      {"init_mean", std::vector<double>(c.init_mean.begin(), c.init_mean.end())},
                      {"init_std", c.init_std},
                      {"seed", c.seed},
                      {"couple_sigma_tilde", c.couple_sigma_tilde}};
  j["tau"] = c.tau ? nlohmann::json(*c.tau) : nlohmann::json();
  j["sigma_tilde"] = c.sigma_tilde ? nlohmann::json(*c.sigma_tilde) : nlohmann::json();
  return j;
}

nlohmann::json objective_export(const std::string& name) {
  const Objective obj = make_objective(name);
  nlohmann::json j = {{"name", obj.name()}, {"dim", obj.dim()}, {"parameters", obj.parameters()},
                      {"constants", to_json(obj.constants())}};
  if (obj.minimizer()) {
    j["minimizer"] = std::vector<double>(obj.minimizer()->begin(), obj.minimizer()->end());
    j["minimum_value"] = obj.minimum_value();
  }
  j["box"] = {{"lower", std::vector<double>(obj.box().lower.begin(), obj.box().lower.end())},
              {"upper", std::vector<double>(obj.box().upper.begin(), obj.box().upper.end())},
              {"grid_per_axis", obj.box().grid_per_axis}};
  return j;
}

// ---------------------------------------------------------------------------
// orchestration

namespace {

struct RunOutcome {
  RunRecord record;
  std::optional<ResidualRecord> residuals;
};

RunOutcome execute(const Variant& v, const Objective& obj, std::uint64_t seed) {
  SchemeConfig c = v.config;
  c.seed = seed;
  RunOutcome out;
  switch (v.scheme) {
    case Scheme::kCbo:
      if (c.tau && c.sigma_tilde && c.couple_sigma_tilde) {
        CoupledTriple t = coupled_triple_run(obj, c);
        out.residuals = decompose_residual(t, obj, *c.tau);
        out.record = std::move(t.cbo);
      } else {
        out.record = cbo_run(obj, c);
      }
      break;
    case Scheme::kCh: out.record = ch_run(obj, c); break;
    case Scheme::kImplicitCh: out.record = implicit_ch_run(obj, c, ch_run(obj, c)); break;
    case Scheme::kMms: out.record = mms_run(obj, c); break;
    case Scheme::kGd: out.record = gd_run(obj, initial_point(c), v.gd_step, c.n_steps); break;
    case Scheme::kLangevin:
      out.record = langevin_run(obj, initial_point(c), c.dt, c.n_steps, v.schedule, seed);
      break;
  }
  return out;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : root_(dir) { fs::create_directories(root_); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(root_ / name, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + (root_ / name).string() + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw std::runtime_error("failed writing " + (root_ / name).string());
    entries_.push_back({name, sha256_hex(content), content.size()});
  }

  std::vector<ManifestEntry>& entries() { return entries_; }
  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::vector<ManifestEntry> entries_;
};

nlohmann::json variant_header(const ExperimentPlan& plan, const Variant& v) {
  nlohmann::json j = {{"label", v.label},
                      {"scheme", scheme_name(v.scheme)},
                      {"objective", v.objective},
                      {"config", to_json(v.config)},
                      {"runs", plan.runs},
                      {"base_seed", plan.base_seed},
                      {"success_radius", v.success_radius}};
  if (v.scheme == Scheme::kGd) j["gd_step"] = v.gd_step;
  if (v.scheme == Scheme::kLangevin)
    j["schedule"] = {{"kind", v.schedule.kind_name()}, {"scale", v.schedule.scale}};
  return j;
}

nlohmann::json run_variant(const ExperimentPlan& plan, const Variant& v, OutputDir& out) {
  const Objective obj = make_objective(v.objective);
  const std::size_t runs = static_cast<std::size_t>(plan.runs);
  std::vector<RunOutcome> outcomes(runs);
  parallel_for(runs, [&](std::size_t i) { outcomes[i] = execute(v, obj, plan.base_seed + i); });

  const Vector& xstar = *obj.minimizer();
  const std::string prefix = variant_prefix(plan, v);
  nlohmann::json summary = variant_header(plan, v);
  std::vector<double> dists, finals_x, grad_norms, residual_medians, residual_max;
  nlohmann::json final_points = nlohmann::json::array();
  std::size_t successes = 0, hits = 0;
  double max_m4 = 0.0, m4_cap = INFINITY;
  std::size_t alarms = 0;
  for (std::size_t i = 0; i < runs; ++i) {
    const RunRecord& rec = outcomes[i].record;
    const std::uint64_t seed = plan.base_seed + i;
    out.write(prefix + "_seed" + std::to_string(seed) + ".csv", trajectory_csv(rec));
    const Vector xf = rec.final_iterate();
    const double dist = (xf - xstar).norm();
    dists.push_back(dist);
    final_points.push_back(std::vector<double>(xf.begin(), xf.end()));
    if (dist <= v.success_radius) ++successes;
    bool hit = false;
    for (Eigen::Index k = 0; k < rec.iterates.rows() && !hit; ++k)
      hit = (rec.iterate(k) - xstar).norm() <= v.success_radius;
    if (hit) ++hits;
    if (obj.has_grad()) grad_norms.push_back(obj.grad(xf).norm());
    if (auto it = rec.diagnostics.find("max_fourth_moment"); it != rec.diagnostics.end())
      max_m4 = std::max(max_m4, it->second);
    if (auto it = rec.diagnostics.find("fourth_moment_cap"); it != rec.diagnostics.end()) m4_cap = std::min(m4_cap, it->second);
    if (auto it = rec.diagnostics.find("fourth_moment_alarm"); it != rec.diagnostics.end() && it->second > 0.0) ++alarms;
    if (outcomes[i].residuals) {
      const ResidualRecord& r = *outcomes[i].residuals;
      out.write(prefix + "_seed" + std::to_string(seed) + "_residuals.csv", residual_csv(r));
      residual_medians.push_back(median_of(std::vector<double>(r.g_norm.begin(), r.g_norm.end())));
      residual_max.push_back(r.max_reconstruction_residual());
    }
  }
  summary["successes"] = successes;
  summary["success_rate"] = static_cast<double>(successes) / static_cast<double>(runs);
  summary["hit_rate"] = static_cast<double>(hits) / static_cast<double>(runs);
  summary["distances_to_minimizer"] = dists;
  summary["median_distance"] = median_of(dists);
  summary["final_points"] = final_points;
  if (!grad_norms.empty()) {
    summary["terminal_gradient_norms"] = grad_norms;
    summary["max_terminal_gradient_norm"] = *std::max_element(grad_norms.begin(), grad_norms.end());
  }
  if (v.scheme == Scheme::kCbo) {
    summary["max_fourth_moment"] = max_m4;
    summary["fourth_moment_cap"] = m4_cap;
    summary["fourth_moment_alarms"] = alarms;
  }
  if (!residual_medians.empty()) {
    summary["residuals"] = {{"median_g_norm_per_run", residual_medians},
                            {"median_g_norm", median_of(residual_medians)},
                            {"max_reconstruction_residual", *std::max_element(residual_max.begin(), residual_max.end())}};
  }
  return summary;
}

}  // namespace

Manifest run_experiment(const ExperimentSpec& spec) {
  const ExperimentPlan plan = resolve_plan(spec);
  OutputDir out(spec.output_dir);
  Manifest manifest;
  manifest.output_dir = spec.output_dir;
  nlohmann::json summary = {{"preset", plan.preset}, {"warnings", plan.warnings}};

  std::vector<std::string> objectives;
  for (const auto& v : plan.variants)
    if (std::find(objectives.begin(), objectives.end(), v.objective) == objectives.end()) objectives.push_back(v.objective);
  for (const auto& name : objectives) out.write("objective_" + name + ".json", objective_export(name).dump(2) + "\n");

  if (plan.kind == PresetKind::kScaling) {
    const Variant& v = plan.variants.front();
    const Objective obj = make_objective(v.objective);
    SchemeConfig base = v.config;
    base.seed = plan.base_seed;
    SweepOptions opt;
    opt.bootstrap_seed = plan.base_seed;
    const ScalingReport rep = scaling_sweep(plan.axis, obj, base, plan.grid, plan.sweep_seeds, opt);
    nlohmann::json j = to_json(rep);
    j["objective"] = v.objective;
    j["config"] = to_json(base);
    j["seeds"] = plan.sweep_seeds;
    out.write(plan.preset + ".json", j.dump(2) + "\n");
    summary["scaling"] = {{"swept_parameter", rep.swept_parameter}, {"fitted_slope", rep.fitted_slope},
                          {"slope_ci", {rep.slope_ci[0], rep.slope_ci[1]}}, {"report", plan.preset + ".json"}};
  } else if (plan.variants.size() == 1 && plan.variants.front().label.empty()) {
    summary.update(run_variant(plan, plan.variants.front(), out));
  } else {
    nlohmann::json subs = nlohmann::json::array();
    for (const auto& v : plan.variants) subs.push_back(run_variant(plan, v, out));
    summary["variants"] = subs;
  }
  out.write(plan.preset + "_summary.json", summary.dump(2) + "\n");

  nlohmann::json files = nlohmann::json::array();
  for (const auto& e : out.entries()) files.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
  const nlohmann::json mj = {{"preset", plan.preset}, {"files", files}};
  std::ofstream mf(out.root() / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!mf) throw std::runtime_error("cannot write manifest.json");
  mf << mj.dump(2) << "\n";
  manifest.files = out.entries();
  manifest.summary = std::move(summary);
  return manifest;
}

}  // namespace cbo
