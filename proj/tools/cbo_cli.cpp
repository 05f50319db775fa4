#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "cbo/harness.hpp"
#include "cbo/parallel.hpp"

namespace {

struct CommonFlags {
  std::string preset;
  std::string objective;
  std::uint64_t seed = 0;
  int runs = 0;
  std::string out = "out";
  std::vector<std::string> settings;
  std::string config_file;
  unsigned threads = 0;
};

void add_common(CLI::App* app, CommonFlags& f, bool with_preset) {
  if (with_preset) app->add_option("--preset", f.preset, "experiment preset");
  app->add_option("--objective", f.objective, "objective name (canyon3, canyon2, rastrigin-<d>, quadratic-<d>)");
  app->add_option("--seed", f.seed, "base seed; run i uses seed + i");
  app->add_option("--runs", f.runs, "number of seeds (0: preset default)");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--set", f.settings, "override key=value")->allow_extra_args(false);
  app->add_option("--config", f.config_file, "key = value config file");
  app->add_option("--threads", f.threads, "worker threads (0: hardware concurrency)");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cbo::ValidationError({"cannot read config file '" + path + "'"});
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

cbo::ExperimentSpec build_spec(const CommonFlags& f, const std::string& default_preset) {
  cbo::ExperimentSpec spec;
  spec.preset = default_preset;
  if (!f.config_file.empty()) cbo::merge_config_text(spec, read_file(f.config_file));
  if (!f.preset.empty()) spec.preset = f.preset;
  if (!f.objective.empty()) spec.objective = f.objective;
  if (f.runs != 0) spec.runs = f.runs;
  if (f.seed != 0) spec.base_seed = f.seed;
  if (f.out != "out" || f.config_file.empty()) spec.output_dir = f.out;
  std::vector<std::string> errors;
  for (const auto& s : f.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      errors.push_back("--set expects key=value, got '" + s + "'");
      continue;
    }
    spec.overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (!errors.empty()) throw cbo::ValidationError(errors);
  return spec;
}

unsigned thread_count(unsigned requested) {
  return requested > 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
}

int report_validation(const cbo::ValidationError& e) {
  std::cerr << "invalid configuration:\n";
  for (const auto& msg : e.errors()) std::cerr << "  - " << msg << "\n";
  return 1;
}

int run_spec(const cbo::ExperimentSpec& spec) {
  const cbo::Manifest m = cbo::run_experiment(spec);
  for (const auto& w : m.summary.value("warnings", nlohmann::json::array())) std::cerr << "warning: " << w.get<std::string>() << "\n";
  std::cout << "wrote " << m.files.size() + 1 << " files to " << m.output_dir << "\n";
  if (m.summary.contains("success_rate"))
    std::cout << "success_rate " << m.summary["success_rate"].get<double>() << "\n";
  if (m.summary.contains("variants"))
    for (const auto& v : m.summary["variants"])
      std::cout << v["label"].get<std::string>() << " success_rate " << v["success_rate"].get<double>() << "\n";
  if (m.summary.contains("scaling"))
    std::cout << "fitted_slope " << m.summary["scaling"]["fitted_slope"].get<double>() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus-based optimization experiments"};
  app.require_subcommand(1);

  CommonFlags run_flags, dec_flags, scal_flags, val_flags;
  std::string axis;
  auto* run = app.add_subcommand("run", "run a figure preset or a custom scheme");
  add_common(run, run_flags, true);
  auto* dec = app.add_subcommand("decompose", "coupled CBO/CH/implicit-CH runs with residual decomposition");
  add_common(dec, dec_flags, true);
  auto* scal = app.add_subcommand("scaling", "parameter-scaling sweep");
  add_common(scal, scal_flags, true);
  scal->add_option("--axis", axis, "n_particles, lambda_gap, sigma_sqrt_dt or tau");
  auto* val = app.add_subcommand("validate", "check a configuration without running it");
  add_common(val, val_flags, true);
  std::string positional_config;
  val->add_option("file", positional_config, "config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      cbo::ScopedWorkerThreads t(thread_count(run_flags.threads));
      return run_spec(build_spec(run_flags, "fig1"));
    }
    if (*dec) {
      cbo::ScopedWorkerThreads t(thread_count(dec_flags.threads));
      return run_spec(build_spec(dec_flags, "decompose"));
    }
    if (*scal) {
      cbo::ScopedWorkerThreads t(thread_count(scal_flags.threads));
      if (!axis.empty()) scal_flags.preset = "scaling-" + axis;
      cbo::ExperimentSpec spec = build_spec(scal_flags, "scaling-n_particles");
      if (spec.preset.rfind("scaling-", 0) != 0)
        throw cbo::ValidationError({"scaling needs a scaling-<axis> preset"});
      return run_spec(spec);
    }
    if (*val) {
      if (val_flags.config_file.empty()) val_flags.config_file = positional_config;
      const cbo::ExperimentSpec spec = build_spec(val_flags, "fig1");
      const cbo::ExperimentPlan plan = cbo::resolve_plan(spec);
      nlohmann::json out = {{"preset", plan.preset}, {"warnings", plan.warnings}};
      nlohmann::json variants = nlohmann::json::array();
      for (const auto& v : plan.variants)
        variants.push_back({{"label", v.label}, {"scheme", cbo::scheme_name(v.scheme)}, {"objective", v.objective},
                            {"config", cbo::to_json(v.config)}});
      out["variants"] = variants;
      std::cout << out.dump(2) << "\n";
      for (const auto& w : plan.warnings) std::cerr << "warning: " << w << "\n";
      return 0;
    }
  } catch (const cbo::ValidationError& e) {
    return report_validation(e);
  } catch (const cbo::InvalidArgument& e) {
    std::cerr << "invalid configuration:\n  - " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
