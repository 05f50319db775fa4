#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cbo/analysis.hpp"
#include "cbo/baselines.hpp"
#include "cbo/cbo_engine.hpp"
#include "cbo/config.hpp"

namespace cbo {

enum class Scheme { kCbo, kCh, kImplicitCh, kMms, kGd, kLangevin };

std::string scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);

/// One scheme/objective/config combination of a preset.
struct Variant {
  std::string label;  // empty for single-variant presets
  Scheme scheme = Scheme::kCbo;
  std::string objective;
  SchemeConfig config;
  double success_radius = 0.5;
  double gd_step = 0.01;
  AnnealSchedule schedule;
};

enum class PresetKind { kTrajectories, kDecompose, kScaling };

struct ExperimentPlan {
  std::string preset;
  PresetKind kind = PresetKind::kTrajectories;
  std::vector<Variant> variants;
  int runs = 1;
  std::uint64_t base_seed = 0;
  // Scaling presets.
  std::string axis;
  std::vector<double> grid;
  int sweep_seeds = 20;
  std::vector<std::string> warnings;
};

struct ExperimentSpec {
  std::string preset = "fig1";
  std::string objective;  // empty: preset default
  std::vector<std::pair<std::string, std::string>> overrides;
  int runs = 0;  // 0: preset default
  std::uint64_t base_seed = 0;
  std::string output_dir = "out";
};

/// Raised for spec/config validation failures (CLI exit code 1).
class ValidationError : public InvalidArgument {
 public:
  ValidationError(const std::vector<std::string>& errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

std::vector<std::string> preset_names();

/// Applies preset defaults and overrides and checks every invariant.
/// Throws ValidationError with the aggregated error list.
ExperimentPlan resolve_plan(const ExperimentSpec& spec);

struct ConfigValidation {
  bool ok = false;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  ExperimentSpec spec;
  std::vector<SchemeConfig> configs;
};

/// Parses a key-value text ("key = value" lines, '#' comments). Besides the
/// scheme settings, accepts preset, objective, runs and output_dir.
ConfigValidation validate_config(const std::string& raw);

/// Folds the parsed settings of `raw` into `spec` (file keys first, so
/// command-line overrides appended later win).
void merge_config_text(ExperimentSpec& spec, const std::string& raw);

struct ManifestEntry {
  std::string path;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct Manifest {
  std::string output_dir;
  std::vector<ManifestEntry> files;
  nlohmann::json summary;
};

/// Runs every seed of every variant, writes trajectory CSVs, the summary
/// JSON, the objective parameter export and manifest.json.
Manifest run_experiment(const ExperimentSpec& spec);

// Serialization helpers.
std::string trajectory_csv(const RunRecord& rec, const std::vector<double>& objective_values);
std::string trajectory_csv(const RunRecord& rec);
/// Parses a trajectory CSV back into iterates and objective values.
std::pair<PointMatrix, Eigen::VectorXd> parse_trajectory_csv(const std::string& text);
std::string sha256_hex(const std::string& data);
nlohmann::json objective_export(const std::string& objective_name);
nlohmann::json to_json(const SchemeConfig& config);
/// Columns k,g1,g2,g3,g,reconstruction_residual (norms), k = 1..K.
std::string residual_csv(const ResidualRecord& record);

}  // namespace cbo
