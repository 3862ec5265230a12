#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ltcalc/diffusion.hpp"
#include "ltcalc/functions.hpp"
#include "ltcalc/ito.hpp"

namespace ltc {

struct ModelConfig {
  std::string kind = "bm";  // bm | ou | custom
  double theta = 1.0;
  double sigma = 1.0;
  double x0 = 0.0;
  std::optional<TabulatedCoefficients> table;  // required for custom

  bool operator==(const ModelConfig&) const = default;
};

struct SimulationConfig {
  int n = 12;
  std::size_t n_paths = 2000;
  std::uint64_t seed = 0;

  bool operator==(const SimulationConfig&) const = default;
};

struct GridConfig {
  double x_min = -6.0;
  double x_max = 6.0;
  double dx = 0.01;
  double epsilon = 0.05;

  bool operator==(const GridConfig&) const = default;
};

struct FunctionTable {
  std::vector<double> x;
  std::vector<double> t;
  std::vector<std::vector<double>> values;  // [x][t]

  bool operator==(const FunctionTable&) const = default;
};

struct FunctionConfig {
  std::string f = "x";          // one | x | sgn | sin
  std::string F = "quadratic";  // linear | quadratic | abs | call(K) | sin | tsin | custom-tabulated
  std::optional<FunctionTable> table;  // required for custom-tabulated

  bool operator==(const FunctionConfig&) const = default;
};

struct ExperimentConfig {
  std::string experiment;
  ModelConfig model;
  SimulationConfig simulation;
  GridConfig grid;
  FunctionConfig function;
  double t = 1.0;
  std::string reversal_mode = "resimulate";
  std::string local_time = "crossing";  // crossing | occupation
  bool diagnostics = false;
  // Ordered sweep axes; keys are dotted scalar paths such as "simulation.n".
  std::vector<std::pair<std::string, std::vector<double>>> sweep;

  bool operator==(const ExperimentConfig&) const = default;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"theorem32", "ito",   "tanaka",     "reversal",
                                                 "norms",     "envelopes", "covariation"};
  return names;
}

// Strict parsing: unknown keys, non-finite numbers, a missing seed or an
// inverted x range raise ConfigurationError.
ExperimentConfig parse_config(const nlohmann::ordered_json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const ExperimentConfig& config);

void validate(const ExperimentConfig& config);

// Sets a scalar field addressed by a dotted key.
void set_scalar(ExperimentConfig& config, const std::string& key, double value);

// Cartesian product of the sweep axes, first axis outermost. A config
// without a sweep expands to itself.
std::vector<ExperimentConfig> expand_sweep(const ExperimentConfig& config);

DiffusionModel build_model(const ModelConfig& config);
TimeSpaceFunction build_integrand(const std::string& name);
TestFunction build_test_function(const FunctionConfig& config);

// ---------------------------------------------------------------------------

struct ReportRow {
  std::string experiment;
  double estimate = 0.0;
  double reference = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;
  double mc_stderr = 0.0;
  int n = 0;
  std::size_t n_paths = 0;
  double dt = 0.0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;
  bool pass = true;  // outcome of the experiment's check; not emitted
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  bool all_pass() const;
};

inline constexpr const char* kReportHeader =
    "experiment,estimate,reference,abs_error,rel_error,mc_stderr,n,n_paths,dt,epsilon,seed,wall_time";

// Fills abs_error and rel_error = abs_error / max(|reference|, 1e-12).
void finalize_errors(ReportRow& row);

void write_report(const ExperimentReport& report, std::ostream& out);
// Throws IoError when the file cannot be written.
void emit_report(const ExperimentReport& report, const std::filesystem::path& path);

struct RunOptions {
  unsigned threads = 1;
  bool dump_paths = false;
  // Stem for auxiliary outputs (path, term and field dumps); empty disables them.
  std::filesystem::path artifact_stem;
};

// Runs one sweep point.
ReportRow run_experiment(const ExperimentConfig& config, const RunOptions& options = {},
                         std::size_t sweep_index = 0);

// Runs every sweep point in order.
ExperimentReport run(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace ltc
