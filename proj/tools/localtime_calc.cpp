// localtime-calc: runs a configured experiment and writes the CSV report.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ltcalc/errors.hpp"
#include "ltcalc/experiment.hpp"

namespace {

enum Exit { kPass = 0, kCheckFailure = 1, kConfigError = 2, kRuntimeError = 3 };

int run_command(const std::string& config_path, const std::string& out_path, unsigned threads,
                bool dump_paths) {
  const ltc::ExperimentConfig config = ltc::load_config(config_path);
  ltc::RunOptions options;
  options.threads = threads;
  options.dump_paths = dump_paths;
  std::filesystem::path stem(out_path);
  stem.replace_extension();
  options.artifact_stem = stem;

  const ltc::ExperimentReport report = ltc::run(config, options);
  ltc::emit_report(report, out_path);
  for (const auto& row : report.rows) {
    std::cerr << row.experiment << " n=" << row.n << " estimate=" << row.estimate
              << " reference=" << row.reference << (row.pass ? "  ok" : "  CHECK FAILED") << '\n';
  }
  return report.all_pass() ? kPass : kCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo verification of local-time integrals for diffusions"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  unsigned threads = 1;
  bool dump_paths = false;
  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_path, "Output CSV report")->required();
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  run->add_flag("--dump-paths", dump_paths, "Also write the first sample path of each sweep point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kConfigError;
  }

  try {
    return run_command(config_path, out_path, threads, dump_paths);
  } catch (const ltc::ConfigurationError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ltc::ResourceCapError& e) {
    std::cerr << "refused: " << e.what() << '\n';
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}
