// Command-line front end: run experiments from config files, validate
// configs, and compare finished runs.
//
// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 I/O error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cals/config.hpp"
#include "cals/errors.hpp"
#include "cals/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

// Environment variable naming the default root for run outputs.
constexpr const char* kOutputRootVar = "CALS_OUTPUT_ROOT";

// Map the active exception onto the documented exit codes. Bad argument
// values from any module count as config errors; everything unexpected is
// reported as a numerical failure rather than swallowed.
int report_error() {
  try {
    throw;
  } catch (const cals::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const cals::io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const cals::numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

std::filesystem::path resolve_out_dir(const std::string& flag_value,
                                      const cals::ExperimentConfig& config,
                                      const std::string& config_path) {
  if (!flag_value.empty()) return flag_value;
  if (!config.output.directory.empty()) return config.output.directory;
  const char* root = std::getenv(kOutputRootVar);
  const std::filesystem::path base = root != nullptr && *root != '\0' ? root : "runs";
  return base / std::filesystem::path(config_path).stem();
}

int cmd_run(const std::string& config_path, const std::string& out_flag,
            const std::vector<std::string>& overrides, bool seed_given, std::uint64_t seed) {
  try {
    cals::ExperimentConfig config = cals::parse_config_file(config_path);
    for (const std::string& spec : overrides) cals::apply_override(config, spec);
    if (seed_given) {
      config.dataset.seed = seed;
      config.training.seed = seed;
    }
    cals::validate_config(config);
    const std::filesystem::path out_dir = resolve_out_dir(out_flag, config, config_path);
    const cals::RunSummary summary = cals::run_experiment(config, out_dir);
    std::cout << summary_line(summary) << "\n";
    std::cout << "outputs: " << out_dir.string() << "\n";
    return kExitOk;
  } catch (...) {
    return report_error();
  }
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& csv_path) {
  try {
    std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
    const cals::ComparisonTable table = cals::compare_runs(paths);
    std::cout << table.text;
    if (!csv_path.empty()) {
      std::ofstream out(csv_path, std::ios::binary);
      if (!out) throw cals::io_error("cannot write comparison CSV '" + csv_path + "'");
      out << table.csv;
    }
    return kExitOk;
  } catch (...) {
    return report_error();
  }
}

int cmd_check_config(const std::string& config_path) {
  try {
    const cals::ExperimentConfig config = cals::parse_config_file(config_path);
    std::cout << "ok: " << config_path << "\n";
    std::cout << cals::serialize_config(config);
    return kExitOk;
  } catch (...) {
    return report_error();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train, calibrate, and compare class-adaptive label smoothing experiments"};
  app.require_subcommand(1);

  std::string run_config;
  std::string run_out;
  std::uint64_t run_seed = 0;
  std::vector<std::string> run_overrides;
  CLI::App* run_cmd = app.add_subcommand("run", "Train and evaluate one experiment");
  run_cmd->add_option("config", run_config, "experiment config file")->required();
  run_cmd->add_option("--out", run_out, "output directory (default: $" +
                                            std::string(kOutputRootVar) +
                                            "/<config stem> or runs/<config stem>)");
  CLI::Option* seed_opt =
      run_cmd->add_option("--seed", run_seed, "override both dataset and training seeds");
  run_cmd->add_option("--set", run_overrides, "config override key=value (repeatable)");

  std::vector<std::string> compare_dirs;
  std::string compare_csv;
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "Tabulate metrics across run directories");
  compare_cmd->add_option("dirs", compare_dirs, "run directories")->required()->expected(-1);
  compare_cmd->add_option("--csv", compare_csv, "also write the table to this CSV file");

  std::string check_path;
  CLI::App* check_cmd =
      app.add_subcommand("check-config", "Parse a config and print its canonical form");
  check_cmd->add_option("config", check_path, "experiment config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (run_cmd->parsed()) {
    return cmd_run(run_config, run_out, run_overrides, seed_opt->count() > 0, run_seed);
  }
  if (compare_cmd->parsed()) return cmd_compare(compare_dirs, compare_csv);
  return cmd_check_config(check_path);
}
