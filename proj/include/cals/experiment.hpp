#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cals/config.hpp"

namespace cals {

// Final test-set report of one run. ece is pre-temperature-scaling; the
// post_ts fields use the temperature fitted on the validation set.
struct RunSummary {
  double accuracy = 0.0;
  double ece = 0.0;
  double aece = 0.0;
  double cwce = 0.0;
  double post_ts_temperature = 1.0;
  double post_ts_ece = 0.0;
};

// Train per the config and write the run artifacts into out_dir: config.cfg
// (canonical form), history.csv, history_classes.csv, metrics.json,
// reliability.json, the network checkpoint, optional dataset CSVs, and
// manifest.txt naming every file in the directory (itself included).
// io_error when anything cannot be written. A numerical failure leaves a
// FAILED marker with the diagnostic beside the partial history, then
// propagates.
RunSummary run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

// acc / ECE / AECE / post-TS ECE / T on one line.
std::string summary_line(const RunSummary& summary);

// Side-by-side metrics of several runs, read from each directory's
// metrics.json. In the text table the best value per column is marked '*'
// and the second best '+'; the CSV carries plain values. Missing keys render
// as '-'. Unreadable files raise io_error, unparseable ones config_error,
// both naming the file.
struct ComparisonTable {
  std::string text;
  std::string csv;
};

ComparisonTable compare_runs(const std::vector<std::filesystem::path>& run_dirs);

}  // namespace cals
