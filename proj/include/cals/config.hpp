#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cals/dataset.hpp"
#include "cals/trainer.hpp"

namespace cals {

// Flat `section.key = value` text config. Every key has a default; unknown
// keys are rejected. `#` starts a comment, blank lines are ignored.

struct DatasetSection {
  std::string kind = "balanced";  // balanced | longtail
  std::size_t num_classes = 8;
  // Per-class count for the balanced kind: the training set when
  // balanced_validation is on, otherwise the pool that gets split.
  std::size_t samples_per_class = 100;
  std::size_t max_count = 256;          // longtail kind, head class
  double imbalance_ratio = 51.2;        // longtail kind, head/tail
  std::size_t dim = 16;
  double separation = 4.0;
  double noise_sigma = 1.0;
  // Used only when balanced_validation is off: one pool is generated and
  // carved by these fractions.
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  double test_fraction = 0.2;
  bool stratified = true;
  // Default protocol: the training set follows `kind`, while validation and
  // test are generated balanced with the per-class sizes below. Multiplier
  // estimation is only meaningful on a balanced held-out set.
  bool balanced_validation = true;
  std::size_t val_per_class = 20;
  std::size_t test_per_class = 50;
  std::uint64_t seed = 1;

  bool operator==(const DatasetSection&) const = default;
};

struct ModelSection {
  std::vector<std::size_t> hidden_widths = {32};  // empty = linear model

  bool operator==(const ModelSection&) const = default;
};

struct EvaluationSection {
  std::size_t ece_bins = 15;
  std::size_t reliability_bins = 25;
  std::string temperature_grid = "0.1:5.0:0.1";  // lo:hi:step, all > 0

  bool operator==(const EvaluationSection&) const = default;
};

struct OutputSection {
  std::string directory;  // empty: the CLI picks a location
  bool write_checkpoint = true;
  bool write_dataset = false;

  bool operator==(const OutputSection&) const = default;
};

struct ExperimentConfig {
  DatasetSection dataset;
  ModelSection model;
  TrainConfig training;
  EvaluationSection evaluation;
  OutputSection output;

  bool operator==(const ExperimentConfig&) const = default;
};

// Parse and validate. Throws config_error naming the offending key for
// syntax errors, unknown keys, and out-of-domain values.
ExperimentConfig parse_config_text(const std::string& text);

// Reads the file (io_error when unreadable) and parses it.
ExperimentConfig parse_config_file(const std::string& path);

// Canonical form: every key in a fixed order, doubles in round-trippable
// precision. parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

// Apply a single `key=value` override. Validates syntax and the key name but
// not cross-field domains; call validate_config after the last override.
void apply_override(ExperimentConfig& config, const std::string& spec);

// Domain checks for every section; throws config_error with the key path.
void validate_config(const ExperimentConfig& config);

// "lo:hi:step" -> explicit grid. Throws config_error on bad syntax or
// non-positive values.
std::vector<double> parse_temperature_grid(const std::string& spec);

// Generate the splits the config describes.
SplitDataset build_dataset(const DatasetSection& section);

}  // namespace cals
