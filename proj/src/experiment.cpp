#include "cals/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "cals/errors.hpp"
#include "cals/metrics.hpp"
#include "cals/trainer.hpp"

namespace cals {
namespace {

// Writes files into one run directory and remembers their names for the
// closing manifest.
class RunWriter {
 public:
  explicit RunWriter(const std::filesystem::path& dir) : dir_(dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) {
      throw io_error("cannot create output directory '" + dir_.string() + "': " + ec.message());
    }
  }

  void write(const std::string& name, const std::string& content) {
    const std::filesystem::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write '" + path.string() + "'");
    out << content;
    out.flush();
    if (!out) throw io_error("failed while writing '" + path.string() + "'");
    names_.push_back(name);
  }

  void write_manifest() {
    std::vector<std::string> all = names_;
    all.push_back("manifest.txt");
    std::sort(all.begin(), all.end());
    std::string content;
    for (const std::string& name : all) {
      content += name;
      content += '\n';
    }
    const std::filesystem::path path = dir_ / "manifest.txt";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write '" + path.string() + "'");
    out << content;
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> names_;
};

std::string dataset_csv(const Dataset& dataset) {
  std::ostringstream out;
  dump_csv(dataset, out);
  return out.str();
}

std::string format_cell(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.6f", value);
  return buffer;
}

std::string format_exact(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

struct MetricsRow {
  std::string name;
  std::optional<double> values[5];  // accuracy, ece, aece, cwce, post_ts ece
};

constexpr const char* kColumnNames[5] = {"accuracy", "ece", "aece", "cwce", "post_ts_ece"};
// Higher accuracy is better; every error column is better lower.
constexpr bool kHigherIsBetter[5] = {true, false, false, false, false};

MetricsRow read_metrics(const std::filesystem::path& dir) {
  const std::filesystem::path path = dir / "metrics.json";
  std::ifstream in(path);
  if (!in) throw io_error("cannot read metrics file '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("malformed metrics file '" + path.string() + "': " + e.what());
  }

  MetricsRow row;
  row.name = dir.string();
  auto number_at = [&doc](std::initializer_list<const char*> path_keys) -> std::optional<double> {
    const nlohmann::json* node = &doc;
    for (const char* key : path_keys) {
      if (!node->is_object() || !node->contains(key)) return std::nullopt;
      node = &(*node)[key];
    }
    if (!node->is_number()) return std::nullopt;
    return node->get<double>();
  };
  row.values[0] = number_at({"accuracy"});
  row.values[1] = number_at({"ece"});
  row.values[2] = number_at({"aece"});
  row.values[3] = number_at({"cwce"});
  row.values[4] = number_at({"post_ts", "ece"});
  return row;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  RunWriter writer(out_dir);
  writer.write("config.cfg", serialize_config(config));

  const SplitDataset data = build_dataset(config.dataset);
  if (data.test.labels.empty()) {
    throw config_error("dataset produced an empty test split; metrics need test samples");
  }
  if (config.output.write_dataset) {
    writer.write("dataset_train.csv", dataset_csv(data.train));
    if (!data.validation.labels.empty()) {
      writer.write("dataset_val.csv", dataset_csv(data.validation));
    }
    writer.write("dataset_test.csv", dataset_csv(data.test));
  }

  std::vector<EpochRecord> history;
  TrainResult result;
  try {
    result = train(config.training, data, config.model.hidden_widths, history);
  } catch (const numerical_error& e) {
    // Keep whatever completed, mark the run, and let the failure propagate.
    writer.write("history.csv", history_to_csv(history));
    writer.write("history_classes.csv", history_classes_to_csv(history));
    writer.write("FAILED", std::string(e.what()) + "\n");
    writer.write_manifest();
    throw;
  }

  writer.write("history.csv", history_to_csv(history));
  writer.write("history_classes.csv", history_classes_to_csv(history));

  // Temperature fitted on validation, reported on test. Without a
  // validation split the temperature stays at the identity.
  double temperature = 1.0;
  if (!data.validation.labels.empty()) {
    const std::vector<double> grid = parse_temperature_grid(config.evaluation.temperature_grid);
    temperature = temperature_search(result.val_logits, data.validation.labels, grid,
                                     config.evaluation.ece_bins)
                      .temperature;
  }

  RunSummary summary;
  summary.accuracy = accuracy(result.test_predictions);
  summary.ece = ece(result.test_predictions, config.evaluation.ece_bins);
  summary.aece = aece(result.test_predictions, config.evaluation.ece_bins);
  summary.cwce = cwce(result.test_predictions, config.evaluation.ece_bins);
  summary.post_ts_temperature = temperature;
  summary.post_ts_ece =
      ece(make_predictions(scale_logits(result.test_logits, temperature), data.test.labels),
          config.evaluation.ece_bins);

  nlohmann::json metrics;
  metrics["accuracy"] = summary.accuracy;
  metrics["ece"] = summary.ece;
  metrics["aece"] = summary.aece;
  metrics["cwce"] = summary.cwce;
  metrics["pre_ts"] = summary.ece;
  metrics["post_ts"] = {{"T", summary.post_ts_temperature}, {"ece", summary.post_ts_ece}};
  writer.write("metrics.json", metrics.dump(2) + "\n");

  writer.write("reliability.json",
               reliability_to_json(bin_predictions(result.test_predictions,
                                                   config.evaluation.reliability_bins,
                                                   BinningScheme::equal_width)) +
                   "\n");

  if (config.output.write_checkpoint) {
    std::ostringstream checkpoint;
    save_network(result.net, checkpoint);
    writer.write("checkpoint.txt", checkpoint.str());
  }

  writer.write_manifest();
  return summary;
}

std::string summary_line(const RunSummary& summary) {
  char buffer[192];
  std::snprintf(buffer, sizeof(buffer), "acc=%.4f ece=%.4f aece=%.4f post_ts_ece=%.4f T=%.2f",
                summary.accuracy, summary.ece, summary.aece, summary.post_ts_ece,
                summary.post_ts_temperature);
  return buffer;
}

ComparisonTable compare_runs(const std::vector<std::filesystem::path>& run_dirs) {
  if (run_dirs.empty()) throw config_error("compare needs at least one run directory");
  std::vector<MetricsRow> rows;
  rows.reserve(run_dirs.size());
  for (const std::filesystem::path& dir : run_dirs) rows.push_back(read_metrics(dir));

  // Rank each column: index of the best and second-best present value.
  long best[5];
  long second[5];
  for (int col = 0; col < 5; ++col) {
    best[col] = second[col] = -1;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!rows[r].values[col]) continue;
      const double v = *rows[r].values[col];
      auto better = [&](long against) {
        if (against < 0) return true;
        const double other = *rows[static_cast<std::size_t>(against)].values[col];
        return kHigherIsBetter[col] ? v > other : v < other;
      };
      if (better(best[col])) {
        second[col] = best[col];
        best[col] = static_cast<long>(r);
      } else if (better(second[col])) {
        second[col] = static_cast<long>(r);
      }
    }
  }

  std::size_t name_width = 3;  // "run"
  for (const MetricsRow& row : rows) name_width = std::max(name_width, row.name.size());
  constexpr std::size_t kCellWidth = 12;
  auto pad = [](std::string text, std::size_t width) {
    if (text.size() < width) text.append(width - text.size(), ' ');
    return text;
  };

  ComparisonTable table;
  table.text = pad("run", name_width);
  for (const char* column : kColumnNames) {
    table.text += "  ";
    table.text += pad(column, kCellWidth);
  }
  table.text += '\n';
  table.csv = "run,accuracy,ece,aece,cwce,post_ts_ece\n";

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const MetricsRow& row = rows[r];
    table.text += pad(row.name, name_width);
    table.csv += row.name;
    for (int col = 0; col < 5; ++col) {
      std::string cell = "-";
      std::string csv_cell;
      if (row.values[col]) {
        cell = format_cell(*row.values[col]);
        if (best[col] == static_cast<long>(r)) {
          cell += '*';
        } else if (second[col] == static_cast<long>(r)) {
          cell += '+';
        }
        csv_cell = format_exact(*row.values[col]);
      }
      table.text += "  ";
      table.text += pad(cell, kCellWidth);
      table.csv += ',';
      table.csv += csv_cell;
    }
    table.text += '\n';
    table.csv += '\n';
  }
  return table;
}

}  // namespace cals
