#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cals/config.hpp"
#include "cals/dataset.hpp"
#include "cals/errors.hpp"
#include "cals/experiment.hpp"
#include "cals/nn.hpp"

namespace fs = std::filesystem;
using cals::ComparisonTable;
using cals::config_error;
using cals::ExperimentConfig;
using cals::io_error;
using cals::RunSummary;

namespace {

// Every test writes under its own wiped subdirectory of the system temp dir.
fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cals_experiment_tests" / name;
  fs::remove_all(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::string> sorted_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  std::sort(lines.begin(), lines.end());
  return lines;
}

std::vector<std::string> directory_names(const fs::path& dir) {
  std::vector<std::string> names;
  for (const fs::directory_entry& entry : fs::directory_iterator(dir)) {
    names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::size_t count_lines(const std::string& text) {
  std::size_t lines = 0;
  for (char c : text) lines += (c == '\n');
  return lines;
}

// A few-second-free configuration: tiny balanced mixture, three epochs.
ExperimentConfig small_config() {
  ExperimentConfig config;
  config.dataset.kind = "balanced";
  config.dataset.num_classes = 3;
  config.dataset.samples_per_class = 40;
  config.dataset.dim = 2;
  config.dataset.separation = 4.0;
  config.dataset.noise_sigma = 0.6;
  config.dataset.balanced_validation = true;
  config.dataset.val_per_class = 10;
  config.dataset.test_per_class = 10;
  config.dataset.seed = 5;
  config.model.hidden_widths = {8};
  config.training.loss.kind = cals::LossKind::ce;
  config.training.epochs = 3;
  config.training.batch_size = 16;
  config.training.step_size = 0.05;
  config.training.seed = 5;
  config.evaluation.ece_bins = 15;
  config.evaluation.reliability_bins = 10;
  config.evaluation.temperature_grid = "0.5:2.0:0.5";
  return config;
}

void write_metrics_json(const fs::path& dir, const std::string& body) {
  fs::create_directories(dir);
  std::ofstream out(dir / "metrics.json", std::ios::binary);
  out << body;
}

}  // namespace

TEST_CASE("a run writes exactly the files the manifest names") {
  const fs::path dir = fresh_dir("manifest");
  const ExperimentConfig config = small_config();
  cals::run_experiment(config, dir);

  const std::vector<std::string> expected = {"checkpoint.txt",  "config.cfg",
                                             "history.csv",     "history_classes.csv",
                                             "manifest.txt",    "metrics.json",
                                             "reliability.json"};
  CHECK(directory_names(dir) == expected);
  CHECK(sorted_lines(read_file(dir / "manifest.txt")) == expected);
  for (const std::string& name : expected) {
    CAPTURE(name);
    CHECK(fs::file_size(dir / name) > 0);
  }
}

TEST_CASE("dataset dumps are opt-in and land in the manifest") {
  const fs::path dir = fresh_dir("withdata");
  ExperimentConfig config = small_config();
  config.output.write_dataset = true;
  config.output.write_checkpoint = false;
  cals::run_experiment(config, dir);

  const std::vector<std::string> names = directory_names(dir);
  CHECK(std::find(names.begin(), names.end(), "dataset_train.csv") != names.end());
  CHECK(std::find(names.begin(), names.end(), "dataset_val.csv") != names.end());
  CHECK(std::find(names.begin(), names.end(), "dataset_test.csv") != names.end());
  CHECK(std::find(names.begin(), names.end(), "checkpoint.txt") == names.end());
  CHECK(sorted_lines(read_file(dir / "manifest.txt")) == names);

  std::istringstream train_csv(read_file(dir / "dataset_train.csv"));
  const cals::Dataset train = cals::load_csv(train_csv);
  CHECK(train.labels.size() == 120);
  CHECK(train.num_classes == 3);
  CHECK(train.features.cols() == 2);
}

TEST_CASE("the stored config is the canonical serialization") {
  const fs::path dir = fresh_dir("config");
  const ExperimentConfig config = small_config();
  cals::run_experiment(config, dir);
  const std::string stored = read_file(dir / "config.cfg");
  CHECK(stored == cals::serialize_config(config));
  CHECK(cals::parse_config_text(stored) == config);
}

TEST_CASE("metrics.json carries the documented schema and the summary values") {
  const fs::path dir = fresh_dir("metrics");
  const ExperimentConfig config = small_config();
  const RunSummary summary = cals::run_experiment(config, dir);

  const nlohmann::json doc = nlohmann::json::parse(read_file(dir / "metrics.json"));
  CHECK(doc.at("accuracy").get<double>() == summary.accuracy);
  CHECK(doc.at("ece").get<double>() == summary.ece);
  CHECK(doc.at("aece").get<double>() == summary.aece);
  CHECK(doc.at("cwce").get<double>() == summary.cwce);
  CHECK(doc.at("pre_ts").get<double>() == summary.ece);
  CHECK(doc.at("post_ts").at("T").get<double>() == summary.post_ts_temperature);
  CHECK(doc.at("post_ts").at("ece").get<double>() == summary.post_ts_ece);

  CHECK(summary.accuracy >= 0.0);
  CHECK(summary.accuracy <= 1.0);
  CHECK(summary.ece >= 0.0);
  CHECK(summary.ece <= 1.0);

  // The fitted temperature comes from the configured grid.
  const std::vector<double> grid = cals::parse_temperature_grid("0.5:2.0:0.5");
  CHECK(std::find(grid.begin(), grid.end(), summary.post_ts_temperature) != grid.end());
}

TEST_CASE("history files carry one row per epoch") {
  const fs::path dir = fresh_dir("history");
  const ExperimentConfig config = small_config();
  cals::run_experiment(config, dir);

  const std::string history = read_file(dir / "history.csv");
  CHECK(history.rfind("epoch,train_loss,val_accuracy,val_ece,mean_lambda,mean_rho\n", 0) == 0);
  CHECK(count_lines(history) == config.training.epochs + 1);

  const std::string classes = read_file(dir / "history_classes.csv");
  CHECK(classes.rfind("epoch,lambda_0,lambda_1,lambda_2,constraint_0,constraint_1,constraint_2\n",
                      0) == 0);
  CHECK(count_lines(classes) == config.training.epochs + 1);
}

TEST_CASE("the checkpoint reloads into a network of the right shape") {
  const fs::path dir = fresh_dir("checkpoint");
  const ExperimentConfig config = small_config();
  cals::run_experiment(config, dir);

  std::ifstream in(dir / "checkpoint.txt");
  const cals::Network net = cals::load_network(in);
  CHECK(net.input_dim() == 2);
  CHECK(net.num_classes() == 3);
  CHECK(net.layers.size() == 2);
}

TEST_CASE("reruns of the same config are byte-identical") {
  const fs::path dir_a = fresh_dir("rerun_a");
  const fs::path dir_b = fresh_dir("rerun_b");
  ExperimentConfig config = small_config();
  config.training.loss.kind = cals::LossKind::cals_alm;
  config.training.loss.margin = 6.0;

  cals::run_experiment(config, dir_a);
  cals::run_experiment(config, dir_b);

  for (const char* name : {"config.cfg", "history.csv", "history_classes.csv", "metrics.json",
                           "reliability.json", "checkpoint.txt", "manifest.txt"}) {
    CAPTURE(name);
    CHECK(read_file(dir_a / name) == read_file(dir_b / name));
  }
}

TEST_CASE("summary_line formats the five headline numbers") {
  RunSummary summary;
  summary.accuracy = 0.5;
  summary.ece = 0.125;
  summary.aece = 0.25;
  summary.cwce = 0.3;  // not printed
  summary.post_ts_ece = 0.0625;
  summary.post_ts_temperature = 1.5;
  CHECK(cals::summary_line(summary) ==
        "acc=0.5000 ece=0.1250 aece=0.2500 post_ts_ece=0.0625 T=1.50");
}

TEST_CASE("comparison table marks the best and runner-up per column") {
  const fs::path root = fresh_dir("compare");
  const fs::path a = root / "run_a";
  const fs::path b = root / "run_b";
  const fs::path c = root / "run_c";
  write_metrics_json(a,
                     R"({"accuracy": 0.875, "ece": 0.0625, "aece": 0.015625,
                         "cwce": 0.25, "post_ts": {"T": 1.5, "ece": 0.125}})");
  write_metrics_json(b,
                     R"({"accuracy": 0.75, "ece": 0.03125, "aece": 0.125,
                         "cwce": 0.5, "post_ts": {"T": 2.0, "ece": 0.25}})");
  write_metrics_json(c, R"({"accuracy": 0.5, "ece": 0.046875})");

  const ComparisonTable table = cals::compare_runs({a, b, c});

  // Accuracy ranks high-to-low, the error columns low-to-high.
  CHECK(table.text.find("0.875000*") != std::string::npos);
  CHECK(table.text.find("0.750000+") != std::string::npos);
  CHECK(table.text.find("0.031250*") != std::string::npos);
  CHECK(table.text.find("0.046875+") != std::string::npos);
  CHECK(table.text.find("0.062500") != std::string::npos);
  CHECK(table.text.find("0.062500*") == std::string::npos);
  CHECK(table.text.find("-") != std::string::npos);  // absent cells render as '-'
  CHECK(table.text.rfind("run", 0) == 0);
  CHECK(table.text.find("post_ts_ece") != std::string::npos);

  // The CSV carries exact unmarked values and empty cells for gaps.
  CHECK(table.csv.rfind("run,accuracy,ece,aece,cwce,post_ts_ece\n", 0) == 0);
  CHECK(table.csv.find(a.string() + ",0.875,0.0625,0.015625,0.25,0.125\n") !=
        std::string::npos);
  CHECK(table.csv.find(c.string() + ",0.5,0.046875,,,\n") != std::string::npos);
  CHECK(table.csv.find('*') == std::string::npos);
  CHECK(table.csv.find('+') == std::string::npos);
}

TEST_CASE("comparison errors name the file that failed") {
  const fs::path root = fresh_dir("compare_errors");
  CHECK_THROWS_AS(cals::compare_runs({}), config_error);

  const fs::path missing = root / "missing";
  fs::create_directories(missing);
  try {
    cals::compare_runs({missing});
    FAIL("expected io_error");
  } catch (const io_error& e) {
    CHECK(std::string(e.what()).find("metrics.json") != std::string::npos);
  }

  const fs::path broken = root / "broken";
  write_metrics_json(broken, "{not json");
  try {
    cals::compare_runs({broken});
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("broken") != std::string::npos);
  }
}

TEST_CASE("failed runs leave a FAILED marker beside the partial history") {
  const fs::path dir = fresh_dir("failed");
  ExperimentConfig config = small_config();
  // Noise at 1e200 swamps the class means, so the labels stay unpredictable
  // and saturated gradients scale the weights up to feature magnitude; the
  // epoch-two forward pass then overflows the logits. One batch per epoch
  // keeps the first epoch finite regardless of shuffle order.
  config.dataset.num_classes = 2;
  config.dataset.samples_per_class = 2;
  config.dataset.separation = 1e-12;
  config.dataset.noise_sigma = 1e200;
  config.dataset.val_per_class = 2;
  config.dataset.test_per_class = 2;
  config.model.hidden_widths = {};
  config.training.epochs = 10;
  config.training.batch_size = 4;
  config.training.step_size = 1.0;

  CHECK_THROWS_AS(cals::run_experiment(config, dir), cals::numerical_error);

  const std::vector<std::string> names = directory_names(dir);
  const std::vector<std::string> expected = {"FAILED", "config.cfg", "history.csv",
                                             "history_classes.csv", "manifest.txt"};
  CHECK(names == expected);
  CHECK(sorted_lines(read_file(dir / "manifest.txt")) == expected);
  CHECK(read_file(dir / "FAILED").find("non-finite") != std::string::npos);

  const std::string history = read_file(dir / "history.csv");
  const std::size_t rows = count_lines(history) - 1;  // minus header
  CHECK(rows >= 1);
  CHECK(rows < config.training.epochs);
}

TEST_CASE("an empty test split is rejected before training") {
  const fs::path dir = fresh_dir("notest");
  ExperimentConfig config = small_config();
  config.dataset.balanced_validation = false;
  config.dataset.train_fraction = 0.8;
  config.dataset.val_fraction = 0.2;
  config.dataset.test_fraction = 0.0;
  CHECK_THROWS_AS(cals::run_experiment(config, dir), config_error);
}

TEST_CASE("an unwritable output directory raises an io error") {
  const fs::path root = fresh_dir("unwritable");
  fs::create_directories(root);
  const fs::path blocker = root / "blocker";
  std::ofstream(blocker).put('x');  // a file where a directory is needed
  CHECK_THROWS_AS(cals::run_experiment(small_config(), blocker / "run"), io_error);
}
