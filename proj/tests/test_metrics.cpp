#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "cals/matrix.hpp"
#include "cals/metrics.hpp"
#include "support.hpp"

using cals::BinningScheme;
using cals::LogitBatch;
using cals::Matrix;
using cals::PredictionSet;
using cals::ReliabilityBins;
using cals::TemperatureResult;

namespace {

PredictionSet make_pred(std::initializer_list<std::initializer_list<double>> rows,
                        std::vector<int> labels) {
  PredictionSet preds;
  const std::size_t r = rows.size();
  const std::size_t c = rows.begin()->size();
  preds.probs.values = Matrix(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    std::size_t j = 0;
    for (double v : row) preds.probs.values(i, j++) = v;
    ++i;
  }
  preds.labels = std::move(labels);
  return preds;
}

// Four samples: two confident ones split right/wrong, two less confident
// ones both right. Confidences 0.9 and 0.3.
PredictionSet four_sample_fixture() {
  return make_pred({{0.9, 0.04, 0.03, 0.03},
                    {0.9, 0.04, 0.03, 0.03},
                    {0.3, 0.24, 0.23, 0.23},
                    {0.3, 0.24, 0.23, 0.23}},
                   {0, 1, 0, 0});
}

LogitBatch make_logits(std::initializer_list<std::initializer_list<double>> rows) {
  LogitBatch batch;
  const std::size_t r = rows.size();
  const std::size_t c = rows.begin()->size();
  batch.values = Matrix(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    std::size_t j = 0;
    for (double v : row) batch.values(i, j++) = v;
    ++i;
  }
  return batch;
}

}  // namespace

TEST_CASE("prediction construction validates shapes and labels") {
  const LogitBatch logits = make_logits({{1.0, 0.0}, {0.0, 1.0}});
  const PredictionSet preds = cals::make_predictions(logits, {0, 1});
  CHECK(preds.probs.values(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));

  CHECK_THROWS_AS(cals::make_predictions(logits, {0}), std::invalid_argument);
  CHECK_THROWS_AS(cals::make_predictions(logits, {0, 2}), std::invalid_argument);
  CHECK_THROWS_AS(cals::make_predictions(logits, {0, -1}), std::invalid_argument);
}

TEST_CASE("accuracy counts argmax hits with ties to the lowest index") {
  const PredictionSet preds = make_pred(
      {{0.9, 0.1}, {0.2, 0.8}, {0.6, 0.4}, {0.3, 0.7}}, {0, 1, 1, 1});
  CHECK(cals::accuracy(preds) == 0.75);

  const PredictionSet tied = make_pred({{0.5, 0.5}, {0.5, 0.5}}, {0, 1});
  CHECK(cals::accuracy(tied) == 0.5);

  const PredictionSet all = make_pred({{1.0, 0.0}}, {0});
  CHECK(cals::accuracy(all) == 1.0);
  const PredictionSet none = make_pred({{1.0, 0.0}}, {1});
  CHECK(cals::accuracy(none) == 0.0);
}

TEST_CASE("calibration error hand cases") {
  // Two fully confident samples, one right one wrong: |0.5 - 1.0|.
  const PredictionSet certain = make_pred({{1.0, 0.0}, {1.0, 0.0}}, {0, 1});
  CHECK(cals::ece(certain, 15) == 0.5);

  // The 4-sample fixture with two width bins: 0.5|1.0-0.3| + 0.5|0.5-0.9|,
  // which rounds to exactly 0.55 in 64-bit arithmetic.
  CHECK(cals::ece(four_sample_fixture(), 2) == 0.55);

  // Accuracy matching mean confidence in every bin: exactly zero. The 0.75
  // values are dyadic, so no rounding slack is needed.
  const PredictionSet calibrated = make_pred(
      {{0.75, 0.25}, {0.75, 0.25}, {0.75, 0.25}, {0.75, 0.25}}, {0, 0, 0, 1});
  CHECK(cals::ece(calibrated, 2) == 0.0);
}

TEST_CASE("adaptive binning hand cases") {
  // Sorted split two-by-two coincides with the width split: same 0.55.
  CHECK(cals::aece(four_sample_fixture(), 2) == 0.55);

  // Identical confident-and-correct samples: zero error.
  const PredictionSet perfect = make_pred({{1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}}, {0, 0, 0});
  CHECK(cals::aece(perfect, 2) == 0.0);

  // One sample per bin degenerates to the mean pointwise gap.
  test_support::Rng rng(601);
  const PredictionSet random = test_support::random_predictions(rng, 12, 4);
  std::vector<double> conf;
  std::vector<char> correct;
  test_support::naive_top_prediction(random, conf, correct);
  double mean_gap = 0.0;
  for (std::size_t i = 0; i < conf.size(); ++i) {
    mean_gap += std::abs((correct[i] ? 1.0 : 0.0) - conf[i]) / 12.0;
  }
  CHECK(cals::aece(random, 12) == doctest::Approx(mean_gap).epsilon(1e-12));
}

TEST_CASE("class-wise calibration error hand cases") {
  // Two mirrored samples, one bin: both classes off by 0.3.
  const PredictionSet mirrored = make_pred({{0.8, 0.2}, {0.8, 0.2}}, {0, 1});
  CHECK(cals::cwce(mirrored, 1) == (std::abs(0.5 - 0.8) + std::abs(0.5 - 0.2)) / 2.0);
  CHECK(cals::cwce(mirrored, 1) == doctest::Approx(0.3));

  // Degenerate single class.
  const PredictionSet single = make_pred({{1.0}, {1.0}}, {0, 0});
  CHECK(cals::cwce(single, 15) == 0.0);

  // Symmetric, perfectly calibrated per class (dyadic confidences).
  const PredictionSet calibrated = make_pred(
      {{0.75, 0.25}, {0.75, 0.25}, {0.75, 0.25}, {0.75, 0.25}}, {0, 0, 0, 1});
  CHECK(cals::cwce(calibrated, 1) == 0.0);

  // A zero per-class probability lands in the first bin; with the label on
  // that class both class curves are maximally wrong.
  const PredictionSet wrong = make_pred({{1.0, 0.0}}, {1});
  CHECK(cals::cwce(wrong, 15) == 1.0);
}

TEST_CASE("metrics match the brute-force oracles on random sets") {
  test_support::Rng rng(602);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = static_cast<std::size_t>(test_support::uniform_int(rng, 1, 50));
    const std::size_t k = static_cast<std::size_t>(test_support::uniform_int(rng, 2, 5));
    const std::size_t bins =
        static_cast<std::size_t>(test_support::uniform_int(rng, 1, 20));
    const PredictionSet preds = test_support::random_predictions(rng, n, k);

    CHECK(std::abs(cals::ece(preds, bins) - test_support::naive_ece(preds, bins)) <= 1e-12);
    CHECK(std::abs(cals::aece(preds, bins) - test_support::naive_aece(preds, bins)) <=
          1e-12);
    CHECK(std::abs(cals::cwce(preds, bins) - test_support::naive_cwce(preds, bins)) <=
          1e-12);

    const double e = cals::ece(preds, bins);
    const double a = cals::aece(preds, bins);
    const double c = cals::cwce(preds, bins);
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    CHECK(c >= 0.0);
    CHECK(c <= 1.0);
  }
}

TEST_CASE("one-bin width binning reduces to the overall gap") {
  test_support::Rng rng(603);
  for (int trial = 0; trial < 20; ++trial) {
    const PredictionSet preds = test_support::random_predictions(rng, 30, 4);
    std::vector<double> conf;
    std::vector<char> correct;
    test_support::naive_top_prediction(preds, conf, correct);
    double conf_sum = 0.0;
    double hits = 0.0;
    for (std::size_t i = 0; i < conf.size(); ++i) {
      conf_sum += conf[i];
      hits += correct[i] ? 1.0 : 0.0;
    }
    const double expected = std::abs(hits / 30.0 - conf_sum / 30.0);
    CHECK(cals::ece(preds, 1) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("duplicating every sample leaves the width-binned error unchanged") {
  test_support::Rng rng(604);
  for (int trial = 0; trial < 20; ++trial) {
    const PredictionSet preds = test_support::random_predictions(rng, 25, 4);
    PredictionSet doubled;
    doubled.probs.values = Matrix(50, 4);
    doubled.labels.resize(50);
    for (std::size_t i = 0; i < 50; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        doubled.probs.values(i, j) = preds.probs.values(i % 25, j);
      }
      doubled.labels[i] = preds.labels[i % 25];
    }
    CHECK(cals::ece(doubled, 15) == doctest::Approx(cals::ece(preds, 15)).epsilon(1e-12));
  }
}

TEST_CASE("width bins partition the unit interval and capture saturated confidence") {
  const PredictionSet certain = make_pred({{1.0, 0.0}, {1.0, 0.0}, {1.0, 0.0}}, {0, 0, 1});
  const ReliabilityBins bins = cals::bin_predictions(certain, 15, BinningScheme::equal_width);
  REQUIRE(bins.bins.size() == 15);
  std::size_t total = 0;
  for (std::size_t b = 0; b < 15; ++b) {
    CHECK(bins.bins[b].lower_edge == static_cast<double>(b) / 15.0);
    CHECK(bins.bins[b].upper_edge == static_cast<double>(b + 1) / 15.0);
    total += bins.bins[b].count;
    if (bins.bins[b].count == 0) {
      CHECK(bins.bins[b].mean_confidence == 0.0);
      CHECK(bins.bins[b].accuracy == 0.0);
    }
  }
  CHECK(total == 3);
  CHECK(bins.bins[14].count == 3);
  CHECK(bins.bins[14].mean_confidence == 1.0);
  CHECK(bins.bins[14].accuracy == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("count bins split sorted confidences evenly") {
  // Confidences 0.1, 0.4, 0.6, 0.9 over ten classes.
  PredictionSet preds;
  preds.probs.values = Matrix(4, 10);
  const double rows[4][10] = {
      {0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1},
      {0.4, 0.3, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
      {0.6, 0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
      {0.9, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
  };
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 10; ++j) preds.probs.values(i, j) = rows[i][j];
  }
  preds.labels = {0, 0, 0, 0};

  const ReliabilityBins bins = cals::bin_predictions(preds, 2, BinningScheme::equal_count);
  REQUIRE(bins.bins.size() == 2);
  CHECK(bins.bins[0].count == 2);
  CHECK(bins.bins[0].lower_edge == 0.1);
  CHECK(bins.bins[0].upper_edge == 0.4);
  CHECK(bins.bins[1].count == 2);
  CHECK(bins.bins[1].lower_edge == 0.6);
  CHECK(bins.bins[1].upper_edge == 0.9);
}

TEST_CASE("count bins differ in size by at most one") {
  test_support::Rng rng(605);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = static_cast<std::size_t>(test_support::uniform_int(rng, 1, 40));
    const std::size_t m = static_cast<std::size_t>(test_support::uniform_int(rng, 1, 12));
    const PredictionSet preds = test_support::random_predictions(rng, n, 3);
    const ReliabilityBins bins = cals::bin_predictions(preds, m, BinningScheme::equal_count);
    std::size_t total = 0;
    std::size_t smallest = n + 1;
    std::size_t largest = 0;
    for (const auto& bin : bins.bins) {
      total += bin.count;
      smallest = std::min(smallest, bin.count);
      largest = std::max(largest, bin.count);
    }
    CHECK(total == n);
    if (n >= m) CHECK(largest - smallest <= 1);
  }
}

TEST_CASE("binning rejects zero bins and empty sets") {
  const PredictionSet preds = make_pred({{1.0, 0.0}}, {0});
  CHECK_THROWS_AS(cals::bin_predictions(preds, 0, BinningScheme::equal_width),
                  std::invalid_argument);
  PredictionSet empty;
  empty.probs.values = Matrix(0, 2);
  CHECK_THROWS_AS(cals::ece(empty, 15), std::invalid_argument);
}

TEST_CASE("logit scaling divides by the temperature and keeps the argmax") {
  const LogitBatch logits = make_logits({{2.0, -1.0, 0.5}});
  const LogitBatch scaled = cals::scale_logits(logits, 2.0);
  CHECK(scaled.values(0, 0) == 1.0);
  CHECK(scaled.values(0, 1) == -0.5);
  CHECK(scaled.values(0, 2) == 0.25);
  CHECK_THROWS_AS(cals::scale_logits(logits, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(cals::scale_logits(logits, -1.0), std::invalid_argument);

  test_support::Rng rng(606);
  const LogitBatch batch = test_support::random_logits(rng, 20, 5);
  const std::vector<int> labels = test_support::random_labels(rng, 20, 5);
  const double base_acc = cals::accuracy(cals::make_predictions(batch, labels));
  for (double t : {0.07, 0.5, 1.0, 3.0, 47.0}) {
    const PredictionSet scaled_preds =
        cals::make_predictions(cals::scale_logits(batch, t), labels);
    CHECK(cals::accuracy(scaled_preds) == base_acc);
  }
}

TEST_CASE("temperature search scans the grid for the lowest binned error") {
  test_support::Rng rng(607);
  const LogitBatch logits = test_support::random_logits(rng, 40, 4);
  const std::vector<int> labels = test_support::random_labels(rng, 40, 4);

  // Singleton grid: reports that temperature and its error.
  const std::vector<double> one = {1.0};
  const TemperatureResult only = cals::temperature_search(logits, labels, one);
  CHECK(only.temperature == 1.0);
  CHECK(only.post_ece == cals::ece(cals::make_predictions(logits, labels), 15));

  // With 1.0 in the grid the winner never loses to the identity temperature.
  const std::vector<double> grid = cals::make_temperature_grid(0.1, 5.0, 0.1);
  const TemperatureResult best = cals::temperature_search(logits, labels, grid);
  CHECK(best.post_ece <= only.post_ece);

  // Exhaustive re-scan agrees (the search is its own oracle here).
  double expected = only.post_ece;
  double expected_t = 1.0;
  for (double t : grid) {
    const double e =
        cals::ece(cals::make_predictions(cals::scale_logits(logits, t), labels), 15);
    if (e < expected || (e == expected && t < expected_t)) {
      expected = e;
      expected_t = t;
    }
  }
  CHECK(best.temperature == expected_t);
  CHECK(best.post_ece == expected);
}

TEST_CASE("temperature search prefers the smallest tied temperature") {
  // Saturated logits keep confidence pinned at 1 for every moderate T, so
  // all errors tie and the smallest grid entry must win, even unsorted.
  const LogitBatch logits = make_logits({{1000.0, 0.0}, {1000.0, 0.0}});
  const std::vector<int> labels = {0, 0};
  const std::vector<double> grid = {3.0, 1.5, 2.0};
  const TemperatureResult best = cals::temperature_search(logits, labels, grid);
  CHECK(best.temperature == 1.5);
}

TEST_CASE("overconfident predictions pull the temperature above one") {
  // Confidence ~0.99 at 50% accuracy: scaling down the logits (T > 1) is the
  // only way to shrink the gap.
  LogitBatch logits;
  logits.values = Matrix(40, 2);
  std::vector<int> labels(40);
  for (std::size_t i = 0; i < 40; ++i) {
    logits.values(i, 0) = 4.6;
    logits.values(i, 1) = 0.0;
    labels[i] = i % 2 == 0 ? 0 : 1;
  }
  const std::vector<double> grid = cals::make_temperature_grid(0.1, 5.0, 0.1);
  const TemperatureResult best = cals::temperature_search(logits, labels, grid);
  CHECK(best.temperature > 1.0);
}

TEST_CASE("temperature search rejects degenerate grids") {
  const LogitBatch logits = make_logits({{1.0, 0.0}});
  const std::vector<int> labels = {0};
  const std::vector<double> empty;
  CHECK_THROWS_AS(cals::temperature_search(logits, labels, empty), std::invalid_argument);
  const std::vector<double> bad = {1.0, 0.0};
  CHECK_THROWS_AS(cals::temperature_search(logits, labels, bad), std::invalid_argument);
}

TEST_CASE("temperature grids are inclusive of both endpoints") {
  const std::vector<double> grid = cals::make_temperature_grid(0.1, 5.0, 0.1);
  REQUIRE(grid.size() == 50);
  CHECK(grid.front() == 0.1);
  CHECK(grid.back() == doctest::Approx(5.0));

  const std::vector<double> coarse = cals::make_temperature_grid(1.0, 2.0, 0.5);
  REQUIRE(coarse.size() == 3);
  CHECK(coarse[0] == 1.0);
  CHECK(coarse[1] == 1.5);
  CHECK(coarse[2] == 2.0);

  const std::vector<double> single = cals::make_temperature_grid(1.0, 1.0, 0.1);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == 1.0);

  CHECK_THROWS_AS(cals::make_temperature_grid(2.0, 1.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(cals::make_temperature_grid(0.0, 1.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(cals::make_temperature_grid(1.0, 2.0, 0.0), std::invalid_argument);
}

TEST_CASE("reliability export is valid JSON with one entry per bin") {
  const PredictionSet preds = four_sample_fixture();
  const ReliabilityBins bins = cals::bin_predictions(preds, 2, BinningScheme::equal_width);
  const nlohmann::json doc = nlohmann::json::parse(cals::reliability_to_json(bins));
  CHECK(doc.at("scheme").get<std::string>() == "equal_width");
  CHECK(doc.at("num_bins").get<std::size_t>() == 2);
  REQUIRE(doc.at("bins").size() == 2);
  CHECK(doc.at("bins")[0].at("count").get<std::size_t>() == 2);
  CHECK(doc.at("bins")[0].at("accuracy").get<double>() == 1.0);
  CHECK(doc.at("bins")[1].at("mean_confidence").get<double>() == 0.9);
  CHECK(doc.at("bins")[1].at("lower").get<double>() == 0.5);
}
