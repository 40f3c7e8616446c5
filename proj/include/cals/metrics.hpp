#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cals/nn.hpp"

namespace cals {

// Model outputs paired with ground truth. The predicted label of a row is
// its argmax (ties to the lowest class index) and the confidence is the
// maximum probability.
struct PredictionSet {
  ProbBatch probs;          // [N x K], rows sum to 1
  std::vector<int> labels;  // [N], values in [0, K)
};

// Softmax the logits and attach labels. Throws std::invalid_argument when
// sizes disagree or a label is out of range.
PredictionSet make_predictions(const LogitBatch& logits, const std::vector<int>& labels);

enum class BinningScheme { equal_width, equal_count };

const char* to_string(BinningScheme scheme);

struct BinSummary {
  double lower_edge = 0.0;
  double upper_edge = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;  // 0 when the bin is empty
  double accuracy = 0.0;         // 0 when the bin is empty
};

struct ReliabilityBins {
  BinningScheme scheme = BinningScheme::equal_width;
  std::size_t num_bins = 0;
  std::vector<BinSummary> bins;
};

// equal_width: bin m covers ((m-1)/M, m/M]; confidence 0 falls in the first
// bin. equal_count: stable-sort by confidence and split into M contiguous
// groups of size floor(N/M) or ceil(N/M), the first N mod M groups taking
// the extra element; edges are the min/max member confidences.
ReliabilityBins bin_predictions(const PredictionSet& preds, std::size_t num_bins,
                                BinningScheme scheme);

// Expected calibration error: sum_m (|B_m|/N) |accuracy_m - confidence_m|
// over equal-width bins.
double ece(const PredictionSet& preds, std::size_t num_bins = 15);

// Same weighted average over equal-count (adaptive) bins.
double aece(const PredictionSet& preds, std::size_t num_bins = 15);

// Class-wise calibration error: for each class k, an ECE-style binned error
// over all samples with s_k as confidence and 1{y = k} as correctness;
// macro-averaged over classes.
double cwce(const PredictionSet& preds, std::size_t num_bins = 15);

// Fraction of rows whose argmax equals the label.
double accuracy(const PredictionSet& preds);

// Logits divided by a positive temperature.
LogitBatch scale_logits(const LogitBatch& logits, double temperature);

struct TemperatureResult {
  double temperature = 1.0;
  double post_ece = 0.0;
};

// Exhaustive search over the grid for the temperature minimizing the ECE of
// softmax(logits / T) on the given set; ties go to the smallest T. The grid
// must be non-empty with strictly positive entries.
TemperatureResult temperature_search(const LogitBatch& logits, const std::vector<int>& labels,
                                     std::span<const double> grid, std::size_t num_bins = 15);

// Grid lo, lo+step, ..., up to hi inclusive (within a half-step of slack).
std::vector<double> make_temperature_grid(double lo, double hi, double step);

// {scheme, num_bins, bins: [{lower, upper, count, mean_confidence,
// accuracy}]} for external plotting.
std::string reliability_to_json(const ReliabilityBins& bins);

}  // namespace cals
