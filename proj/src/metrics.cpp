#include "cals/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace cals {
namespace {

std::size_t row_argmax(const double* row, std::size_t k) {
  return static_cast<std::size_t>(std::max_element(row, row + k) - row);
}

// Index of the equal-width bin ((m-1)/M, m/M] containing conf; confidence 0
// (and anything below the first edge) lands in bin 0, anything above 1 in
// the last. Edges are compared as the doubles (m/M), matching the documented
// convention as closely as 64-bit arithmetic allows.
std::size_t width_bin_index(double conf, std::size_t num_bins) {
  for (std::size_t idx = 0; idx + 1 < num_bins; ++idx) {
    const double upper = static_cast<double>(idx + 1) / static_cast<double>(num_bins);
    if (conf <= upper) return idx;
  }
  return num_bins - 1;
}

struct BinnedPairs {
  std::vector<BinSummary> bins;
};

// Shared core for every metric: bin (confidence, correct) pairs under either
// scheme and summarize each bin.
BinnedPairs bin_pairs(const std::vector<double>& confidences, const std::vector<char>& correct,
                      std::size_t num_bins, BinningScheme scheme) {
  if (num_bins == 0) throw std::invalid_argument("binning requires num_bins >= 1");
  const std::size_t n = confidences.size();
  BinnedPairs out;
  out.bins.resize(num_bins);

  std::vector<std::vector<std::size_t>> members(num_bins);
  if (scheme == BinningScheme::equal_width) {
    for (std::size_t b = 0; b < num_bins; ++b) {
      out.bins[b].lower_edge = static_cast<double>(b) / static_cast<double>(num_bins);
      out.bins[b].upper_edge = static_cast<double>(b + 1) / static_cast<double>(num_bins);
    }
    for (std::size_t i = 0; i < n; ++i) {
      members[width_bin_index(confidences[i], num_bins)].push_back(i);
    }
  } else {
    // Stable sort so equal confidences keep input order; the split is then
    // fully deterministic.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return confidences[a] < confidences[b];
    });
    const std::size_t base = n / num_bins;
    const std::size_t extra = n % num_bins;
    std::size_t cursor = 0;
    for (std::size_t b = 0; b < num_bins; ++b) {
      const std::size_t take = base + (b < extra ? 1 : 0);
      for (std::size_t t = 0; t < take; ++t) members[b].push_back(order[cursor++]);
    }
  }

  for (std::size_t b = 0; b < num_bins; ++b) {
    BinSummary& bin = out.bins[b];
    bin.count = members[b].size();
    if (bin.count == 0) continue;
    double conf_sum = 0.0;
    double correct_sum = 0.0;
    double lo = confidences[members[b].front()];
    double hi = lo;
    for (std::size_t i : members[b]) {
      conf_sum += confidences[i];
      correct_sum += correct[i] ? 1.0 : 0.0;
      lo = std::min(lo, confidences[i]);
      hi = std::max(hi, confidences[i]);
    }
    bin.mean_confidence = conf_sum / static_cast<double>(bin.count);
    bin.accuracy = correct_sum / static_cast<double>(bin.count);
    if (scheme == BinningScheme::equal_count) {
      bin.lower_edge = lo;
      bin.upper_edge = hi;
    }
  }
  return out;
}

double weighted_gap(const std::vector<BinSummary>& bins, std::size_t n) {
  if (n == 0) return 0.0;
  double total = 0.0;
  for (const BinSummary& bin : bins) {
    total += static_cast<double>(bin.count) / static_cast<double>(n) *
             std::abs(bin.accuracy - bin.mean_confidence);
  }
  return total;
}

void top_prediction(const PredictionSet& preds, std::vector<double>& confidences,
                    std::vector<char>& correct) {
  const std::size_t n = preds.probs.values.rows();
  const std::size_t k = preds.probs.values.cols();
  confidences.resize(n);
  correct.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = preds.probs.values.row(i);
    const std::size_t amax = row_argmax(row, k);
    confidences[i] = row[amax];
    correct[i] = amax == static_cast<std::size_t>(preds.labels[i]) ? 1 : 0;
  }
}

void check_predictions(const PredictionSet& preds) {
  const std::size_t n = preds.probs.values.rows();
  const std::size_t k = preds.probs.values.cols();
  if (n == 0) throw std::invalid_argument("prediction set is empty");
  if (preds.labels.size() != n) {
    throw std::invalid_argument("prediction set: " + std::to_string(preds.labels.size()) +
                                " labels for " + std::to_string(n) + " rows");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (preds.labels[i] < 0 || static_cast<std::size_t>(preds.labels[i]) >= k) {
      throw std::invalid_argument("prediction set: label " + std::to_string(preds.labels[i]) +
                                  " at row " + std::to_string(i) + " outside [0, " +
                                  std::to_string(k) + ")");
    }
  }
}

}  // namespace

PredictionSet make_predictions(const LogitBatch& logits, const std::vector<int>& labels) {
  PredictionSet preds{softmax(logits), labels};
  check_predictions(preds);
  return preds;
}

const char* to_string(BinningScheme scheme) {
  return scheme == BinningScheme::equal_width ? "equal_width" : "equal_count";
}

ReliabilityBins bin_predictions(const PredictionSet& preds, std::size_t num_bins,
                                BinningScheme scheme) {
  check_predictions(preds);
  std::vector<double> confidences;
  std::vector<char> correct;
  top_prediction(preds, confidences, correct);
  ReliabilityBins out;
  out.scheme = scheme;
  out.num_bins = num_bins;
  out.bins = bin_pairs(confidences, correct, num_bins, scheme).bins;
  return out;
}

double ece(const PredictionSet& preds, std::size_t num_bins) {
  const ReliabilityBins bins = bin_predictions(preds, num_bins, BinningScheme::equal_width);
  return weighted_gap(bins.bins, preds.labels.size());
}

double aece(const PredictionSet& preds, std::size_t num_bins) {
  const ReliabilityBins bins = bin_predictions(preds, num_bins, BinningScheme::equal_count);
  return weighted_gap(bins.bins, preds.labels.size());
}

double cwce(const PredictionSet& preds, std::size_t num_bins) {
  check_predictions(preds);
  const std::size_t n = preds.probs.values.rows();
  const std::size_t k = preds.probs.values.cols();
  std::vector<double> confidences(n);
  std::vector<char> correct(n);
  double total = 0.0;
  for (std::size_t cls = 0; cls < k; ++cls) {
    for (std::size_t i = 0; i < n; ++i) {
      confidences[i] = preds.probs.values(i, cls);
      correct[i] = static_cast<std::size_t>(preds.labels[i]) == cls ? 1 : 0;
    }
    const BinnedPairs bins = bin_pairs(confidences, correct, num_bins,
                                       BinningScheme::equal_width);
    total += weighted_gap(bins.bins, n);
  }
  return total / static_cast<double>(k);
}

double accuracy(const PredictionSet& preds) {
  check_predictions(preds);
  const std::size_t n = preds.probs.values.rows();
  const std::size_t k = preds.probs.values.cols();
  double hits = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (row_argmax(preds.probs.values.row(i), k) ==
        static_cast<std::size_t>(preds.labels[i])) {
      hits += 1.0;
    }
  }
  return hits / static_cast<double>(n);
}

LogitBatch scale_logits(const LogitBatch& logits, double temperature) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("temperature " + std::to_string(temperature) +
                                " must be > 0");
  }
  LogitBatch out = logits;
  for (std::size_t i = 0; i < out.values.rows() * out.values.cols(); ++i) {
    out.values.data()[i] /= temperature;
  }
  return out;
}

TemperatureResult temperature_search(const LogitBatch& logits, const std::vector<int>& labels,
                                     std::span<const double> grid, std::size_t num_bins) {
  if (grid.empty()) throw std::invalid_argument("temperature grid is empty");
  for (double t : grid) {
    if (!(t > 0.0)) {
      throw std::invalid_argument("temperature grid entry " + std::to_string(t) +
                                  " must be > 0");
    }
  }
  TemperatureResult best;
  bool have_best = false;
  for (double t : grid) {
    const double e = ece(make_predictions(scale_logits(logits, t), labels), num_bins);
    if (!have_best || e < best.post_ece || (e == best.post_ece && t < best.temperature)) {
      best.temperature = t;
      best.post_ece = e;
      have_best = true;
    }
  }
  return best;
}

std::vector<double> make_temperature_grid(double lo, double hi, double step) {
  if (!(lo > 0.0) || !(step > 0.0) || !(hi >= lo)) {
    throw std::invalid_argument("temperature grid bounds " + std::to_string(lo) + ":" +
                                std::to_string(hi) + ":" + std::to_string(step) +
                                " (need 0 < lo <= hi, step > 0)");
  }
  std::vector<double> grid;
  for (std::size_t i = 0;; ++i) {
    const double t = lo + static_cast<double>(i) * step;
    if (t > hi + step * 1e-9) break;
    grid.push_back(t);
  }
  return grid;
}

std::string reliability_to_json(const ReliabilityBins& bins) {
  nlohmann::json doc;
  doc["scheme"] = to_string(bins.scheme);
  doc["num_bins"] = bins.num_bins;
  nlohmann::json arr = nlohmann::json::array();
  for (const BinSummary& bin : bins.bins) {
    nlohmann::json entry;
    entry["lower"] = bin.lower_edge;
    entry["upper"] = bin.upper_edge;
    entry["count"] = bin.count;
    entry["mean_confidence"] = bin.mean_confidence;
    entry["accuracy"] = bin.accuracy;
    arr.push_back(entry);
  }
  doc["bins"] = arr;
  return doc.dump(2);
}

}  // namespace cals
