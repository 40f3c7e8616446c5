// Shared helpers for the test binaries: seeded generators that keep inputs
// away from branch boundaries, independent brute-force oracles for the
// calibration metrics, and finite-difference utilities.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "cals/losses.hpp"
#include "cals/matrix.hpp"
#include "cals/metrics.hpp"
#include "cals/nn.hpp"

namespace test_support {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Mixed absolute/relative error: |a - b| / max(1, |a|, |b|).
inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Random logits with every row's top-two gap above `min_gap`, keeping the
// argmax subgradient away from ties.
inline cals::LogitBatch random_logits(Rng& rng, std::size_t rows, std::size_t cols,
                                      double lo = -4.0, double hi = 4.0,
                                      double min_gap = 1e-2) {
  cals::LogitBatch batch;
  batch.values = cals::Matrix(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    while (true) {
      for (std::size_t j = 0; j < cols; ++j) batch.values(i, j) = uniform(rng, lo, hi);
      std::vector<double> sorted(batch.values.row(i), batch.values.row(i) + cols);
      std::sort(sorted.begin(), sorted.end());
      if (cols < 2 || sorted[cols - 1] - sorted[cols - 2] > min_gap) break;
    }
  }
  return batch;
}

inline std::vector<int> random_labels(Rng& rng, std::size_t rows, std::size_t num_classes) {
  std::vector<int> labels(rows);
  for (int& label : labels) label = uniform_int(rng, 0, static_cast<int>(num_classes) - 1);
  return labels;
}

// Central difference of a scalar function of the logits, entry by entry.
inline cals::Matrix fd_logit_gradient(const std::function<double(const cals::LogitBatch&)>& f,
                                      const cals::LogitBatch& logits, double step = 1e-6) {
  cals::Matrix grad(logits.values.rows(), logits.values.cols());
  cals::LogitBatch probe = logits;
  for (std::size_t i = 0; i < grad.rows(); ++i) {
    for (std::size_t j = 0; j < grad.cols(); ++j) {
      const double saved = probe.values(i, j);
      const double h = step * std::max(1.0, std::abs(saved));
      probe.values(i, j) = saved + h;
      const double up = f(probe);
      probe.values(i, j) = saved - h;
      const double down = f(probe);
      probe.values(i, j) = saved;
      grad(i, j) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

// Worst mixed relative error between two gradient matrices.
inline double max_gradient_error(const cals::Matrix& a, const cals::Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      worst = std::max(worst, relative_error(a(i, j), b(i, j)));
    }
  }
  return worst;
}

// ---- Brute-force metric oracles ------------------------------------------
//
// Deliberately naive second implementations of the binned calibration
// errors: explicit membership test per bin, quadratic loops, no shared code
// with the library.

inline bool in_width_bin(double conf, std::size_t bin, std::size_t num_bins) {
  const double lower = static_cast<double>(bin) / static_cast<double>(num_bins);
  const double upper = static_cast<double>(bin + 1) / static_cast<double>(num_bins);
  if (bin == 0) return conf <= upper;
  if (bin == num_bins - 1) return conf > lower;
  return conf > lower && conf <= upper;
}

inline double naive_binned_error_width(const std::vector<double>& conf,
                                       const std::vector<char>& correct,
                                       std::size_t num_bins) {
  const std::size_t n = conf.size();
  double total = 0.0;
  for (std::size_t b = 0; b < num_bins; ++b) {
    double count = 0.0;
    double conf_sum = 0.0;
    double hit_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_width_bin(conf[i], b, num_bins)) continue;
      count += 1.0;
      conf_sum += conf[i];
      hit_sum += correct[i] ? 1.0 : 0.0;
    }
    if (count == 0.0) continue;
    total += count / static_cast<double>(n) * std::abs(hit_sum / count - conf_sum / count);
  }
  return total;
}

inline void naive_top_prediction(const cals::PredictionSet& preds, std::vector<double>& conf,
                                 std::vector<char>& correct) {
  const std::size_t n = preds.probs.values.rows();
  const std::size_t k = preds.probs.values.cols();
  conf.assign(n, 0.0);
  correct.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (preds.probs.values(i, j) > preds.probs.values(i, best)) best = j;
    }
    conf[i] = preds.probs.values(i, best);
    correct[i] = best == static_cast<std::size_t>(preds.labels[i]) ? 1 : 0;
  }
}

inline double naive_ece(const cals::PredictionSet& preds, std::size_t num_bins) {
  std::vector<double> conf;
  std::vector<char> correct;
  naive_top_prediction(preds, conf, correct);
  return naive_binned_error_width(conf, correct, num_bins);
}

inline double naive_aece(const cals::PredictionSet& preds, std::size_t num_bins) {
  std::vector<double> conf;
  std::vector<char> correct;
  naive_top_prediction(preds, conf, correct);
  const std::size_t n = conf.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return conf[a] < conf[b]; });
  double total = 0.0;
  std::size_t cursor = 0;
  for (std::size_t b = 0; b < num_bins; ++b) {
    std::size_t take = n / num_bins + (b < n % num_bins ? 1 : 0);
    if (take == 0) continue;
    double conf_sum = 0.0;
    double hit_sum = 0.0;
    for (std::size_t t = 0; t < take; ++t) {
      conf_sum += conf[order[cursor]];
      hit_sum += correct[order[cursor]] ? 1.0 : 0.0;
      ++cursor;
    }
    const double count = static_cast<double>(take);
    total += count / static_cast<double>(n) * std::abs(hit_sum / count - conf_sum / count);
  }
  return total;
}

inline double naive_cwce(const cals::PredictionSet& preds, std::size_t num_bins) {
  const std::size_t n = preds.probs.values.rows();
  const std::size_t k = preds.probs.values.cols();
  double total = 0.0;
  for (std::size_t cls = 0; cls < k; ++cls) {
    std::vector<double> conf(n);
    std::vector<char> correct(n);
    for (std::size_t i = 0; i < n; ++i) {
      conf[i] = preds.probs.values(i, cls);
      correct[i] = static_cast<std::size_t>(preds.labels[i]) == cls ? 1 : 0;
    }
    total += naive_binned_error_width(conf, correct, num_bins);
  }
  return total / static_cast<double>(k);
}

// Random prediction set with well-separated confidences (no exact bin-edge
// values, which double-precision random draws never produce anyway).
inline cals::PredictionSet random_predictions(Rng& rng, std::size_t n, std::size_t k) {
  const cals::LogitBatch logits = random_logits(rng, n, k, -3.0, 3.0, 1e-6);
  return cals::make_predictions(logits, random_labels(rng, n, k));
}

}  // namespace test_support
