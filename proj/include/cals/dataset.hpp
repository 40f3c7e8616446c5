#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "cals/matrix.hpp"

namespace cals {

// Labeled feature vectors. class_counts is the label histogram.
struct Dataset {
  Matrix features;                      // [N x D]
  std::vector<int> labels;              // [N]
  std::size_t num_classes = 0;          // K
  std::vector<std::size_t> class_counts;  // [K], sums to N
};

struct SplitDataset {
  Dataset train;
  Dataset validation;
  Dataset test;
};

// Isotropic Gaussian blobs, one per class, with counts[k] samples of class
// k. Class means form a fixed geometric arrangement (orthogonal corners when
// D >= K, a circle in the first two coordinates when 2 <= D < K, a line when
// D = 1) scaled so neighbouring means sit class_separation apart; only the
// noise depends on the seed. Rows are grouped by class in ascending label
// order.
Dataset gaussian_mixture(std::size_t num_classes, const std::vector<std::size_t>& counts,
                         std::size_t dim, double class_separation, double noise_sigma,
                         std::uint64_t seed);

// Exponentially decaying class counts: count_k = round(max_count *
// ratio^(-k/(K-1))), so the head class gets max_count and the tail class
// round(max_count / ratio).
std::vector<std::size_t> long_tailed_counts(std::size_t num_classes, std::size_t max_count,
                                            double imbalance_ratio);

// Partition into train/validation/test by the given fractions (non-negative,
// summing to 1). Stratified splits treat each class independently; leftover
// samples from the floor-rounding of the validation and test shares go to
// train. A fraction > 0 that ends up with zero samples is a domain error.
SplitDataset split(const Dataset& dataset, double train_fraction, double val_fraction,
                   double test_fraction, bool stratified, std::uint64_t seed);

// CSV with header f0,...,f{D-1},label. Loading validates the label range and
// rebuilds class_counts.
void dump_csv(const Dataset& dataset, std::ostream& out);
Dataset load_csv(std::istream& in);

}  // namespace cals
