#include "cals/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cals {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<std::vector<double>> class_means(std::size_t num_classes, std::size_t dim,
                                             double separation) {
  std::vector<std::vector<double>> means(num_classes, std::vector<double>(dim, 0.0));
  if (dim >= num_classes) {
    // Orthogonal corners: ||m_i - m_j|| = separation for every pair.
    const double radius = separation / std::sqrt(2.0);
    for (std::size_t k = 0; k < num_classes; ++k) means[k][k] = radius;
  } else if (dim >= 2) {
    // Circle in the first two coordinates with neighbouring means
    // separation apart: chord 2 R sin(pi/K) = separation.
    const double radius = separation / (2.0 * std::sin(kPi / static_cast<double>(num_classes)));
    for (std::size_t k = 0; k < num_classes; ++k) {
      const double angle = 2.0 * kPi * static_cast<double>(k) / static_cast<double>(num_classes);
      means[k][0] = radius * std::cos(angle);
      means[k][1] = radius * std::sin(angle);
    }
  } else {
    for (std::size_t k = 0; k < num_classes; ++k) {
      means[k][0] = separation * static_cast<double>(k);
    }
  }
  return means;
}

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.num_classes = dataset.num_classes;
  out.features = Matrix(indices.size(), dataset.features.cols());
  out.labels.resize(indices.size());
  out.class_counts.assign(dataset.num_classes, 0);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const double* src = dataset.features.row(indices[r]);
    std::copy(src, src + dataset.features.cols(), out.features.row(r));
    out.labels[r] = dataset.labels[indices[r]];
    out.class_counts[static_cast<std::size_t>(out.labels[r])] += 1;
  }
  return out;
}

}  // namespace

Dataset gaussian_mixture(std::size_t num_classes, const std::vector<std::size_t>& counts,
                         std::size_t dim, double class_separation, double noise_sigma,
                         std::uint64_t seed) {
  if (num_classes < 2) {
    throw std::domain_error("gaussian mixture needs at least 2 classes, got " +
                            std::to_string(num_classes));
  }
  if (counts.size() != num_classes) {
    throw std::domain_error("gaussian mixture: " + std::to_string(counts.size()) +
                            " counts for " + std::to_string(num_classes) + " classes");
  }
  if (dim < 1) throw std::domain_error("gaussian mixture needs dim >= 1");
  if (!(class_separation > 0.0)) {
    throw std::domain_error("class separation must be > 0, got " +
                            std::to_string(class_separation));
  }
  if (!(noise_sigma >= 0.0)) {
    throw std::domain_error("noise sigma must be >= 0, got " + std::to_string(noise_sigma));
  }
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (total == 0) throw std::domain_error("gaussian mixture with zero total samples");

  const std::vector<std::vector<double>> means = class_means(num_classes, dim, class_separation);
  Dataset out;
  out.num_classes = num_classes;
  out.features = Matrix(total, dim);
  out.labels.resize(total);
  out.class_counts = counts;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> standard_normal(0.0, 1.0);
  std::size_t row = 0;
  for (std::size_t k = 0; k < num_classes; ++k) {
    for (std::size_t i = 0; i < counts[k]; ++i, ++row) {
      double* dst = out.features.row(row);
      for (std::size_t d = 0; d < dim; ++d) {
        // sigma scales a standard draw, so sigma = 0 degenerates cleanly to
        // the class mean while consuming the same random stream.
        dst[d] = means[k][d] + noise_sigma * standard_normal(rng);
      }
      out.labels[row] = static_cast<int>(k);
    }
  }
  return out;
}

std::vector<std::size_t> long_tailed_counts(std::size_t num_classes, std::size_t max_count,
                                            double imbalance_ratio) {
  if (num_classes < 1) throw std::domain_error("long_tailed_counts needs at least 1 class");
  if (max_count < 1) throw std::domain_error("long_tailed_counts needs max_count >= 1");
  if (!(imbalance_ratio >= 1.0)) {
    throw std::domain_error("imbalance ratio must be >= 1, got " +
                            std::to_string(imbalance_ratio));
  }
  std::vector<std::size_t> counts(num_classes);
  counts[0] = max_count;
  for (std::size_t k = 1; k < num_classes; ++k) {
    const double exponent =
        -static_cast<double>(k) / static_cast<double>(num_classes - 1);
    const double value = static_cast<double>(max_count) * std::pow(imbalance_ratio, exponent);
    counts[k] = static_cast<std::size_t>(std::llround(value));
  }
  return counts;
}

SplitDataset split(const Dataset& dataset, double train_fraction, double val_fraction,
                   double test_fraction, bool stratified, std::uint64_t seed) {
  const double fractions[3] = {train_fraction, val_fraction, test_fraction};
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw std::domain_error("split fraction " + std::to_string(f) + " < 0");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::domain_error("split fractions sum to " + std::to_string(sum) + ", expected 1");
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;

  // Shuffle a group of indices, carve validation/test by floor shares, and
  // give the remainder to train.
  auto carve = [&](std::vector<std::size_t>& group) {
    std::shuffle(group.begin(), group.end(), rng);
    const std::size_t n = group.size();
    const std::size_t n_val = static_cast<std::size_t>(
        std::floor(val_fraction * static_cast<double>(n)));
    const std::size_t n_test = static_cast<std::size_t>(
        std::floor(test_fraction * static_cast<double>(n)));
    const std::size_t n_train = n - n_val - n_test;
    for (std::size_t i = 0; i < n; ++i) {
      if (i < n_train) {
        train_idx.push_back(group[i]);
      } else if (i < n_train + n_val) {
        val_idx.push_back(group[i]);
      } else {
        test_idx.push_back(group[i]);
      }
    }
  };

  if (stratified) {
    for (std::size_t k = 0; k < dataset.num_classes; ++k) {
      std::vector<std::size_t> group;
      for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
        if (static_cast<std::size_t>(dataset.labels[i]) == k) group.push_back(i);
      }
      carve(group);
    }
  } else {
    std::vector<std::size_t> group(dataset.labels.size());
    std::iota(group.begin(), group.end(), 0);
    carve(group);
  }

  if (train_fraction > 0.0 && train_idx.empty()) {
    throw std::domain_error("split: train fraction > 0 yet received zero samples");
  }
  if (val_fraction > 0.0 && val_idx.empty()) {
    throw std::domain_error("split: validation fraction > 0 yet received zero samples");
  }
  if (test_fraction > 0.0 && test_idx.empty()) {
    throw std::domain_error("split: test fraction > 0 yet received zero samples");
  }

  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return SplitDataset{subset(dataset, train_idx), subset(dataset, val_idx),
                      subset(dataset, test_idx)};
}

void dump_csv(const Dataset& dataset, std::ostream& out) {
  const std::size_t dim = dataset.features.cols();
  for (std::size_t d = 0; d < dim; ++d) out << 'f' << d << ',';
  out << "label\n";
  char buffer[64];
  for (std::size_t i = 0; i < dataset.features.rows(); ++i) {
    const double* row = dataset.features.row(i);
    for (std::size_t d = 0; d < dim; ++d) {
      std::snprintf(buffer, sizeof(buffer), "%.17g", row[d]);
      out << buffer << ',';
    }
    out << dataset.labels[i] << '\n';
  }
}

Dataset load_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset csv: missing header");
  std::size_t dim = 0;
  {
    std::stringstream header(line);
    std::string token;
    std::vector<std::string> tokens;
    while (std::getline(header, token, ',')) tokens.push_back(token);
    if (tokens.empty() || tokens.back() != "label") {
      throw std::runtime_error("dataset csv: header must end with 'label'");
    }
    dim = tokens.size() - 1;
  }
  if (dim == 0) throw std::runtime_error("dataset csv: no feature columns");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string token;
    std::vector<std::string> tokens;
    while (std::getline(row, token, ',')) tokens.push_back(token);
    if (tokens.size() != dim + 1) {
      throw std::runtime_error("dataset csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(dim + 1) + " fields, got " +
                               std::to_string(tokens.size()));
    }
    try {
      for (std::size_t d = 0; d < dim; ++d) values.push_back(std::stod(tokens[d]));
      labels.push_back(std::stoi(tokens[dim]));
    } catch (const std::exception&) {
      throw std::runtime_error("dataset csv line " + std::to_string(line_no) +
                               ": unparseable field");
    }
    if (labels.back() < 0) {
      throw std::runtime_error("dataset csv line " + std::to_string(line_no) +
                               ": negative label");
    }
  }
  if (labels.empty()) throw std::runtime_error("dataset csv: no data rows");

  Dataset out;
  out.features = Matrix(labels.size(), dim);
  std::copy(values.begin(), values.end(), out.features.data().begin());
  out.labels = labels;
  out.num_classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  out.class_counts.assign(out.num_classes, 0);
  for (int label : labels) out.class_counts[static_cast<std::size_t>(label)] += 1;
  return out;
}

}  // namespace cals
