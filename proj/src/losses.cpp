#include "cals/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cals {
namespace {

// Stable per-row softmax bookkeeping: log-probabilities and probabilities
// computed via the max-shifted log-sum-exp.
struct RowSoftmax {
  std::vector<double> log_probs;
  std::vector<double> probs;
};

RowSoftmax row_softmax(const double* logits, std::size_t k) {
  RowSoftmax out;
  out.log_probs.resize(k);
  out.probs.resize(k);
  double max_logit = logits[0];
  for (std::size_t j = 1; j < k; ++j) max_logit = std::max(max_logit, logits[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < k; ++j) sum += std::exp(logits[j] - max_logit);
  const double lse = max_logit + std::log(sum);
  for (std::size_t j = 0; j < k; ++j) {
    out.log_probs[j] = logits[j] - lse;
    out.probs[j] = std::exp(out.log_probs[j]);
  }
  return out;
}

void check_labels(const LogitBatch& logits, const std::vector<int>& labels) {
  const std::size_t batch = logits.values.rows();
  const std::size_t k = logits.values.cols();
  if (labels.size() != batch) {
    throw std::invalid_argument("loss: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(batch) + " rows of logits");
  }
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw std::invalid_argument("loss: label " + std::to_string(labels[i]) + " at row " +
                                  std::to_string(i) + " outside [0, " + std::to_string(k) + ")");
    }
  }
}

std::size_t row_argmax(const double* row, std::size_t k) {
  // std::max_element keeps the first of equal maxima, i.e. the lowest index.
  return static_cast<std::size_t>(std::max_element(row, row + k) - row);
}

}  // namespace

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::ce: return "ce";
    case LossKind::ls: return "ls";
    case LossKind::fl: return "fl";
    case LossKind::flsd: return "flsd";
    case LossKind::ecp: return "ecp";
    case LossKind::mbls: return "mbls";
    case LossKind::cals_alm: return "cals_alm";
    case LossKind::cals_hr: return "cals_hr";
  }
  return "?";
}

std::optional<LossKind> loss_kind_from_string(std::string_view name) {
  if (name == "ce") return LossKind::ce;
  if (name == "ls") return LossKind::ls;
  if (name == "fl") return LossKind::fl;
  if (name == "flsd") return LossKind::flsd;
  if (name == "ecp") return LossKind::ecp;
  if (name == "mbls") return LossKind::mbls;
  if (name == "cals_alm") return LossKind::cals_alm;
  if (name == "cals_hr") return LossKind::cals_hr;
  return std::nullopt;
}

BatchLoss cross_entropy(const LogitBatch& logits, const std::vector<int>& labels) {
  check_labels(logits, labels);
  const std::size_t batch = logits.values.rows();
  const std::size_t k = logits.values.cols();
  BatchLoss out;
  out.per_sample.resize(batch);
  out.logit_grads = Matrix(batch, k);
  for (std::size_t i = 0; i < batch; ++i) {
    const RowSoftmax sm = row_softmax(logits.values.row(i), k);
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    out.per_sample[i] = -sm.log_probs[y];
    double* grad = out.logit_grads.row(i);
    for (std::size_t j = 0; j < k; ++j) grad[j] = sm.probs[j];
    grad[y] -= 1.0;
  }
  return out;
}

BatchLoss label_smoothing_loss(const LogitBatch& logits, const std::vector<int>& labels,
                               double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("label smoothing alpha " + std::to_string(alpha) +
                                " outside [0, 1)");
  }
  check_labels(logits, labels);
  const std::size_t batch = logits.values.rows();
  const std::size_t k = logits.values.cols();
  BatchLoss out;
  out.per_sample.resize(batch);
  out.logit_grads = Matrix(batch, k);
  const double uniform = alpha / static_cast<double>(k);
  for (std::size_t i = 0; i < batch; ++i) {
    const RowSoftmax sm = row_softmax(logits.values.row(i), k);
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    double value = 0.0;
    double* grad = out.logit_grads.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      const double target = uniform + (j == y ? 1.0 - alpha : 0.0);
      value -= target * sm.log_probs[j];
      grad[j] = sm.probs[j] - target;
    }
    out.per_sample[i] = value;
  }
  return out;
}

namespace {

// Focal term for one sample given gamma. With p = s_y:
//   v = -(1 - p)^gamma * log p
//   dv/dl_k = A * (delta_{ky} - s_k),  A = gamma * p * (1-p)^(gamma-1) * log p - (1-p)^gamma
// At gamma = 0 the first term of A vanishes and the loss reduces to CE.
void focal_row(const RowSoftmax& sm, std::size_t y, double gamma, std::size_t k,
               double& value, double* grad) {
  const double p = sm.probs[y];
  const double logp = sm.log_probs[y];
  const double q = 1.0 - p;
  value = -std::pow(q, gamma) * logp;
  const double scale = gamma > 0.0 ? gamma * p * std::pow(q, gamma - 1.0) * logp : 0.0;
  const double a = scale - std::pow(q, gamma);
  for (std::size_t j = 0; j < k; ++j) grad[j] = a * ((j == y ? 1.0 : 0.0) - sm.probs[j]);
}

}  // namespace

BatchLoss focal_loss(const LogitBatch& logits, const std::vector<int>& labels, double gamma) {
  if (!(gamma >= 0.0)) {
    throw std::invalid_argument("focal gamma " + std::to_string(gamma) + " must be >= 0");
  }
  check_labels(logits, labels);
  const std::size_t batch = logits.values.rows();
  const std::size_t k = logits.values.cols();
  BatchLoss out;
  out.per_sample.resize(batch);
  out.logit_grads = Matrix(batch, k);
  for (std::size_t i = 0; i < batch; ++i) {
    const RowSoftmax sm = row_softmax(logits.values.row(i), k);
    focal_row(sm, static_cast<std::size_t>(labels[i]), gamma, k, out.per_sample[i],
              out.logit_grads.row(i));
  }
  return out;
}

BatchLoss flsd_loss(const LogitBatch& logits, const std::vector<int>& labels) {
  check_labels(logits, labels);
  const std::size_t batch = logits.values.rows();
  const std::size_t k = logits.values.cols();
  BatchLoss out;
  out.per_sample.resize(batch);
  out.logit_grads = Matrix(batch, k);
  for (std::size_t i = 0; i < batch; ++i) {
    const RowSoftmax sm = row_softmax(logits.values.row(i), k);
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    // Gamma switches on the confidence in the true class; treated as a
    // constant of the sample, so it does not contribute to the gradient.
    const double gamma = sm.probs[y] < 0.2 ? 5.0 : 3.0;
    focal_row(sm, y, gamma, k, out.per_sample[i], out.logit_grads.row(i));
  }
  return out;
}

BatchLoss ecp_loss(const LogitBatch& logits, const std::vector<int>& labels, double weight) {
  if (!(weight >= 0.0)) {
    throw std::invalid_argument("entropy penalty weight " + std::to_string(weight) +
                                " must be >= 0");
  }
  check_labels(logits, labels);
  const std::size_t batch = logits.values.rows();
  const std::size_t k = logits.values.cols();
  BatchLoss out;
  out.per_sample.resize(batch);
  out.logit_grads = Matrix(batch, k);
  for (std::size_t i = 0; i < batch; ++i) {
    const RowSoftmax sm = row_softmax(logits.values.row(i), k);
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    // H = -sum_k s_k log s_k, dH/dl_k = -s_k (log s_k + H).
    double entropy = 0.0;
    for (std::size_t j = 0; j < k; ++j) entropy -= sm.probs[j] * sm.log_probs[j];
    out.per_sample[i] = -sm.log_probs[y] - weight * entropy;
    double* grad = out.logit_grads.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      const double dh = -sm.probs[j] * (sm.log_probs[j] + entropy);
      grad[j] = sm.probs[j] - (j == y ? 1.0 : 0.0) - weight * dh;
    }
  }
  return out;
}

Matrix logit_distances(const LogitBatch& logits) {
  const std::size_t batch = logits.values.rows();
  const std::size_t k = logits.values.cols();
  Matrix out(batch, k);
  for (std::size_t i = 0; i < batch; ++i) {
    const double* row = logits.values.row(i);
    const double top = row[row_argmax(row, k)];
    for (std::size_t j = 0; j < k; ++j) out(i, j) = top - row[j];
  }
  return out;
}

BatchLoss mbls_penalty(const LogitBatch& logits, double margin) {
  if (!(margin > 0.0)) {
    throw std::invalid_argument("margin " + std::to_string(margin) + " must be > 0");
  }
  const std::size_t batch = logits.values.rows();
  const std::size_t k = logits.values.cols();
  BatchLoss out;
  out.per_sample.resize(batch);
  out.logit_grads = Matrix(batch, k);
  for (std::size_t i = 0; i < batch; ++i) {
    const double* row = logits.values.row(i);
    const std::size_t amax = row_argmax(row, k);
    const double top = row[amax];
    double value = 0.0;
    double* grad = out.logit_grads.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      const double excess = (top - row[j]) - margin;
      if (excess > 0.0) {
        value += excess;
        grad[j] -= 1.0;
        grad[amax] += 1.0;  // d(top)/dl_amax through the max
      }
    }
    out.per_sample[i] = value;
  }
  return out;
}

BatchLoss cals_penalty(const LogitBatch& logits, double margin,
                       std::span<const double> lambdas, std::span<const double> rhos,
                       PenaltyKind kind) {
  if (!(margin > 0.0)) {
    throw std::invalid_argument("margin " + std::to_string(margin) + " must be > 0");
  }
  const std::size_t batch = logits.values.rows();
  const std::size_t k = logits.values.cols();
  if (lambdas.size() != k || rhos.size() != k) {
    throw std::invalid_argument("cals penalty: " + std::to_string(lambdas.size()) +
                                " lambdas / " + std::to_string(rhos.size()) + " rhos for " +
                                std::to_string(k) + " classes");
  }
  BatchLoss out;
  out.per_sample.resize(batch);
  out.logit_grads = Matrix(batch, k);
  const double inv_k = 1.0 / static_cast<double>(k);
  for (std::size_t i = 0; i < batch; ++i) {
    const double* row = logits.values.row(i);
    const std::size_t amax = row_argmax(row, k);
    const double top = row[amax];
    double value = 0.0;
    double deriv_sum = 0.0;
    double* grad = out.logit_grads.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      const PenaltyArgs args((top - row[j]) / margin - 1.0, rhos[j], lambdas[j]);
      value += penalty_value(kind, args);
      const double deriv = penalty_derivative(kind, args);
      deriv_sum += deriv;
      // d z_j / dl_j = -1/margin (plus +1/margin through the max, handled
      // below for the argmax position).
      grad[j] -= deriv * inv_k / margin;
    }
    grad[amax] += deriv_sum * inv_k / margin;
    out.per_sample[i] = value * inv_k;
  }
  return out;
}

namespace {

void add_scaled(Matrix& into, const Matrix& from, double scale) {
  for (std::size_t i = 0; i < into.rows() * into.cols(); ++i) {
    into.data()[i] += scale * from.data()[i];
  }
}

}  // namespace

TotalLoss total_loss(const LossSelection& selection, const LogitBatch& logits,
                     const std::vector<int>& labels, const MultiplierState* multipliers) {
  const std::size_t batch = logits.values.rows();
  if (batch == 0) throw std::invalid_argument("total loss of an empty batch");
  const double inv_b = 1.0 / static_cast<double>(batch);

  BatchLoss base;
  switch (selection.kind) {
    case LossKind::ls:
      base = label_smoothing_loss(logits, labels, selection.smoothing_alpha);
      break;
    case LossKind::fl:
      base = focal_loss(logits, labels, selection.focal_gamma);
      break;
    case LossKind::flsd:
      base = flsd_loss(logits, labels);
      break;
    case LossKind::ecp:
      base = ecp_loss(logits, labels, selection.ecp_weight);
      break;
    default:
      base = cross_entropy(logits, labels);
      break;
  }

  TotalLoss out;
  out.logit_grads = Matrix(batch, logits.values.cols());
  double total = 0.0;
  for (double v : base.per_sample) total += v;
  add_scaled(out.logit_grads, base.logit_grads, inv_b);

  if (selection.kind == LossKind::mbls) {
    BatchLoss pen = mbls_penalty(logits, selection.margin);
    for (double v : pen.per_sample) total += selection.mbls_weight * v;
    add_scaled(out.logit_grads, pen.logit_grads, selection.mbls_weight * inv_b);
  } else if (selection.kind == LossKind::cals_alm || selection.kind == LossKind::cals_hr) {
    if (multipliers == nullptr) {
      throw std::invalid_argument("cals loss requires multiplier state");
    }
    BatchLoss pen = cals_penalty(logits, selection.margin, multipliers->lambdas,
                                 multipliers->rhos, selection.penalty);
    for (double v : pen.per_sample) total += v;
    add_scaled(out.logit_grads, pen.logit_grads, inv_b);
  }

  out.value = total * inv_b;
  return out;
}

}  // namespace cals
