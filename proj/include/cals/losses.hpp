#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cals/alm.hpp"
#include "cals/matrix.hpp"
#include "cals/nn.hpp"
#include "cals/penalty.hpp"

namespace cals {

enum class LossKind { ce, ls, fl, flsd, ecp, mbls, cals_alm, cals_hr };

const char* to_string(LossKind kind);
std::optional<LossKind> loss_kind_from_string(std::string_view name);

// Which training loss to run and its hyper-parameters. Defaults follow the
// common settings for these losses: alpha 0.05, focal gamma 3, penalty
// weights 0.1, margin 10.
struct LossSelection {
  LossKind kind = LossKind::cals_alm;
  double smoothing_alpha = 0.05;  // LS, in [0, 1)
  double focal_gamma = 3.0;       // FL, >= 0
  double ecp_weight = 0.1;        // >= 0
  double mbls_weight = 0.1;       // >= 0
  double margin = 10.0;           // > 0 for MbLS / CALS kinds
  PenaltyKind penalty = PenaltyKind::phr;  // CALS kinds

  bool operator==(const LossSelection&) const = default;
};

// Per-sample loss values with the gradient of each sample's value with
// respect to that sample's logits.
struct BatchLoss {
  std::vector<double> per_sample;  // [batch]
  Matrix logit_grads;              // [batch x K]
};

// -log s_y per sample; gradient s - onehot(y).
BatchLoss cross_entropy(const LogitBatch& logits, const std::vector<int>& labels);

// Cross-entropy against (1 - alpha) * onehot + alpha / K.
BatchLoss label_smoothing_loss(const LogitBatch& logits, const std::vector<int>& labels,
                               double alpha);

// -(1 - s_y)^gamma * log s_y.
BatchLoss focal_loss(const LogitBatch& logits, const std::vector<int>& labels, double gamma);

// Focal loss with sample-dependent gamma: 5 when s_y < 0.2, else 3.
BatchLoss flsd_loss(const LogitBatch& logits, const std::vector<int>& labels);

// Cross-entropy minus weight times the Shannon entropy of the prediction.
BatchLoss ecp_loss(const LogitBatch& logits, const std::vector<int>& labels, double weight);

// d_k = max_j l_j - l_k, per sample. Non-negative, zero at the argmax.
// Subgradients of the max route to the single argmax index, ties broken by
// lowest class index.
Matrix logit_distances(const LogitBatch& logits);

// sum_j max(0, d_j - margin) per sample.
BatchLoss mbls_penalty(const LogitBatch& logits, double margin);

// (1/K) sum_k P(d_k / margin - 1, rho_k, lambda_k) per sample. The class
// index of lambda_k / rho_k is the logit position, not the sample's label.
BatchLoss cals_penalty(const LogitBatch& logits, double margin,
                       std::span<const double> lambdas, std::span<const double> rhos,
                       PenaltyKind kind);

// Batch-mean loss with gradient of the mean.
struct TotalLoss {
  double value = 0.0;
  Matrix logit_grads;  // [batch x K]
};

// CE (or the selected replacement loss) plus the selected penalty, averaged
// over the batch. CALS kinds require the multiplier state (length-K lambdas
// and rhos); passing none throws std::invalid_argument.
TotalLoss total_loss(const LossSelection& selection, const LogitBatch& logits,
                     const std::vector<int>& labels,
                     const MultiplierState* multipliers = nullptr);

}  // namespace cals
