#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cals/alm.hpp"
#include "cals/dataset.hpp"
#include "cals/losses.hpp"
#include "cals/metrics.hpp"
#include "cals/nn.hpp"

namespace cals {

// Training-run settings. Defaults are the published hyper-parameters for
// the class-adaptive method: lambda0 1e-6, rho0 1, gamma 1.2, tau 0.9,
// rho update period 10, safeguards [1e-6, 1e6], hr_mu = hr_tau = 1.1.
struct TrainConfig {
  LossSelection loss;  // kind, margin, penalty kind, per-loss knobs
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  double step_size = 0.05;
  double momentum = 0.9;
  double initial_lambda = 1e-6;   // lambda^(0), broadcast over classes
  double initial_rho = 1.0;       // rho^(0)
  double gamma = 1.2;             // rho growth factor, > 1
  double improvement_tau = 0.9;   // violation-decrease threshold, in (0, 1)
  std::size_t rho_update_period = 10;  // epochs between rho checks
  double safeguard_lo = 1e-6;
  double safeguard_hi = 1e6;
  double hr_mu = 1.1;   // heuristic multiplier step, > 1
  double hr_tau = 1.1;  // heuristic comparison threshold, > 1
  std::uint64_t seed = 1;

  bool operator==(const TrainConfig&) const = default;
};

// Throws std::domain_error naming the first out-of-domain field.
void validate_train_config(const TrainConfig& config);

// One row of the training history.
struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_ece = 0.0;
  double mean_lambda = 0.0;
  double mean_rho = 0.0;
  std::vector<double> per_class_lambda;           // [K]
  std::vector<double> per_class_mean_constraint;  // [K], avg of d_k/m - 1
};

// Per-class statistics from one deterministic pass over a held-out set.
// Penalty fields are filled only when a multiplier state is supplied.
struct ValidationStats {
  LogitBatch logits;
  std::vector<double> mean_constraint;          // [K], avg of d_k/m - 1
  std::vector<double> mean_penalty_derivative;  // [K], avg of P'(z_k, rho_k, lambda_k)
  std::vector<double> mean_penalty_value;       // [K], avg of P(z_k, rho_k, lambda_k)
};

ValidationStats evaluate_validation(const Network& net, const Dataset& val_data,
                                    const LossSelection& selection,
                                    const MultiplierState* state);

// One pass over the training set: epoch-seeded shuffle, mini-batch forward /
// loss / backward / SGD step. Returns the mean per-sample loss. The final
// short batch is averaged by its true size. Multiplier state must be
// present exactly when the loss is a CALS kind. Throws numerical_error with
// the batch index when the loss turns non-finite.
double train_epoch(Network& net, const Dataset& train_data, const TrainConfig& config,
                   std::size_t epoch, const MultiplierState* state, Gradients& velocity);

// lambda_k <- clip(average over validation samples of P'(d_k/m - 1, rho_k,
// lambda_k)); the first-order multiplier estimate.
MultiplierState validation_multiplier_update(const ValidationStats& stats,
                                             const MultiplierState& state,
                                             const TrainConfig& config);
MultiplierState validation_multiplier_update(const Network& net, const Dataset& val_data,
                                             const MultiplierState& state,
                                             const TrainConfig& config);

// On epochs that are multiples of rho_update_period: grow rho_k by gamma
// where the mean constraint failed to drop below tau times its previous
// (positive part) value, then store the new constraint means. The history
// advances only on those check epochs, so comparisons span one period.
// Other epochs are a no-op.
MultiplierState validation_rho_update(const MultiplierState& state,
                                      const std::vector<double>& val_mean_constraints,
                                      std::size_t epoch, const TrainConfig& config);

// Heuristic rule: lambda_k <- mu * lambda_k when the class penalty grew
// (curr > tau * prev), lambda_k / mu when it shrank (prev > tau * curr),
// unchanged otherwise; clipped to the safeguards. rho is untouched.
MultiplierState hr_multiplier_update(const MultiplierState& state,
                                     const std::vector<double>& penalty_curr,
                                     const std::vector<double>& penalty_prev,
                                     const TrainConfig& config);

struct TrainResult {
  Network net;
  LogitBatch val_logits;
  LogitBatch test_logits;
  PredictionSet val_predictions;
  PredictionSet test_predictions;
  MultiplierState multipliers;  // final state; zero-size for baseline losses
};

// Full training run: per epoch, train_epoch followed by the multiplier /
// penalty-parameter updates the loss kind calls for. Records are appended to
// `history` as epochs complete, so a propagated failure leaves the records
// of all finished epochs behind. No early stopping; the final-epoch model is
// returned.
TrainResult train(const TrainConfig& config, const SplitDataset& data,
                  const std::vector<std::size_t>& hidden_widths,
                  std::vector<EpochRecord>& history);

// epoch,train_loss,val_accuracy,val_ece,mean_lambda,mean_rho
std::string history_to_csv(const std::vector<EpochRecord>& history);

// Companion wide file: epoch,lambda_0..lambda_{K-1},constraint_0..constraint_{K-1}
std::string history_classes_to_csv(const std::vector<EpochRecord>& history);

}  // namespace cals
