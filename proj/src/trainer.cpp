#include "cals/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

#include "cals/errors.hpp"
#include "cals/penalty.hpp"

namespace cals {
namespace {

// Bins used for the per-epoch validation ECE column; final reporting bins
// are the caller's concern.
constexpr std::size_t kHistoryEceBins = 15;

bool is_cals(LossKind kind) {
  return kind == LossKind::cals_alm || kind == LossKind::cals_hr;
}

void append_field(std::string& out, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  out += buffer;
}

Matrix gather_rows(const Matrix& source, const std::vector<std::size_t>& indices,
                   std::size_t begin, std::size_t end) {
  Matrix out(end - begin, source.cols());
  for (std::size_t r = begin; r < end; ++r) {
    const double* src = source.row(indices[r]);
    std::copy(src, src + source.cols(), out.row(r - begin));
  }
  return out;
}

}  // namespace

void validate_train_config(const TrainConfig& config) {
  if (config.batch_size < 1) throw std::domain_error("batch_size must be >= 1");
  if (!(config.step_size >= 0.0)) throw std::domain_error("step_size must be >= 0");
  if (!(config.momentum >= 0.0 && config.momentum < 1.0)) {
    throw std::domain_error("momentum must lie in [0, 1)");
  }
  if (!(config.loss.margin > 0.0)) throw std::domain_error("margin must be > 0");
  if (!(config.loss.smoothing_alpha >= 0.0 && config.loss.smoothing_alpha < 1.0)) {
    throw std::domain_error("smoothing_alpha must lie in [0, 1)");
  }
  if (!(config.loss.focal_gamma >= 0.0)) throw std::domain_error("focal_gamma must be >= 0");
  if (!(config.loss.ecp_weight >= 0.0)) throw std::domain_error("ecp_weight must be >= 0");
  if (!(config.loss.mbls_weight >= 0.0)) throw std::domain_error("mbls_weight must be >= 0");
  if (!(config.initial_lambda > 0.0)) throw std::domain_error("initial_lambda must be > 0");
  if (!(config.initial_rho > 0.0)) throw std::domain_error("initial_rho must be > 0");
  if (!(config.gamma > 1.0)) throw std::domain_error("gamma must be > 1");
  if (!(config.improvement_tau > 0.0 && config.improvement_tau < 1.0)) {
    throw std::domain_error("improvement_tau must lie in (0, 1)");
  }
  if (config.rho_update_period < 1) throw std::domain_error("rho_update_period must be >= 1");
  if (!(config.safeguard_lo > 0.0) || !(config.safeguard_hi >= config.safeguard_lo)) {
    throw std::domain_error("safeguards must satisfy 0 < lo <= hi");
  }
  if (!(config.hr_mu > 1.0)) throw std::domain_error("hr_mu must be > 1");
  if (!(config.hr_tau > 1.0)) throw std::domain_error("hr_tau must be > 1");
}

ValidationStats evaluate_validation(const Network& net, const Dataset& val_data,
                                    const LossSelection& selection,
                                    const MultiplierState* state) {
  if (val_data.labels.empty()) {
    throw std::invalid_argument("validation pass over an empty dataset");
  }
  const std::size_t k = net.num_classes();
  ValidationStats stats;
  stats.logits = forward(net, val_data.features);
  const Matrix distances = logit_distances(stats.logits);
  const std::size_t n = distances.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  stats.mean_constraint.assign(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      stats.mean_constraint[c] += (distances(i, c) / selection.margin - 1.0) * inv_n;
    }
  }

  if (state != nullptr) {
    if (state->lambdas.size() != k || state->rhos.size() != k) {
      throw std::invalid_argument("multiplier state sized " +
                                  std::to_string(state->lambdas.size()) + " for " +
                                  std::to_string(k) + " classes");
    }
    stats.mean_penalty_derivative.assign(k, 0.0);
    stats.mean_penalty_value.assign(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c) {
        const PenaltyArgs args(distances(i, c) / selection.margin - 1.0, state->rhos[c],
                               state->lambdas[c]);
        stats.mean_penalty_derivative[c] += penalty_derivative(selection.penalty, args) * inv_n;
        stats.mean_penalty_value[c] += penalty_value(selection.penalty, args) * inv_n;
      }
    }
  }
  return stats;
}

double train_epoch(Network& net, const Dataset& train_data, const TrainConfig& config,
                   std::size_t epoch, const MultiplierState* state, Gradients& velocity) {
  if ((state != nullptr) != is_cals(config.loss.kind)) {
    throw std::invalid_argument("multiplier state must be present exactly for CALS losses");
  }
  const std::size_t n = train_data.labels.size();
  if (n == 0) throw std::invalid_argument("training epoch over an empty dataset");

  // Epoch-specific permutation: mixing the epoch into the seed keeps every
  // epoch's order independent of how many batches earlier epochs ran.
  std::mt19937_64 rng(config.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(epoch));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  double loss_sum = 0.0;
  std::size_t batch_index = 0;
  for (std::size_t begin = 0; begin < n; begin += config.batch_size, ++batch_index) {
    const std::size_t end = std::min(begin + config.batch_size, n);
    const Matrix inputs = gather_rows(train_data.features, order, begin, end);
    std::vector<int> labels(end - begin);
    for (std::size_t r = begin; r < end; ++r) labels[r - begin] = train_data.labels[order[r]];

    ForwardCache cache;
    const LogitBatch logits = forward(net, inputs, &cache);
    const TotalLoss loss = total_loss(config.loss, logits, labels, state);
    if (!std::isfinite(loss.value)) {
      throw numerical_error("non-finite training loss", static_cast<long>(batch_index));
    }
    loss_sum += loss.value * static_cast<double>(end - begin);

    const Gradients grads = backward(net, cache, loss.logit_grads);
    sgd_step(net, grads, config.step_size, config.momentum, velocity);
  }
  return loss_sum / static_cast<double>(n);
}

MultiplierState validation_multiplier_update(const ValidationStats& stats,
                                             const MultiplierState& state,
                                             const TrainConfig& config) {
  if (stats.mean_penalty_derivative.size() != state.lambdas.size()) {
    throw std::invalid_argument("validation stats lack penalty derivatives");
  }
  MultiplierState next = state;
  for (std::size_t c = 0; c < next.lambdas.size(); ++c) {
    next.lambdas[c] = std::clamp(stats.mean_penalty_derivative[c], config.safeguard_lo,
                                 config.safeguard_hi);
  }
  return next;
}

MultiplierState validation_multiplier_update(const Network& net, const Dataset& val_data,
                                             const MultiplierState& state,
                                             const TrainConfig& config) {
  const ValidationStats stats = evaluate_validation(net, val_data, config.loss, &state);
  return validation_multiplier_update(stats, state, config);
}

MultiplierState validation_rho_update(const MultiplierState& state,
                                      const std::vector<double>& val_mean_constraints,
                                      std::size_t epoch, const TrainConfig& config) {
  if (val_mean_constraints.size() != state.rhos.size()) {
    throw std::invalid_argument("constraint means sized " +
                                std::to_string(val_mean_constraints.size()) + " for " +
                                std::to_string(state.rhos.size()) + " classes");
  }
  if (epoch == 0 || epoch % config.rho_update_period != 0) return state;
  // Same growth-or-record rule as the generic solver, applied at the
  // period's cadence so successive checks compare one period apart.
  MultiplierState next = state;
  AlmSettings settings;
  settings.gamma = config.gamma;
  settings.improvement_tau = config.improvement_tau;
  update_penalty_parameters(next, val_mean_constraints, settings);
  return next;
}

MultiplierState hr_multiplier_update(const MultiplierState& state,
                                     const std::vector<double>& penalty_curr,
                                     const std::vector<double>& penalty_prev,
                                     const TrainConfig& config) {
  if (penalty_curr.size() != state.lambdas.size() ||
      penalty_prev.size() != state.lambdas.size()) {
    throw std::invalid_argument("penalty vectors sized " + std::to_string(penalty_curr.size()) +
                                "/" + std::to_string(penalty_prev.size()) + " for " +
                                std::to_string(state.lambdas.size()) + " classes");
  }
  MultiplierState next = state;
  for (std::size_t c = 0; c < next.lambdas.size(); ++c) {
    if (penalty_curr[c] > config.hr_tau * penalty_prev[c]) {
      next.lambdas[c] *= config.hr_mu;
    } else if (penalty_prev[c] > config.hr_tau * penalty_curr[c]) {
      next.lambdas[c] /= config.hr_mu;
    }
    next.lambdas[c] = std::clamp(next.lambdas[c], config.safeguard_lo, config.safeguard_hi);
  }
  return next;
}

TrainResult train(const TrainConfig& config, const SplitDataset& data,
                  const std::vector<std::size_t>& hidden_widths,
                  std::vector<EpochRecord>& history) {
  validate_train_config(config);
  const bool cals = is_cals(config.loss.kind);
  if (cals && data.validation.labels.empty()) {
    throw std::invalid_argument("CALS training requires a non-empty validation set");
  }
  if (data.train.labels.empty()) {
    throw std::invalid_argument("training requires a non-empty training set");
  }

  const std::size_t k = data.train.num_classes;
  TrainResult result;
  result.net = make_network(data.train.features.cols(), hidden_widths, k, config.seed);

  MultiplierState state;
  state.safeguard_lo = config.safeguard_lo;
  state.safeguard_hi = config.safeguard_hi;
  if (cals) {
    state.lambdas.assign(k, config.initial_lambda);
    state.rhos.assign(k, config.initial_rho);
  }

  Gradients velocity = zero_gradients(result.net);
  std::vector<double> prev_penalty;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double train_loss = train_epoch(result.net, data.train, config, epoch,
                                          cals ? &state : nullptr, velocity);

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = train_loss;

    if (!data.validation.labels.empty()) {
      const ValidationStats stats =
          evaluate_validation(result.net, data.validation, config.loss, cals ? &state : nullptr);
      if (config.loss.kind == LossKind::cals_alm) {
        // First-order multiplier step, then the periodic penalty-parameter
        // check; both read statistics gathered before either update.
        state = validation_multiplier_update(stats, state, config);
        state = validation_rho_update(state, stats.mean_constraint, epoch, config);
      } else if (config.loss.kind == LossKind::cals_hr) {
        if (!prev_penalty.empty()) {
          state = hr_multiplier_update(state, stats.mean_penalty_value, prev_penalty, config);
        }
        prev_penalty = stats.mean_penalty_value;
      }
      const PredictionSet val_preds = make_predictions(stats.logits, data.validation.labels);
      record.val_accuracy = accuracy(val_preds);
      record.val_ece = ece(val_preds, kHistoryEceBins);
      record.per_class_mean_constraint = stats.mean_constraint;
    } else {
      record.per_class_mean_constraint.assign(k, 0.0);
    }

    record.per_class_lambda = cals ? state.lambdas : std::vector<double>(k, 0.0);
    record.mean_lambda =
        std::accumulate(record.per_class_lambda.begin(), record.per_class_lambda.end(), 0.0) /
        static_cast<double>(k);
    const std::vector<double> rhos = cals ? state.rhos : std::vector<double>(k, 0.0);
    record.mean_rho =
        std::accumulate(rhos.begin(), rhos.end(), 0.0) / static_cast<double>(k);
    history.push_back(std::move(record));
  }

  result.multipliers = state;
  if (!data.validation.labels.empty()) {
    result.val_logits = forward(result.net, data.validation.features);
    result.val_predictions = make_predictions(result.val_logits, data.validation.labels);
  }
  if (!data.test.labels.empty()) {
    result.test_logits = forward(result.net, data.test.features);
    result.test_predictions = make_predictions(result.test_logits, data.test.labels);
  }
  return result;
}

std::string history_to_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_accuracy,val_ece,mean_lambda,mean_rho\n";
  for (const EpochRecord& rec : history) {
    out += std::to_string(rec.epoch);
    for (double value : {rec.train_loss, rec.val_accuracy, rec.val_ece, rec.mean_lambda,
                         rec.mean_rho}) {
      out += ',';
      append_field(out, value);
    }
    out += '\n';
  }
  return out;
}

std::string history_classes_to_csv(const std::vector<EpochRecord>& history) {
  if (history.empty()) return "epoch\n";
  const std::size_t k = history.front().per_class_lambda.size();
  std::string out = "epoch";
  for (std::size_t c = 0; c < k; ++c) out += ",lambda_" + std::to_string(c);
  for (std::size_t c = 0; c < k; ++c) out += ",constraint_" + std::to_string(c);
  out += '\n';
  for (const EpochRecord& rec : history) {
    out += std::to_string(rec.epoch);
    for (double value : rec.per_class_lambda) {
      out += ',';
      append_field(out, value);
    }
    for (double value : rec.per_class_mean_constraint) {
      out += ',';
      append_field(out, value);
    }
    out += '\n';
  }
  return out;
}

}  // namespace cals
