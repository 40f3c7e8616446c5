#include "cals/alm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "cals/errors.hpp"

namespace cals {

namespace {

double clip(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void check_dimension(const ConstrainedProblem& problem, const std::vector<double>& x) {
  if (x.size() != problem.dimension) {
    throw std::invalid_argument("alm: variable vector has " + std::to_string(x.size()) +
                                " entries, problem dimension is " +
                                std::to_string(problem.dimension));
  }
}

}  // namespace

EvalResult augmented_lagrangian(const ConstrainedProblem& problem,
                                const std::vector<double>& x,
                                const MultiplierState& state, PenaltyKind kind) {
  check_dimension(problem, x);
  EvalResult out = problem.objective(x);
  if (out.gradient.size() != problem.dimension) {
    throw std::invalid_argument("alm: objective gradient length mismatch");
  }
  for (std::size_t i = 0; i < problem.constraints.size(); ++i) {
    const EvalResult h = problem.constraints[i](x);
    if (h.gradient.size() != problem.dimension) {
      throw std::invalid_argument("alm: constraint " + std::to_string(i) +
                                  " gradient length mismatch");
    }
    const PenaltyArgs args(h.value, state.rhos[i], state.lambdas[i]);
    out.value += penalty_value(kind, args);
    const double slope = penalty_derivative(kind, args);
    for (std::size_t d = 0; d < problem.dimension; ++d) {
      out.gradient[d] += slope * h.gradient[d];
    }
  }
  return out;
}

std::vector<double> minimize_inner(const ConstrainedProblem& problem,
                                   const std::vector<double>& x0,
                                   const MultiplierState& state,
                                   const AlmSettings& settings) {
  std::vector<double> x = x0;
  for (int it = 0; it < settings.inner_iterations; ++it) {
    const EvalResult eval = augmented_lagrangian(problem, x, state, settings.kind);
    if (!std::isfinite(eval.value)) {
      throw numerical_error("alm: non-finite augmented Lagrangian value", it);
    }
    for (std::size_t d = 0; d < x.size(); ++d) {
      if (!std::isfinite(eval.gradient[d])) {
        throw numerical_error("alm: non-finite gradient component", it);
      }
      x[d] -= settings.inner_step_size * eval.gradient[d];
    }
  }
  return x;
}

void update_multipliers(MultiplierState& state,
                        const std::vector<double>& constraint_values,
                        PenaltyKind kind) {
  if (constraint_values.size() != state.lambdas.size()) {
    throw std::invalid_argument("alm: constraint value count does not match multipliers");
  }
  for (std::size_t i = 0; i < constraint_values.size(); ++i) {
    const PenaltyArgs args(constraint_values[i], state.rhos[i], state.lambdas[i]);
    state.lambdas[i] =
        clip(penalty_derivative(kind, args), state.safeguard_lo, state.safeguard_hi);
  }
}

void update_penalty_parameters(MultiplierState& state,
                               const std::vector<double>& constraint_values,
                               const AlmSettings& settings) {
  if (constraint_values.size() != state.rhos.size()) {
    throw std::invalid_argument("alm: constraint value count does not match rhos");
  }
  if (state.has_prev_constraints) {
    for (std::size_t i = 0; i < constraint_values.size(); ++i) {
      const double reference =
          settings.improvement_tau * std::max(0.0, state.prev_constraints[i]);
      if (constraint_values[i] > reference) {
        state.rhos[i] *= settings.gamma;
      }
    }
  }
  state.prev_constraints = constraint_values;
  state.has_prev_constraints = true;
}

SolveResult solve(const ConstrainedProblem& problem, const std::vector<double>& x0,
                  const AlmSettings& settings) {
  check_dimension(problem, x0);
  const std::size_t n = problem.constraints.size();

  SolveResult result;
  result.x = x0;
  result.state.lambdas.assign(n, settings.initial_lambda);
  result.state.rhos.assign(n, settings.initial_rho);
  result.state.safeguard_lo = settings.safeguard_lo;
  result.state.safeguard_hi = settings.safeguard_hi;

  for (int outer = 1; outer <= settings.outer_iterations; ++outer) {
    result.x = minimize_inner(problem, result.x, result.state, settings);

    // Constraint values at the inner-loop exit point drive both updates.
    std::vector<double> h(n);
    double max_violation = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = problem.constraints[i](result.x).value;
      max_violation = std::max(max_violation, std::max(0.0, h[i]));
    }

    update_multipliers(result.state, h, settings.kind);
    update_penalty_parameters(result.state, h, settings);

    OuterRecord record;
    record.iteration = outer;
    record.objective = problem.objective(result.x).value;
    record.max_violation = max_violation;
    record.mean_lambda = mean(result.state.lambdas);
    record.mean_rho = mean(result.state.rhos);
    result.history.push_back(record);
  }
  return result;
}

std::string history_to_csv(const std::vector<OuterRecord>& history) {
  std::string csv = "iter,objective,max_violation,mean_lambda,mean_rho\n";
  char line[256];
  for (const OuterRecord& r : history) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g\n", r.iteration,
                  r.objective, r.max_violation, r.mean_lambda, r.mean_rho);
    csv += line;
  }
  return csv;
}

}  // namespace cals
