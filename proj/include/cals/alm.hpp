#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cals/penalty.hpp"

namespace cals {

struct EvalResult {
  double value = 0.0;
  std::vector<double> gradient;
};

// Differentiable scalar function of a variable vector.
using ScalarFunction = std::function<EvalResult(const std::vector<double>&)>;

// min f(x)  s.t.  h_i(x) <= 0, i = 1..n. Feasible iff every h_i(x) <= 0.
struct ConstrainedProblem {
  ScalarFunction objective;
  std::vector<ScalarFunction> constraints;
  std::size_t dimension = 0;
};

// Per-constraint multipliers and penalty parameters, plus the previous
// outer-iteration constraint values used by the improvement test.
// Invariants kept by the update functions: safeguard_lo <= lambda <=
// safeguard_hi, rho > 0 and non-decreasing across outer iterations.
struct MultiplierState {
  std::vector<double> lambdas;
  std::vector<double> rhos;
  std::vector<double> prev_constraints;
  bool has_prev_constraints = false;
  double safeguard_lo = 1e-6;
  double safeguard_hi = 1e6;
};

struct AlmSettings {
  PenaltyKind kind = PenaltyKind::phr;
  double gamma = 1.2;           // penalty increase factor, > 1
  double improvement_tau = 0.9; // in (0, 1)
  int inner_iterations = 200;
  int outer_iterations = 50;
  double inner_step_size = 0.1;
  double initial_lambda = 1.0;
  double initial_rho = 1.0;
  double safeguard_lo = 1e-6;
  double safeguard_hi = 1e6;
};

struct OuterRecord {
  int iteration = 0;
  double objective = 0.0;
  double max_violation = 0.0;  // max_i max(0, h_i(x))
  double mean_lambda = 0.0;
  double mean_rho = 0.0;
};

struct SolveResult {
  std::vector<double> x;
  MultiplierState state;
  std::vector<OuterRecord> history;
};

// L(x) = f(x) + sum_i P(h_i(x), rho_i, lambda_i) with its gradient
// grad f(x) + sum_i P'(h_i(x), rho_i, lambda_i) * grad h_i(x).
EvalResult augmented_lagrangian(const ConstrainedProblem& problem,
                                const std::vector<double>& x,
                                const MultiplierState& state, PenaltyKind kind);

// Fixed number of plain gradient-descent steps on the augmented Lagrangian,
// warm-started at x0. Throws numerical_error (with the step index) if a
// non-finite value or gradient shows up.
std::vector<double> minimize_inner(const ConstrainedProblem& problem,
                                   const std::vector<double>& x0,
                                   const MultiplierState& state,
                                   const AlmSettings& settings);

// First-order multiplier estimate: lambda_i <- P'(h_i, rho_i, lambda_i),
// clipped into [safeguard_lo, safeguard_hi].
void update_multipliers(MultiplierState& state,
                        const std::vector<double>& constraint_values,
                        PenaltyKind kind);

// rho_i <- gamma * rho_i when the i-th constraint did not improve:
// h_i > tau * max(0, previous h_i). The first call only records the
// constraint values. Records current values as the new previous ones.
void update_penalty_parameters(MultiplierState& state,
                               const std::vector<double>& constraint_values,
                               const AlmSettings& settings);

// Full outer loop: minimize_inner, update_multipliers,
// update_penalty_parameters, for settings.outer_iterations rounds.
SolveResult solve(const ConstrainedProblem& problem, const std::vector<double>& x0,
                  const AlmSettings& settings);

// One CSV row per outer iteration: iter,objective,max_violation,mean_lambda,mean_rho.
std::string history_to_csv(const std::vector<OuterRecord>& history);

}  // namespace cals
