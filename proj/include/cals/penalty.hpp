#pragma once

#include <optional>
#include <string_view>

namespace cals {

// Penalty-Lagrangian families. Each is a one-sided penalty P(z, rho, lambda)
// whose derivative in z is non-negative everywhere and equals lambda at z = 0.
enum class PenaltyKind { phr, p2, p3 };

const char* to_string(PenaltyKind kind);
std::optional<PenaltyKind> penalty_kind_from_string(std::string_view name);

// Argument pack for a penalty evaluation. Construction validates the domain:
// z finite, rho > 0, lambda > 0. Violations throw std::domain_error.
struct PenaltyArgs {
  PenaltyArgs(double z, double rho, double lambda);

  double z;
  double rho;
  double lambda;
};

// P(z, rho, lambda).
//
//   PHR: lambda*z + rho*z^2/2          if lambda + rho*z >= 0
//        -lambda^2 / (2*rho)           otherwise
//   P2:  lambda*z + lambda*rho*z^2 + rho^2*z^3/6   if z >= 0
//        lambda*z / (1 - rho*z)                    if z < 0
//   P3:  lambda*z + lambda*rho*z^2     if z >= 0
//        lambda*z / (1 - rho*z)        if z < 0
//
// At the overlapping boundary of P2/P3 (z = 0) both branches agree; the
// z >= 0 branch is the one evaluated.
double penalty_value(PenaltyKind kind, const PenaltyArgs& args);

// dP/dz. Analytic, branch-consistent with penalty_value:
//
//   PHR: lambda + rho*z        if lambda + rho*z >= 0, else 0
//   P2:  lambda + 2*lambda*rho*z + rho^2*z^2/2   if z >= 0
//        lambda / (1 - rho*z)^2                  if z < 0
//   P3:  lambda + 2*lambda*rho*z   if z >= 0
//        lambda / (1 - rho*z)^2    if z < 0
double penalty_derivative(PenaltyKind kind, const PenaltyArgs& args);

}  // namespace cals
