#include "cals/penalty.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cals {

const char* to_string(PenaltyKind kind) {
  switch (kind) {
    case PenaltyKind::phr: return "phr";
    case PenaltyKind::p2: return "p2";
    case PenaltyKind::p3: return "p3";
  }
  return "?";
}

std::optional<PenaltyKind> penalty_kind_from_string(std::string_view name) {
  if (name == "phr") return PenaltyKind::phr;
  if (name == "p2") return PenaltyKind::p2;
  if (name == "p3") return PenaltyKind::p3;
  return std::nullopt;
}

PenaltyArgs::PenaltyArgs(double z_in, double rho_in, double lambda_in)
    : z(z_in), rho(rho_in), lambda(lambda_in) {
  if (!std::isfinite(z)) {
    throw std::domain_error("penalty: constraint value z must be finite, got " +
                            std::to_string(z));
  }
  if (!std::isfinite(rho) || rho <= 0.0) {
    throw std::domain_error("penalty: rho must be a positive finite real, got " +
                            std::to_string(rho));
  }
  if (!std::isfinite(lambda) || lambda <= 0.0) {
    throw std::domain_error("penalty: lambda must be a positive finite real, got " +
                            std::to_string(lambda));
  }
}

double penalty_value(PenaltyKind kind, const PenaltyArgs& a) {
  switch (kind) {
    case PenaltyKind::phr: {
      if (a.lambda + a.rho * a.z >= 0.0) {
        return a.lambda * a.z + 0.5 * a.rho * a.z * a.z;
      }
      return -(a.lambda * a.lambda) / (2.0 * a.rho);
    }
    case PenaltyKind::p2: {
      if (a.z >= 0.0) {
        return a.lambda * a.z + a.lambda * a.rho * a.z * a.z +
               a.rho * a.rho * a.z * a.z * a.z / 6.0;
      }
      return a.lambda * a.z / (1.0 - a.rho * a.z);
    }
    case PenaltyKind::p3: {
      if (a.z >= 0.0) {
        return a.lambda * a.z + a.lambda * a.rho * a.z * a.z;
      }
      return a.lambda * a.z / (1.0 - a.rho * a.z);
    }
  }
  throw std::logic_error("penalty_value: unreachable kind");
}

double penalty_derivative(PenaltyKind kind, const PenaltyArgs& a) {
  switch (kind) {
    case PenaltyKind::phr: {
      const double t = a.lambda + a.rho * a.z;
      return t >= 0.0 ? t : 0.0;
    }
    case PenaltyKind::p2: {
      if (a.z >= 0.0) {
        return a.lambda + 2.0 * a.lambda * a.rho * a.z + 0.5 * a.rho * a.rho * a.z * a.z;
      }
      const double denom = 1.0 - a.rho * a.z;  // > 1 for z < 0
      return a.lambda / (denom * denom);
    }
    case PenaltyKind::p3: {
      if (a.z >= 0.0) {
        return a.lambda + 2.0 * a.lambda * a.rho * a.z;
      }
      const double denom = 1.0 - a.rho * a.z;
      return a.lambda / (denom * denom);
    }
  }
  throw std::logic_error("penalty_derivative: unreachable kind");
}

}  // namespace cals
