#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace odeco {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  DegreeMismatch,
  NotSymmetric,
  UnsupportedOrder,
  DecompositionFailed,
  NotOdeco,
  DomainViolation,
  PathCrossing,
  BlowUp,
  NoEquilibrium,
  FitFailed,
  NotTransformable,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::DimensionMismatch: return "dimension_mismatch";
    case ErrorKind::DegreeMismatch: return "degree_mismatch";
    case ErrorKind::NotSymmetric: return "not_symmetric";
    case ErrorKind::UnsupportedOrder: return "unsupported_order";
    case ErrorKind::DecompositionFailed: return "decomposition_failed";
    case ErrorKind::NotOdeco: return "not_odeco";
    case ErrorKind::DomainViolation: return "domain_violation";
    case ErrorKind::PathCrossing: return "path_crossing";
    case ErrorKind::BlowUp: return "blow_up";
    case ErrorKind::NoEquilibrium: return "no_equilibrium";
    case ErrorKind::FitFailed: return "fit_failed";
    case ErrorKind::NotTransformable: return "not_transformable";
  }
  return "unknown";
}

/// Library-wide exception. `value()` carries the numeric payload of the
/// failure where one exists: the domain end for DomainViolation, the escape
/// time for BlowUp, the best residual for DecompositionFailed / FitFailed,
/// the offending mode index for NoEquilibrium. NaN otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what,
        double value = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), kind_(kind), value_(value) {}

  ErrorKind kind() const noexcept { return kind_; }
  double value() const noexcept { return value_; }

 private:
  ErrorKind kind_;
  double value_;
};

}  // namespace odeco
