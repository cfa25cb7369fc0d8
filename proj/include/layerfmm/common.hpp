#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace layerfmm {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend bool operator==(Point a, Point b) = default;
};

inline double norm(Point p) { return std::hypot(p.x, p.y); }
inline double angle(Point p) { return std::atan2(p.y, p.x); }

// Error taxonomy. Each failure mode named in the module contracts maps to one
// of these so callers (quadrature tails, CLI exit codes) can react by type.

/// Result would overflow double range; raised instead of returning inf.
struct OverflowError : std::overflow_error {
  using std::overflow_error::overflow_error;
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Point lies exactly on an interface.
struct BoundaryTieError : DomainError {
  using DomainError::DomainError;
};

/// (layer, direction) combination prohibited by the incoming-wave rule.
struct InadmissibleError : DomainError {
  using DomainError::DomainError;
};

/// Far-field condition of an expansion or translation violated.
struct FarFieldError : DomainError {
  using DomainError::DomainError;
};

/// Interface system singular at the requested spectral point.
struct SingularSystemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Adaptive procedure did not reach its tolerance within its budget.
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A surface-wave pole of order higher than one was detected.
struct IllPosedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace layerfmm
