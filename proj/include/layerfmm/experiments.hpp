#pragma once

#include <string>
#include <vector>

#include "layerfmm/expansions.hpp"
#include "layerfmm/quadrature.hpp"

namespace layerfmm::experiments {

/// Truncation-error study of one operator at one geometric ratio.
struct ConvergenceSeries {
  std::string op;  // "ME", "LE", "M2L" or "L2L"
  double ratio = 0.0;
  double predicted_slope = 0.0;  // log10(ratio)
  double measured_slope = 0.0;
  std::vector<int> orders;
  std::vector<double> errors;
  /// Orders bounding the straight-line part used for the fit.
  int fit_first = 0;
  int fit_last = 0;
  double min_error = 0.0;
};

struct ConvergenceConfig {
  std::vector<double> ratios{0.25, 0.4, 0.5};
  std::vector<std::string> operators{"ME", "LE", "M2L", "L2L"};
  int max_order = 56;
  /// Number of source (or target, or shift) directions enveloped per order.
  int directions = 8;
  double tolerance = 1e-13;
  /// Fit starts at this order; earlier orders sit in the pre-asymptotic bend.
  int fit_min_order = 8;
  /// Fit stops once the error is within this factor of the plateau.
  double plateau_factor = 100.0;
};

/// Least-squares slope of log10(error) against order over the straight-line
/// regime [fit_min_order, last order above plateau_factor * min error].
void fit_slope(ConvergenceSeries& s, const ConvergenceConfig& cfg);

/// Runs every configured operator and ratio on component (0, 0, up, up) of a
/// medium whose top interface sits at d_0; the geometry lives above d_0.
std::vector<ConvergenceSeries> run_convergence(const quad::SpectralContext& ctx,
                                               const ConvergenceConfig& cfg = {});

/// ME truncation error for sources on a circle of radius rho around x_c,
/// evaluated at target x, for orders 1..max_order.
ConvergenceSeries me_series(const quad::SpectralContext& ctx,
                            const ReactionComponentId& id, Point center,
                            double rho, Point target, const ConvergenceConfig& cfg);

struct GovernanceResult {
  double euclidean_distance = 0.0;
  double polarized_near = 0.0;
  double polarized_far = 0.0;
  ConvergenceSeries near;
  ConvergenceSeries far;
  /// Larger polarized distance decays faster.
  bool ordered = false;
};

/// Two targets at the same Euclidean distance from the ME center whose
/// polarized distances differ by the given factor.
GovernanceResult polarized_governance(const quad::SpectralContext& ctx,
                                      double factor = 1.5,
                                      const ConvergenceConfig& cfg = {});

}  // namespace layerfmm::experiments
