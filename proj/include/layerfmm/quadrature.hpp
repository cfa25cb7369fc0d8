#pragma once

#include <functional>
#include <vector>

#include "layerfmm/common.hpp"
#include "layerfmm/medium.hpp"
#include "layerfmm/sigma.hpp"

namespace layerfmm::quad {

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod engine

/// Endpoint with an inverse-square-root type singularity; handled by the
/// substitution lambda = a + (b - a) u^2 toward that end.
enum class EndSingularity { none, left, right };

struct Interval {
  double a = 0.0;
  double b = 0.0;
  EndSingularity sing = EndSingularity::none;
};

struct AdaptiveOptions {
  double rel_tol = 1e-10;
  double abs_tol = 0.0;
  /// Relative control is floored at this fraction of the integral of |f|,
  /// so components that cancel to near zero do not stall refinement.
  double floor_fraction = 1e-3;
  int max_panels = 20000;
  bool throw_on_failure = true;
};

/// Kronrod node in the original variable with its weight (Jacobian included).
struct Node {
  double x = 0.0;
  double w = 0.0;
  int interval = 0;  // index into the interval list passed in
};

struct AdaptiveResult {
  std::vector<cplx> value;
  std::vector<double> error;
  std::vector<Node> nodes;
  int panels = 0;
  long evaluations = 0;
  bool converged = false;
  /// Stopped because every remaining panel error sits at the rounding floor.
  bool roundoff_limited = false;
};

/// f(x, out) writes n values at x.
using VectorIntegrand = std::function<void(double, cplx*)>;
/// Same, also told which input interval x belongs to.
using IndexedIntegrand = std::function<void(int, double, cplx*)>;

/// Global adaptive GK15 over a union of intervals. Final sums run over panels
/// in sorted order so the result does not depend on refinement history.
AdaptiveResult integrate_adaptive(const VectorIntegrand& f, int n,
                                  const std::vector<Interval>& intervals,
                                  const AdaptiveOptions& opt = {});
AdaptiveResult integrate_adaptive(const IndexedIntegrand& f, int n,
                                  const std::vector<Interval>& intervals,
                                  const AdaptiveOptions& opt = {});

cplx integrate(const std::function<cplx(double)>& f, double a, double b,
               const AdaptiveOptions& opt = {},
               EndSingularity sing = EndSingularity::none);

// ---------------------------------------------------------------------------
// Sommerfeld integrals

enum class PoleMode { corrected, perturbed };

struct QuadratureSpec {
  double tolerance = 1e-10;
  /// 0 selects 1.2 max k + 1.
  double k_split = 0.0;
  /// 0 selects the envelope-based truncation point.
  double lambda_max = 0.0;
  PoleMode pole_mode = PoleMode::corrected;
  /// Integrate (g(l) + g(-l)) sigma(l) over l > 0 instead of the full line.
  bool half_line = true;
  /// Deform the tails onto the Cagniard-de Hoop contour when |dx| < T H.
  bool use_cdh = false;
  double cdh_aperture = 4.0;
  /// Largest loss in perturbed mode; eps, eps/10, eps/100 are extrapolated.
  double perturbation = 1e-3;
  int max_panels = 20000;
};

/// Medium plus its real surface-wave poles, located once.
class SpectralContext {
 public:
  explicit SpectralContext(LayeredMedium m, double side_eps = 1e-4);

  const LayeredMedium& medium() const { return medium_; }
  const std::vector<sigma::PoleInfo>& poles() const { return poles_; }
  double k_split(const QuadratureSpec& spec) const;

 private:
  LayeredMedium medium_;
  std::vector<sigma::PoleInfo> poles_;
};

/// Plane-wave factor E = exp(-h_t ht - h_s hs + i lambda dx).
struct Geometry {
  double dx = 0.0;
  double ht = 0.0;
  double hs = 0.0;
};

/// Integrand multiplier (-i w_s)^p (i / w_t)^m.
struct OrderTerm {
  int p = 0;
  int m = 0;
};

/// Quadrature rule for one component, carrying sigma in its weights:
/// integral ~= sum_i weight_i [Phi(lambda_i) + fold Phi(-lambda_i)].
struct RulePart {
  cplx kt;
  cplx ks;
  bool fold = true;
  std::vector<cplx> lambda;
  std::vector<cplx> weight;
};

struct SpectralRule {
  std::vector<RulePart> parts;
  int panels = 0;
  long evaluations = 0;
  double lambda_max = 0.0;
};

/// -i w(lambda) and i / w(lambda) without cancellation for large |lambda|.
cplx minus_i_w(cplx lambda, cplx k);
cplx i_over_w(cplx lambda, cplx k);

/// E(lambda) (-i w_s)^p (i/w_t)^m.
cplx plane_wave_term(cplx lambda, cplx kt, cplx ks, const Geometry& g,
                     const OrderTerm& term);

/// Build an adaptive rule resolving every (geometry, term) combination.
SpectralRule build_rule(const SpectralContext& ctx, const ReactionComponentId& id,
                        const std::vector<Geometry>& reps,
                        const std::vector<OrderTerm>& terms,
                        const QuadratureSpec& spec);

cplx apply_rule(const SpectralRule& rule, const Geometry& g,
                const OrderTerm& term = {});

/// Geometry of the pair (x in layer t, x' in layer s) for one component.
Geometry component_geometry(const LayeredMedium& m, const ReactionComponentId& id,
                            Point x, Point xs);

/// Same geometry for arbitrary points (expansion centers), which may leave
/// their layer as long as they stay on the polarized side.
Geometry offset_geometry(const LayeredMedium& m, const ReactionComponentId& id,
                         Point x, Point xs);

/// sum over the rule of E (-i w_s)^p (i/w_t)^m for |p| < P and |m| < M,
/// returned row-major at (m + M - 1) (2P - 1) + p + P - 1.
std::vector<cplx> apply_rule_orders(const SpectralRule& rule, const Geometry& g,
                                    int P, int M);

/// Envelope-based truncation point for the spectral tails.
double lambda_max_estimate(cplx kt, cplx ks, double ht, double hs, int pmax,
                           int mmax, double tol, double k_split);

cplx evaluate_component(const SpectralContext& ctx, const ReactionComponentId& id,
                        Point x, Point xs, const QuadratureSpec& spec = {});

/// Total layered Green's function G(x, x').
cplx green(const SpectralContext& ctx, Point x, Point xs,
           const QuadratureSpec& spec = {});

/// Reaction part only: G minus the same-layer free-space term.
cplx reaction_field(const SpectralContext& ctx, Point x, Point xs,
                    const QuadratureSpec& spec = {});

struct SommerfeldCheck {
  cplx quadrature;
  cplx oracle;
  double abs_residual = 0.0;
  double rel_residual = 0.0;
};

/// (i/4)(1/(i pi)) int e^{-h(y-y')} e^{i l (x-x')} (-i w)^p / h dl against
/// (i/4) H_p(k r) e^{i p theta}.
SommerfeldCheck sommerfeld_identity_check(double k, Point x, Point xs, int p = 0,
                                          double tol = 1e-12);

/// int_a^b h sigma with a simple pole of sigma inside (a, b), by subtraction
/// of the principal part plus the side-dependent half residue.
cplx integrate_with_pole(const std::function<cplx(double)>& h,
                         const std::function<cplx(double)>& sigma,
                         const sigma::PoleInfo& pole, cplx residue, double a,
                         double b, const AdaptiveOptions& opt = {});

// ---------------------------------------------------------------------------
// Cagniard-de Hoop map

struct CdHMap {
  double beta = 0.0;
  double k = 1.0;
};

cplx cdh_phi(const CdHMap& map, cplx z);
cplx cdh_phi_inv(const CdHMap& map, cplx w);
cplx cdh_phi_derivative(const CdHMap& map, cplx z);

/// True when w lies right of the upper hyperbola branch (first quadrant).
bool in_d_plus(const CdHMap& map, cplx w);
/// True when z lies right of the lower hyperbola branch (fourth quadrant).
bool in_d_minus(const CdHMap& map, cplx z);

struct TailResult {
  cplx value;
  int panels = 0;
  bool used_cdh = false;
};

/// Tails |lambda| > k_split of one component integral on the CdH contour.
/// Falls back to the real axis when the aperture condition fails.
TailResult tail_integral_cdh(const SpectralContext& ctx,
                             const ReactionComponentId& id, Point x, Point xs,
                             const QuadratureSpec& spec = {});

/// Same tails integrated along the real axis.
TailResult tail_integral_real(const SpectralContext& ctx,
                              const ReactionComponentId& id, Point x, Point xs,
                              const QuadratureSpec& spec = {});

}  // namespace layerfmm::quad
