#pragma once

#include <span>
#include <vector>

#include "layerfmm/common.hpp"
#include "layerfmm/medium.hpp"
#include "layerfmm/quadrature.hpp"

namespace layerfmm::expansions {

struct Source {
  Point x;
  cplx q = 1.0;
};

/// Coefficients for orders |p| < P live at index p + P - 1.
inline int order_index(int p, int P) { return p + P - 1; }

/// Far field of sources in layer s for one reaction component:
/// M_p = sum_j q_j J_p(k_s rho'_j) e^{i p tau_s theta'_j}.
struct MultipoleExpansion {
  Point center;
  Dir dir_s = Dir::up;
  double interface_depth = 0.0;  // d_s of the component
  cplx k_s;
  int P = 0;
  double radius = 0.0;  // max |x'_j - x_c|
  std::vector<cplx> coeffs;

  cplx coeff(int p) const { return coeffs.at(order_index(p, P)); }
};

/// Incoming field near a target center: u(x) = sum_m L_m K_m(x - x_c^l),
/// K_m = J_m(k_t rho) e^{i m tau_t theta}.
struct LocalExpansion {
  Point center;
  Dir dir_t = Dir::up;
  cplx k_t;
  int M = 0;
  /// Lower bound on the polarized distance from the center to every source.
  double far_distance = 0.0;
  std::vector<cplx> coeffs;

  cplx coeff(int m) const { return coeffs.at(order_index(m, M)); }
};

/// A_mp mapping multipole coefficients at x_c to local ones at x_c^l.
struct TranslationMatrix {
  Point local_center;
  Point source_center;
  ReactionComponentId id;
  cplx k_t;
  int M = 0;
  int P = 0;
  double polarized_distance = 0.0;
  std::vector<cplx> entries;  // row m, column p

  cplx at(int m, int p) const {
    return entries.at(std::size_t(order_index(m, M)) * (2 * P - 1) +
                      order_index(p, P));
  }
};

struct ExpansionOptions {
  quad::QuadratureSpec quad;
  /// Separation factor of the far-field conditions.
  double c0 = 2.0;
};

// ---------------------------------------------------------------------------
// Free space, (i/4) H_0(k |x - x'|)

struct FreeSpaceME {
  Point center;
  double k = 1.0;
  int P = 0;
  double radius = 0.0;
  std::vector<cplx> coeffs;  // alpha_p = sum q_j J_p(k rho_j) e^{-i p theta_j}

  cplx coeff(int p) const { return coeffs.at(order_index(p, P)); }
};

struct FreeSpaceLE {
  Point center;
  double k = 1.0;
  int M = 0;
  double far_distance = 0.0;
  std::vector<cplx> coeffs;  // field = sum beta_m J_m(k rho) e^{i m theta}

  cplx coeff(int m) const { return coeffs.at(order_index(m, M)); }
};

FreeSpaceME fs_me(std::span<const Source> sources, Point center, double k, int P);

/// (i/4) sum alpha_p H_p(k rho_c) e^{i p theta_c}; needs |x - x_c| > c0 radius.
cplx fs_me_eval(const FreeSpaceME& me, Point x, double c0 = 2.0);

FreeSpaceME fs_m2m(const FreeSpaceME& me, Point new_center);
FreeSpaceLE fs_m2l(const FreeSpaceME& me, Point local_center, int M,
                   double c0 = 2.0);
FreeSpaceLE fs_l2l(const FreeSpaceLE& le, Point new_center, double c0 = 2.0);
cplx fs_le_eval(const FreeSpaceLE& le, Point x, double c0 = 2.0);

// ---------------------------------------------------------------------------
// Reaction components

/// Polarized distance between x (target side) and xs (source side), where
/// either point may be an expansion center outside its layer.
double polarized_offset_distance(const LayeredMedium& m,
                                 const ReactionComponentId& id, Point x, Point xs);

MultipoleExpansion me_coeffs(const LayeredMedium& m, const ReactionComponentId& id,
                             std::span<const Source> sources, Point center, int P);

/// Expansion functions I_p(x, x_c) = int E sigma (-i w_s)^p for |p| < P.
std::vector<cplx> expansion_functions(const quad::SpectralContext& ctx,
                                      const ReactionComponentId& id, Point x,
                                      Point center, int P,
                                      const quad::QuadratureSpec& spec = {});

cplx me_eval(const quad::SpectralContext& ctx, const ReactionComponentId& id,
             const MultipoleExpansion& me, Point x,
             const ExpansionOptions& opt = {});

/// L_m = sum_j q_j int E(x_c^l, x'_j) sigma (i / w_t)^m for |m| < M.
LocalExpansion le_coeffs_direct(const quad::SpectralContext& ctx,
                                const ReactionComponentId& id, Point center,
                                std::span<const Source> sources, int M,
                                const ExpansionOptions& opt = {});

cplx le_eval(const LocalExpansion& le, Point x, double c0 = 2.0);

TranslationMatrix m2l(const quad::SpectralContext& ctx,
                      const ReactionComponentId& id, Point local_center,
                      Point source_center, int M, int P,
                      const ExpansionOptions& opt = {}, double source_radius = 0.0);

LocalExpansion apply_m2l(const TranslationMatrix& A, const MultipoleExpansion& me,
                         double c0 = 2.0);

/// Re-centre a local expansion: L~_m = sum_{|p|<M} L_p K_{p-m}(x~ - x).
LocalExpansion l2l(const LocalExpansion& le, Point new_center, double c0 = 2.0);

/// Re-centre a multipole expansion on the same side of its interface.
MultipoleExpansion m2m(const MultipoleExpansion& me, Point new_center);

struct TruncationConfig {
  double c0 = 2.0;
  double safety = 1e3;
  int min_order = 8;
};

/// P = max(ceil((log eps - log C) / log ratio), ceil(e k rho_geom), P_min).
int choose_truncation(double ratio, double eps, double k, double rho_geom,
                      const TruncationConfig& cfg = {});

}  // namespace layerfmm::expansions
