#pragma once

#include <span>
#include <vector>

#include "layerfmm/common.hpp"

namespace layerfmm::special {

/// Tunables for the Bessel routines.
struct BesselConfig {
  int max_order = 256;
  /// |z| beyond which J_p(z) reports overflow.
  double validity_radius = 700.0;
  /// The ascending series is always used below this radius; above it only
  /// while |z|^2/4 <= |p|+1, where the terms decay monotonically.
  double series_radius = 1.0;
};

/// sqrt(r) e^{i theta/2} with z = r e^{i theta}, theta in [-pi, pi).
/// The negative real axis (including -0 imaginary part) maps to -i sqrt(r).
cplx branch_sqrt(cplx z);

/// Vertical wavenumber h(lambda) = branch_sqrt(lambda^2 - k^2).
inline cplx vertical_wavenumber(cplx lambda, cplx k) {
  return branch_sqrt(lambda * lambda - k * k);
}

/// J_p(z) for integer order and complex argument.
cplx bessel_j(int p, cplx z, const BesselConfig& cfg = {});

/// J_0(z) ... J_nmax(z) in one backward-recurrence pass.
std::vector<cplx> bessel_j_array(int nmax, cplx z, const BesselConfig& cfg = {});

/// Y_p(x), real x > 0.
double bessel_y(int p, double x, const BesselConfig& cfg = {});

/// H_p^{(1)}(x) = J_p(x) + i Y_p(x), real x > 0.
cplx hankel1(int p, double x, const BesselConfig& cfg = {});

/// H_0^{(1)}(x) ... H_nmax^{(1)}(x); negative orders follow from parity.
std::vector<cplx> hankel1_array(int nmax, double x, const BesselConfig& cfg = {});

/// Free-space Green's function (i/4) H_0^{(1)}(k r).
cplx free_space_green(double k, double r);

/// sum_{|p|<P} J_p(z) omega^p, a truncation of exp((z/2)(omega - 1/omega)).
cplx generating_partial_sum(cplx z, cplx omega, int P,
                            const BesselConfig& cfg = {});

/// w(lambda) = (lambda - h(lambda)) / k.
cplx w_map(cplx lambda, double k);

/// Right-hand side of |J_p(z)| <= (|z|/2)^|p| e^{|Im z|} / |p|!.
double bessel_j_bound(int p, cplx z);

}  // namespace layerfmm::special
