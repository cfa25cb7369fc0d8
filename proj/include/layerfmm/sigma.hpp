#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "layerfmm/common.hpp"
#include "layerfmm/medium.hpp"

namespace layerfmm::sigma {

/// Square complex band matrix with kl sub- and ku super-diagonals, stored
/// with kl extra super-diagonals of headroom for pivoting fill-in.
class BandMatrix {
 public:
  BandMatrix() = default;
  BandMatrix(int n, int kl, int ku);

  int size() const { return n_; }
  bool in_band(int i, int j) const { return j >= i - kl_ && j <= i + ku_; }
  cplx get(int i, int j) const;
  void set(int i, int j, cplx v);

  /// In-place LU with partial pivoting; returns det. Throws
  /// SingularSystemError when a pivot vanishes relative to the matrix scale.
  cplx factorize();
  /// Solve with a factorized matrix.
  std::vector<cplx> solve(std::vector<cplx> b) const;

 private:
  cplx& at(int i, int j) { return ab_[i * width_ + (j - i + kl_)]; }
  cplx at(int i, int j) const { return ab_[i * width_ + (j - i + kl_)]; }

  int n_ = 0;
  int kl_ = 0;
  int ku_ = 0;
  int width_ = 0;
  std::vector<cplx> ab_;
  std::vector<int> piv_;
};

/// Column of sigma_l^dir in the interface system.
int unknown_index(int l, Dir d);

struct SigmaSystem {
  cplx lambda;
  int s = 0;
  BandMatrix A;
  /// Right-hand side for the up-going source term, empty if s = L.
  std::vector<cplx> b_up;
  /// Right-hand side for the down-going source term, empty if s = 0.
  std::vector<cplx> b_down;
  std::vector<cplx> h;  // vertical wavenumber per layer
  std::vector<cplx> e;  // e_l per layer (1 in the half-spaces)
};

SigmaSystem assemble(const LayeredMedium& m, cplx lambda, int s);

/// sigma_{ts}^{*star} for one source layer s and every admissible (t, *, star).
struct SigmaValues {
  int s = 0;
  int L = 0;
  /// values[t][2*dir_t + dir_s] with up = 0, down = 1; prohibited entries 0.
  std::vector<std::array<cplx, 4>> values;

  cplx get(int t, Dir dt, Dir ds) const;
  cplx get(const ReactionComponentId& id) const { return get(id.t, id.dir_t, id.dir_s); }
};

SigmaValues solve_sigma(const LayeredMedium& m, cplx lambda, int s);

/// Single component; solves only the system it needs.
cplx sigma_component(const LayeredMedium& m, const ReactionComponentId& id,
                     cplx lambda);

/// det A(lambda).
cplx determinant(const LayeredMedium& m, cplx lambda);

/// det A divided by h_l (and e_l inside propagating bands) for interior
/// layers. Real for real lambda beyond the half-space wavenumbers.
cplx pole_function(const LayeredMedium& m, cplx lambda);

struct PoleInfo {
  double location = 0.0;
  int side = 1;
  /// Residue per component over every source layer.
  std::vector<std::pair<ReactionComponentId, cplx>> residues;

  cplx residue(const ReactionComponentId& id) const;
};

struct PoleScanConfig {
  /// Step as a fraction of the smallest wavenumber.
  double step_fraction = 1.0 / 50.0;
  /// Relative distance kept from every branch point.
  double branch_margin = 1e-6;
};

/// Real poles in [lo, hi] (0 < lo < hi), sorted by location. Mirrored poles
/// at -lambda_nu follow from evenness and are not listed.
std::vector<PoleInfo> find_real_poles(const LayeredMedium& m, double lo,
                                      double hi, double eps = 1e-4,
                                      const PoleScanConfig& cfg = {});

/// Poles over the default interval (max(k_0, k_L), 1.2 k_max + 1].
std::vector<PoleInfo> find_real_poles(const LayeredMedium& m, double eps = 1e-4);

struct GrowthReport {
  bool degenerate = false;
  double max_log_ratio = 0.0;     // max log|sigma| / lambda
  double last_log_ratio = 0.0;    // log|sigma| / lambda at the largest sample
  double fitted_degree = 0.0;     // slope of log|sigma| vs log lambda
  bool decreasing = true;         // log|sigma|/lambda non-increasing in |.|
};

GrowthReport sigma_growth_probe(const LayeredMedium& m,
                                const ReactionComponentId& id,
                                const std::vector<double>& samples);

}  // namespace layerfmm::sigma
