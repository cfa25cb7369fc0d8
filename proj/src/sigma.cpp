#include "layerfmm/sigma.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "layerfmm/special.hpp"

namespace layerfmm::sigma {

BandMatrix::BandMatrix(int n, int kl, int ku)
    : n_(n), kl_(kl), ku_(ku), width_(2 * kl + ku + 1),
      ab_(std::size_t(n) * (2 * kl + ku + 1), cplx{0.0}) {}

cplx BandMatrix::get(int i, int j) const {
  if (j < i - kl_ || j > i + ku_ + kl_) return 0.0;
  return at(i, j);
}

void BandMatrix::set(int i, int j, cplx v) {
  if (!in_band(i, j)) throw DomainError("entry outside matrix band");
  at(i, j) = v;
}

cplx BandMatrix::factorize() {
  double scale = 0.0;
  for (cplx v : ab_) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) throw SingularSystemError("zero interface matrix");
  piv_.assign(n_, 0);
  cplx det = 1.0;
  const int uw = ku_ + kl_;  // upper width after fill-in
  for (int c = 0; c < n_; ++c) {
    const int last = std::min(n_ - 1, c + kl_);
    int p = c;
    for (int r = c + 1; r <= last; ++r) {
      if (std::abs(at(r, c)) > std::abs(at(p, c))) p = r;
    }
    piv_[c] = p;
    if (std::abs(at(p, c)) <= 1e-15 * scale) {
      throw SingularSystemError("interface system singular at column " +
                                std::to_string(c));
    }
    const int jmax = std::min(n_ - 1, c + uw);
    if (p != c) {
      for (int j = c; j <= jmax; ++j) std::swap(at(c, j), at(p, j));
      det = -det;
    }
    const cplx pivot = at(c, c);
    det *= pivot;
    for (int r = c + 1; r <= last; ++r) {
      const cplx f = at(r, c) / pivot;
      at(r, c) = f;
      if (f == cplx{0.0}) continue;
      for (int j = c + 1; j <= jmax; ++j) at(r, j) -= f * at(c, j);
    }
  }
  return det;
}

std::vector<cplx> BandMatrix::solve(std::vector<cplx> b) const {
  const int uw = ku_ + kl_;
  for (int c = 0; c < n_; ++c) {
    if (piv_[c] != c) std::swap(b[c], b[piv_[c]]);
    const int last = std::min(n_ - 1, c + kl_);
    for (int r = c + 1; r <= last; ++r) b[r] -= at(r, c) * b[c];
  }
  for (int c = n_ - 1; c >= 0; --c) {
    const int jmax = std::min(n_ - 1, c + uw);
    cplx acc = b[c];
    for (int j = c + 1; j <= jmax; ++j) acc -= at(c, j) * b[j];
    b[c] = acc / at(c, c);
  }
  return b;
}

int unknown_index(int l, Dir d) { return d == Dir::up ? 2 * l : 2 * l - 1; }

SigmaSystem assemble(const LayeredMedium& m, cplx lambda, int s) {
  const int L = m.num_interfaces();
  if (s < 0 || s > L) throw DomainError("source layer out of range");
  SigmaSystem sys;
  sys.lambda = lambda;
  sys.s = s;
  sys.h.resize(L + 1);
  sys.e.assign(L + 1, 1.0);
  for (int l = 0; l <= L; ++l) {
    sys.h[l] = special::vertical_wavenumber(lambda, m.k(l));
    if (sys.h[l] == cplx{0.0}) {
      throw DomainError("spectral point is a branch point of layer " +
                        std::to_string(l));
    }
    if (l > 0 && l < L) {
      sys.e[l] = std::exp(-sys.h[l] * (m.depth(l - 1) - m.depth(l)));
    }
  }
  const int n = 2 * L;
  sys.A = BandMatrix(n, 2, 2);
  for (int l = 0; l < L; ++l) {
    const cplx hu = sys.h[l];
    const cplx hl = sys.h[l + 1];
    for (int r = 0; r < 2; ++r) {
      const auto& row = m.rows(l)[r];
      const int i = 2 * l + r;
      sys.A.set(i, unknown_index(l, Dir::up), row.a_upper - row.b_upper * hu);
      if (l > 0) {
        sys.A.set(i, unknown_index(l, Dir::down),
                  sys.e[l] * (row.a_upper + row.b_upper * hu));
      }
      sys.A.set(i, unknown_index(l + 1, Dir::down),
                -(row.a_lower + row.b_lower * hl));
      if (l + 1 < L) {
        sys.A.set(i, unknown_index(l + 1, Dir::up),
                  -sys.e[l + 1] * (row.a_lower - row.b_lower * hl));
      }
    }
  }
  const cplx four_pi_h = 4.0 * pi * sys.h[s];
  if (s < L) {
    sys.b_up.assign(n, 0.0);
    for (int r = 0; r < 2; ++r) {
      const auto& row = m.rows(s)[r];
      sys.b_up[2 * s + r] = -(row.a_upper + row.b_upper * sys.h[s]) / four_pi_h;
    }
  }
  if (s > 0) {
    sys.b_down.assign(n, 0.0);
    for (int r = 0; r < 2; ++r) {
      const auto& row = m.rows(s - 1)[r];
      sys.b_down[2 * (s - 1) + r] =
          (row.a_lower - row.b_lower * sys.h[s]) / four_pi_h;
    }
  }
  return sys;
}

namespace {

int slot(Dir dt, Dir ds) {
  return 2 * (dt == Dir::up ? 0 : 1) + (ds == Dir::up ? 0 : 1);
}

}  // namespace

cplx SigmaValues::get(int t, Dir dt, Dir ds) const {
  if (t < 0 || t > L) throw DomainError("target layer out of range");
  return values[t][slot(dt, ds)];
}

namespace {

// Entries at rounding level relative to the source term are exact zeros
// (transparent interfaces); keeping the noise would stall adaptive quadrature.
cplx snap(cplx v, const std::vector<cplx>& b) {
  double scale = 0.0;
  for (const cplx& x : b) scale = std::max(scale, std::abs(x));
  return std::abs(v) <= 8.0 * std::numeric_limits<double>::epsilon() * scale ? cplx{0.0} : v;
}

}  // namespace

SigmaValues solve_sigma(const LayeredMedium& m, cplx lambda, int s) {
  auto sys = assemble(m, lambda, s);
  sys.A.factorize();
  const int L = m.num_interfaces();
  SigmaValues out;
  out.s = s;
  out.L = L;
  out.values.assign(L + 1, {cplx{0.0}, cplx{0.0}, cplx{0.0}, cplx{0.0}});
  for (Dir ds : {Dir::up, Dir::down}) {
    const auto& b = ds == Dir::up ? sys.b_up : sys.b_down;
    if (b.empty()) continue;
    const auto x = sys.A.solve(b);
    for (int t = 0; t <= L; ++t) {
      for (Dir dt : {Dir::up, Dir::down}) {
        if (is_admissible(t, dt, L)) {
          out.values[t][slot(dt, ds)] = snap(x[unknown_index(t, dt)], b);
        }
      }
    }
  }
  return out;
}

cplx sigma_component(const LayeredMedium& m, const ReactionComponentId& id,
                     cplx lambda) {
  const int L = m.num_interfaces();
  if (!is_admissible(id, L)) throw InadmissibleError("prohibited component");
  auto sys = assemble(m, lambda, id.s);
  sys.A.factorize();
  const auto& b = id.dir_s == Dir::up ? sys.b_up : sys.b_down;
  return snap(sys.A.solve(b)[unknown_index(id.t, id.dir_t)], b);
}

cplx determinant(const LayeredMedium& m, cplx lambda) {
  auto sys = assemble(m, lambda, 0);
  try {
    return sys.A.factorize();
  } catch (const SingularSystemError&) {
    return 0.0;
  }
}

cplx pole_function(const LayeredMedium& m, cplx lambda) {
  auto sys = assemble(m, lambda, 0);
  cplx det;
  try {
    det = sys.A.factorize();
  } catch (const SingularSystemError&) {
    return 0.0;
  }
  const int L = m.num_interfaces();
  for (int l = 1; l < L; ++l) {
    const bool propagating = std::abs(lambda.real()) < m.k(l).real();
    det /= sys.h[l] * (propagating ? sys.e[l] : cplx{1.0});
  }
  return det;
}

cplx PoleInfo::residue(const ReactionComponentId& id) const {
  for (const auto& [key, v] : residues) {
    if (key == id) return v;
  }
  return 0.0;
}

namespace {

double refine_root(const LayeredMedium& m, double a, double b, double fa) {
  for (int it = 0; it < 200 && b - a > 4e-16 * std::abs(b); ++it) {
    const double c = 0.5 * (a + b);
    const double fc = pole_function(m, c).real();
    if (fc == 0.0) return c;
    if ((fc > 0.0) == (fa > 0.0)) {
      a = c;
      fa = fc;
    } else {
      b = c;
    }
  }
  return 0.5 * (a + b);
}

// Follows the root under complex wavenumbers by a secant iteration on det A.
cplx perturbed_root(const LayeredMedium& lossy, double start) {
  cplx x0 = start;
  cplx x1 = start * (1.0 + 1e-7);
  cplx f0 = determinant(lossy, x0);
  cplx f1 = determinant(lossy, x1);
  for (int it = 0; it < 100; ++it) {
    if (f1 == f0) break;
    const cplx x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
    x0 = x1;
    f0 = f1;
    x1 = x2;
    f1 = determinant(lossy, x1);
    if (std::abs(x1 - x0) < 1e-14 * std::abs(x1)) break;
  }
  return x1;
}

PoleInfo characterize(const LayeredMedium& m, double root, double eps) {
  PoleInfo info;
  info.location = root;
  const int L = m.num_interfaces();
  // Steps stay well inside the disc of analyticity bounded by the nearest
  // branch point.
  double gap = std::numeric_limits<double>::infinity();
  for (const cplx& k : m.wavenumbers()) gap = std::min(gap, std::abs(root - k.real()));
  const double d1 = std::min(1e-4 * root, 0.02 * gap);
  const double d2 = d1 / 10.0;
  for (int s = 0; s <= L; ++s) {
    const auto p1 = solve_sigma(m, root + d1, s);
    const auto m1 = solve_sigma(m, root - d1, s);
    const auto p2 = solve_sigma(m, root + d2, s);
    const auto m2 = solve_sigma(m, root - d2, s);
    for (int t = 0; t <= L; ++t) {
      for (const auto& id : admissible_components(t, s, L)) {
        const cplx r1 = 0.5 * d1 * (p1.get(id) - m1.get(id));
        const cplx r2 = 0.5 * d2 * (p2.get(id) - m2.get(id));
        const cplx s1 = 0.5 * d1 * (p1.get(id) + m1.get(id));
        const cplx s2 = 0.5 * d2 * (p2.get(id) + m2.get(id));
        const cplx r = (100.0 * r2 - r1) / 99.0;
        // A double pole makes the even part grow as the step shrinks.
        if (std::abs(s2) > 2.0 * std::abs(s1) &&
            std::abs(s2) > 1e-3 * std::abs(r) + 1e-300) {
          throw IllPosedError("pole at " + std::to_string(root) +
                              " is not of order one");
        }
        info.residues.emplace_back(id, r);
      }
    }
  }
  const cplx moved = perturbed_root(m.with_loss(eps), root);
  info.side = moved.imag() >= 0.0 ? 1 : -1;
  return info;
}

}  // namespace

std::vector<PoleInfo> find_real_poles(const LayeredMedium& m, double lo,
                                      double hi, double eps,
                                      const PoleScanConfig& cfg) {
  if (!(lo > 0.0) || !(hi > lo)) throw DomainError("pole scan needs 0 < lo < hi");
  const int L = m.num_interfaces();
  std::vector<double> cuts{lo, hi};
  for (int l = 0; l <= L; ++l) {
    const double k = m.k_real(l);
    if (k > lo && k < hi) cuts.push_back(k);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const double step = m.k_min() * cfg.step_fraction;

  std::vector<double> roots;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i];
    double b = cuts[i + 1];
    for (int l = 0; l <= L; ++l) {
      const double k = m.k_real(l);
      if (std::abs(a - k) < cfg.branch_margin * k) a = k * (1.0 + cfg.branch_margin);
      if (std::abs(b - k) < cfg.branch_margin * k) b = k * (1.0 - cfg.branch_margin);
    }
    if (!(b > a)) continue;
    const int nsteps = std::max(2, int(std::ceil((b - a) / step)));
    double xp = a;
    double fp = pole_function(m, xp).real();
    double fpp = fp;
    for (int j = 1; j <= nsteps; ++j) {
      const double x = a + (b - a) * j / nsteps;
      const double f = pole_function(m, x).real();
      if (fp == 0.0) {
        roots.push_back(xp);
      } else if ((f > 0.0) != (fp > 0.0) && f != 0.0) {
        roots.push_back(refine_root(m, xp, x, fp));
      } else if (j >= 2 && std::abs(fp) < std::abs(f) &&
                 std::abs(fp) < std::abs(fpp) &&
                 std::abs(fp) < 1e-8 * std::max(std::abs(f), std::abs(fpp))) {
        // A touching zero without a sign change is an even-order root.
        throw IllPosedError("even-order root of det A near " + std::to_string(xp));
      }
      fpp = fp;
      xp = x;
      fp = f;
    }
  }
  std::vector<PoleInfo> poles;
  for (double r : roots) poles.push_back(characterize(m, r, eps));
  return poles;
}

std::vector<PoleInfo> find_real_poles(const LayeredMedium& m, double eps) {
  double lo = std::max(m.k_real(0), m.k_real(m.num_interfaces()));
  double hi = 1.2 * m.k_max() + 1.0;
  return find_real_poles(m, lo, hi, eps);
}

GrowthReport sigma_growth_probe(const LayeredMedium& m,
                                const ReactionComponentId& id,
                                const std::vector<double>& samples) {
  GrowthReport rep;
  std::vector<double> xs;
  std::vector<double> ys;
  double prev = -1.0;
  rep.max_log_ratio = -std::numeric_limits<double>::infinity();
  for (double lam : samples) {
    const double a = std::abs(sigma_component(m, id, lam));
    if (a < 1e-300) continue;
    const double lg = std::log(a);
    const double ratio = lg / lam;
    rep.max_log_ratio = std::max(rep.max_log_ratio, ratio);
    rep.last_log_ratio = ratio;
    if (prev >= 0.0 && std::abs(ratio) > prev * (1.0 + 1e-12)) rep.decreasing = false;
    prev = std::abs(ratio);
    xs.push_back(std::log(lam));
    ys.push_back(lg);
  }
  if (xs.size() < 2) {
    rep.degenerate = true;
    rep.max_log_ratio = 0.0;
    return rep;
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= double(xs.size());
  my /= double(xs.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  rep.fitted_degree = sxx > 0.0 ? sxy / sxx : 0.0;
  return rep;
}

}  // namespace layerfmm::sigma
