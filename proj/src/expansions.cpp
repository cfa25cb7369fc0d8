#include "layerfmm/expansions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "layerfmm/special.hpp"

namespace layerfmm::expansions {

namespace {

// J_n(z) for |n| <= nmax from one recurrence pass.
class BesselTable {
 public:
  BesselTable(int nmax, cplx z) : j_(special::bessel_j_array(nmax, z)) {}
  cplx operator()(int n) const {
    const cplx v = j_[std::abs(n)];
    return (n < 0 && (n & 1)) ? -v : v;
  }

 private:
  std::vector<cplx> j_;
};

class HankelTable {
 public:
  HankelTable(int nmax, double x) : h_(special::hankel1_array(nmax, x)) {}
  cplx operator()(int n) const {
    const cplx v = h_[std::abs(n)];
    return (n < 0 && (n & 1)) ? -v : v;
  }

 private:
  std::vector<cplx> h_;
};

// e^{i n phi} for |n| <= nmax.
class PhaseTable {
 public:
  PhaseTable(int nmax, double phi) : nmax_(nmax), e_(2 * nmax + 1) {
    for (int n = -nmax; n <= nmax; ++n) e_[n + nmax] = std::polar(1.0, n * phi);
  }
  cplx operator()(int n) const { return e_[n + nmax_]; }

 private:
  int nmax_;
  std::vector<cplx> e_;
};

void require_order(int P, const char* what) {
  if (P < 1) throw DomainError(std::string(what) + " order must be at least 1");
}

std::vector<quad::OrderTerm> corner_terms(int P, int M) {
  std::vector<quad::OrderTerm> terms;
  for (int p : {-(P - 1), 0, P - 1}) {
    for (int m : {-(M - 1), 0, M - 1}) terms.push_back({p, m});
  }
  std::sort(terms.begin(), terms.end(), [](auto a, auto b) {
    return a.p != b.p ? a.p < b.p : a.m < b.m;
  });
  terms.erase(std::unique(terms.begin(), terms.end(),
                          [](auto a, auto b) { return a.p == b.p && a.m == b.m; }),
              terms.end());
  return terms;
}

}  // namespace

// ---------------------------------------------------------------------------
// Free space

FreeSpaceME fs_me(std::span<const Source> sources, Point center, double k, int P) {
  require_order(P, "multipole");
  FreeSpaceME me{center, k, P, 0.0, std::vector<cplx>(2 * P - 1, 0.0)};
  for (const auto& src : sources) {
    const Point v = src.x - center;
    const double rho = norm(v);
    me.radius = std::max(me.radius, rho);
    const BesselTable J(P - 1, k * rho);
    const PhaseTable e(P - 1, -angle(v));
    for (int p = -(P - 1); p < P; ++p) me.coeffs[order_index(p, P)] += src.q * J(p) * e(p);
  }
  return me;
}

cplx fs_me_eval(const FreeSpaceME& me, Point x, double c0) {
  const Point v = x - me.center;
  const double rho = norm(v);
  if (!(rho > c0 * me.radius) || rho == 0.0) {
    throw FarFieldError("target too close to the multipole center");
  }
  const HankelTable H(me.P - 1, me.k * rho);
  const PhaseTable e(me.P - 1, angle(v));
  cplx sum = 0.0;
  for (int p = -(me.P - 1); p < me.P; ++p) sum += me.coeff(p) * H(p) * e(p);
  return 0.25 * I * sum;
}

FreeSpaceME fs_m2m(const FreeSpaceME& me, Point new_center) {
  const int P = me.P;
  const Point b = me.center - new_center;
  const BesselTable J(2 * P - 2, me.k * norm(b));
  const PhaseTable e(2 * P - 2, -angle(b));
  FreeSpaceME out{new_center, me.k, P, me.radius + norm(b),
                  std::vector<cplx>(2 * P - 1, 0.0)};
  for (int p = -(P - 1); p < P; ++p) {
    cplx acc = 0.0;
    for (int q = -(P - 1); q < P; ++q) acc += me.coeff(q) * J(p - q) * e(p - q);
    out.coeffs[order_index(p, P)] = acc;
  }
  return out;
}

FreeSpaceLE fs_m2l(const FreeSpaceME& me, Point local_center, int M, double c0) {
  require_order(M, "local");
  const Point b = local_center - me.center;
  const double d = norm(b);
  if (!(d > c0 * me.radius)) {
    throw FarFieldError("local center too close to the multipole center");
  }
  const int P = me.P;
  const int nmax = P + M - 2;
  const HankelTable H(nmax, me.k * d);
  const PhaseTable e(nmax, angle(b));
  FreeSpaceLE out{local_center, me.k, M, d - me.radius,
                  std::vector<cplx>(2 * M - 1, 0.0)};
  for (int m = -(M - 1); m < M; ++m) {
    cplx acc = 0.0;
    for (int p = -(P - 1); p < P; ++p) acc += me.coeff(p) * H(p - m) * e(p - m);
    out.coeffs[order_index(m, M)] = 0.25 * I * acc;
  }
  return out;
}

FreeSpaceLE fs_l2l(const FreeSpaceLE& le, Point new_center, double c0) {
  const Point b = new_center - le.center;
  const double d = norm(b);
  if (!(c0 * d < le.far_distance) && d > 0.0) {
    throw FarFieldError("local shift too large for the source distance");
  }
  const int M = le.M;
  const BesselTable J(2 * M - 2, le.k * d);
  const PhaseTable e(2 * M - 2, angle(b));
  FreeSpaceLE out{new_center, le.k, M, le.far_distance - d,
                  std::vector<cplx>(2 * M - 1, 0.0)};
  for (int q = -(M - 1); q < M; ++q) {
    cplx acc = 0.0;
    for (int m = -(M - 1); m < M; ++m) acc += le.coeff(m) * J(m - q) * e(m - q);
    out.coeffs[order_index(q, M)] = acc;
  }
  return out;
}

cplx fs_le_eval(const FreeSpaceLE& le, Point x, double c0) {
  const Point v = x - le.center;
  const double rho = norm(v);
  if (!(c0 * rho < le.far_distance) && rho > 0.0) {
    throw FarFieldError("target too far from the local center");
  }
  const BesselTable J(le.M - 1, le.k * rho);
  const PhaseTable e(le.M - 1, angle(v));
  cplx sum = 0.0;
  for (int m = -(le.M - 1); m < le.M; ++m) sum += le.coeff(m) * J(m) * e(m);
  return sum;
}

// ---------------------------------------------------------------------------
// Reaction components

double polarized_offset_distance(const LayeredMedium& m,
                                 const ReactionComponentId& id, Point x,
                                 Point xs) {
  const auto g = quad::offset_geometry(m, id, x, xs);
  return std::hypot(g.dx, g.ht + g.hs);
}

MultipoleExpansion me_coeffs(const LayeredMedium& m, const ReactionComponentId& id,
                             std::span<const Source> sources, Point center, int P) {
  require_order(P, "multipole");
  const double d = relevant_interface(m, id.s, id.dir_s);
  const int ts = tau(id.dir_s);
  if (!(ts * (center.y - d) > 0.0)) {
    throw DomainError("multipole center on the wrong side of its interface");
  }
  MultipoleExpansion me{center, id.dir_s, d, m.k(id.s), P, 0.0,
                        std::vector<cplx>(2 * P - 1, 0.0)};
  for (const auto& src : sources) {
    if (!(ts * (src.x.y - d) > 0.0)) {
      throw DomainError("source and multipole center on opposite sides");
    }
    const Point v = src.x - center;
    const double rho = norm(v);
    me.radius = std::max(me.radius, rho);
    const BesselTable J(P - 1, me.k_s * rho);
    const PhaseTable e(P - 1, ts * angle(v));
    for (int p = -(P - 1); p < P; ++p) me.coeffs[order_index(p, P)] += src.q * J(p) * e(p);
  }
  return me;
}

MultipoleExpansion m2m(const MultipoleExpansion& me, Point new_center) {
  const int ts = tau(me.dir_s);
  if (!(ts * (new_center.y - me.interface_depth) > 0.0)) {
    throw DomainError("new multipole center on the wrong side of its interface");
  }
  const int P = me.P;
  const Point b = me.center - new_center;
  const BesselTable J(2 * P - 2, me.k_s * norm(b));
  const PhaseTable e(2 * P - 2, ts * angle(b));
  MultipoleExpansion out = me;
  out.center = new_center;
  out.radius = me.radius + norm(b);
  for (int p = -(P - 1); p < P; ++p) {
    cplx acc = 0.0;
    for (int q = -(P - 1); q < P; ++q) acc += me.coeff(q) * J(p - q) * e(p - q);
    out.coeffs[order_index(p, P)] = acc;
  }
  return out;
}

std::vector<cplx> expansion_functions(const quad::SpectralContext& ctx,
                                      const ReactionComponentId& id, Point x,
                                      Point center, int P,
                                      const quad::QuadratureSpec& spec) {
  require_order(P, "multipole");
  const auto g = quad::offset_geometry(ctx.medium(), id, x, center);
  const auto rule = quad::build_rule(ctx, id, {g}, corner_terms(P, 1), spec);
  return quad::apply_rule_orders(rule, g, P, 1);
}

cplx me_eval(const quad::SpectralContext& ctx, const ReactionComponentId& id,
             const MultipoleExpansion& me, Point x, const ExpansionOptions& opt) {
  const double D = polarized_offset_distance(ctx.medium(), id, x, me.center);
  if (!(D > opt.c0 * me.radius)) {
    throw FarFieldError("target violates the multipole far-field condition");
  }
  const auto Ip = expansion_functions(ctx, id, x, me.center, me.P, opt.quad);
  cplx sum = 0.0;
  for (int p = -(me.P - 1); p < me.P; ++p) sum += Ip[order_index(p, me.P)] * me.coeff(p);
  return sum;
}

LocalExpansion le_coeffs_direct(const quad::SpectralContext& ctx,
                                const ReactionComponentId& id, Point center,
                                std::span<const Source> sources, int M,
                                const ExpansionOptions& opt) {
  require_order(M, "local");
  if (sources.empty()) throw DomainError("local expansion needs sources");
  const auto& m = ctx.medium();
  std::vector<quad::Geometry> reps;
  double far = std::numeric_limits<double>::infinity();
  for (const auto& src : sources) {
    reps.push_back(quad::offset_geometry(m, id, center, src.x));
    far = std::min(far, std::hypot(reps.back().dx, reps.back().ht + reps.back().hs));
  }
  const auto rule = quad::build_rule(ctx, id, reps, corner_terms(1, M), opt.quad);
  LocalExpansion le{center, id.dir_t, m.k(id.t), M, far,
                    std::vector<cplx>(2 * M - 1, 0.0)};
  for (std::size_t j = 0; j < sources.size(); ++j) {
    const auto Lm = quad::apply_rule_orders(rule, reps[j], 1, M);
    for (int i = 0; i < 2 * M - 1; ++i) le.coeffs[i] += sources[j].q * Lm[i];
  }
  return le;
}

cplx le_eval(const LocalExpansion& le, Point x, double c0) {
  const Point v = x - le.center;
  const double rho = norm(v);
  if (!(c0 * rho < le.far_distance) && rho > 0.0) {
    throw FarFieldError("target violates the local far-field condition");
  }
  const BesselTable J(le.M - 1, le.k_t * rho);
  const PhaseTable e(le.M - 1, tau(le.dir_t) * angle(v));
  cplx sum = 0.0;
  for (int mm = -(le.M - 1); mm < le.M; ++mm) sum += le.coeff(mm) * J(mm) * e(mm);
  return sum;
}

TranslationMatrix m2l(const quad::SpectralContext& ctx,
                      const ReactionComponentId& id, Point local_center,
                      Point source_center, int M, int P,
                      const ExpansionOptions& opt, double source_radius) {
  require_order(M, "local");
  require_order(P, "multipole");
  const auto g = quad::offset_geometry(ctx.medium(), id, local_center, source_center);
  const double D = std::hypot(g.dx, g.ht + g.hs);
  if (!(D > opt.c0 * source_radius)) {
    throw FarFieldError("centers violate the M2L far-field condition");
  }
  const auto rule = quad::build_rule(ctx, id, {g}, corner_terms(P, M), opt.quad);
  TranslationMatrix A{local_center, source_center, id, ctx.medium().k(id.t), M, P,
                      D, quad::apply_rule_orders(rule, g, P, M)};
  return A;
}

LocalExpansion apply_m2l(const TranslationMatrix& A, const MultipoleExpansion& me,
                         double c0) {
  if (me.P != A.P) throw DomainError("multipole order does not match M2L matrix");
  if (!(me.center == A.source_center)) {
    throw DomainError("multipole center does not match M2L matrix");
  }
  if (!(A.polarized_distance > c0 * me.radius)) {
    throw FarFieldError("multipole radius violates the M2L far-field condition");
  }
  LocalExpansion le{A.local_center, A.id.dir_t, A.k_t, A.M,
                    A.polarized_distance - me.radius,
                    std::vector<cplx>(2 * A.M - 1, 0.0)};
  const int np = 2 * A.P - 1;
  for (int i = 0; i < 2 * A.M - 1; ++i) {
    cplx acc = 0.0;
    for (int j = 0; j < np; ++j) acc += A.entries[std::size_t(i) * np + j] * me.coeffs[j];
    le.coeffs[i] = acc;
  }
  return le;
}

LocalExpansion l2l(const LocalExpansion& le, Point new_center, double c0) {
  const Point b = new_center - le.center;
  const double d = norm(b);
  if (!(c0 * d < le.far_distance) && d > 0.0) {
    throw FarFieldError("local shift violates the far-field condition");
  }
  const int M = le.M;
  const BesselTable J(2 * M - 2, le.k_t * d);
  const PhaseTable e(2 * M - 2, tau(le.dir_t) * angle(b));
  LocalExpansion out = le;
  out.center = new_center;
  out.far_distance = le.far_distance - d;
  for (int mm = -(M - 1); mm < M; ++mm) {
    cplx acc = 0.0;
    for (int p = -(M - 1); p < M; ++p) acc += le.coeff(p) * J(p - mm) * e(p - mm);
    out.coeffs[order_index(mm, M)] = acc;
  }
  return out;
}

int choose_truncation(double ratio, double eps, double k, double rho_geom,
                      const TruncationConfig& cfg) {
  if (!(ratio >= 0.0) || !(eps > 0.0 && eps < 1.0) || !(k > 0.0) ||
      !(rho_geom >= 0.0)) {
    throw DomainError("invalid truncation request");
  }
  if (ratio > 1.0 / cfg.c0) {
    throw FarFieldError("ratio exceeds the far-field bound 1/c0");
  }
  int geometric = 0;
  if (ratio > 0.0) {
    geometric = int(std::ceil((std::log(eps) - std::log(cfg.safety)) / std::log(ratio)));
  }
  const int oscillatory = int(std::ceil(std::exp(1.0) * k * rho_geom));
  return std::max({geometric, oscillatory, cfg.min_order});
}

}  // namespace layerfmm::expansions
