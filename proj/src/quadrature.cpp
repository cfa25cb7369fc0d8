#include "layerfmm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <string>
#include <unordered_map>

#include "layerfmm/special.hpp"

namespace layerfmm::quad {

namespace {

// QUADPACK qk15 abscissae and weights.
constexpr double xgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double wgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  int interval = 0;
  double u0 = 0.0;
  double u1 = 0.0;
  std::vector<cplx> value;
  std::vector<double> error;
  std::vector<double> resabs;
};

// Map from the panel variable u to x, with dx/du.
struct Mapping {
  double a;
  double b;
  EndSingularity sing;

  void operator()(double u, double& x, double& jac) const {
    switch (sing) {
      case EndSingularity::none:
        x = u;
        jac = 1.0;
        return;
      case EndSingularity::left:
        x = a + (b - a) * u * u;
        if (x <= a) x = std::nextafter(a, b);
        jac = 2.0 * (b - a) * u;
        return;
      case EndSingularity::right:
        x = b - (b - a) * u * u;
        if (x >= b) x = std::nextafter(b, a);
        jac = 2.0 * (b - a) * u;
        return;
    }
  }
};

Mapping mapping_of(const Interval& iv) { return {iv.a, iv.b, iv.sing}; }

std::pair<double, double> u_range(const Interval& iv) {
  if (iv.sing == EndSingularity::none) return {iv.a, iv.b};
  return {0.0, 1.0};
}

// Kronrod node k of 15 (0..14) on [u0, u1].
double node_u(double u0, double u1, int k) {
  const double c = 0.5 * (u0 + u1);
  const double hw = 0.5 * (u1 - u0);
  if (k < 7) return c - hw * xgk[k];
  if (k == 7) return c;
  return c + hw * xgk[14 - k];
}

double node_w(double u0, double u1, int k) {
  const double hw = 0.5 * (u1 - u0);
  return hw * wgk[k < 8 ? k : 14 - k];
}

void evaluate_panel(const IndexedIntegrand& f, int n, const Mapping& map,
                    int source, Panel& p, std::vector<cplx>& buf, long& evals) {
  p.value.assign(n, 0.0);
  p.error.assign(n, 0.0);
  p.resabs.assign(n, 0.0);
  std::vector<cplx> fv(std::size_t(15) * n);
  const double hw = 0.5 * (p.u1 - p.u0);
  for (int k = 0; k < 15; ++k) {
    double x = 0.0, jac = 0.0;
    map(node_u(p.u0, p.u1, k), x, jac);
    f(source, x, buf.data());
    ++evals;
    for (int j = 0; j < n; ++j) fv[std::size_t(k) * n + j] = buf[j] * jac;
  }
  for (int j = 0; j < n; ++j) {
    cplx rk = 0.0;
    cplx rg = 0.0;
    double ra = 0.0;
    for (int k = 0; k < 15; ++k) {
      const cplx v = fv[std::size_t(k) * n + j];
      const int kk = k < 8 ? k : 14 - k;
      rk += wgk[kk] * v;
      ra += wgk[kk] * std::abs(v);
      if (kk % 2 == 1) rg += wg[kk / 2] * v;
    }
    const cplx mean = 0.5 * rk;
    double rasc = 0.0;
    for (int k = 0; k < 15; ++k) {
      const int kk = k < 8 ? k : 14 - k;
      rasc += wgk[kk] * std::abs(fv[std::size_t(k) * n + j] - mean);
    }
    rk *= hw;
    rg *= hw;
    ra *= std::abs(hw);
    rasc *= std::abs(hw);
    double err = std::abs(rk - rg);
    if (rasc != 0.0 && err != 0.0) {
      err = rasc * std::min(1.0, std::pow(200.0 * err / rasc, 1.5));
    }
    const double eps = std::numeric_limits<double>::epsilon();
    if (ra > std::numeric_limits<double>::min() / (50.0 * eps)) {
      err = std::max(50.0 * eps * ra, err);
    }
    p.value[j] = rk;
    p.error[j] = err;
    p.resabs[j] = ra;
  }
}

}  // namespace

AdaptiveResult integrate_adaptive(const VectorIntegrand& f, int n,
                                  const std::vector<Interval>& intervals,
                                  const AdaptiveOptions& opt) {
  return integrate_adaptive(
      IndexedIntegrand([&](int, double x, cplx* out) { f(x, out); }), n,
      intervals, opt);
}

AdaptiveResult integrate_adaptive(const IndexedIntegrand& f, int n,
                                  const std::vector<Interval>& intervals,
                                  const AdaptiveOptions& opt) {
  AdaptiveResult res;
  std::vector<Mapping> maps;
  std::vector<int> source;
  std::vector<Panel> panels;
  std::vector<cplx> buf(n);
  for (int i = 0; i < int(intervals.size()); ++i) {
    const auto& iv = intervals[i];
    if (!(iv.b > iv.a)) continue;
    maps.push_back(mapping_of(iv));
    source.push_back(i);
    Panel p;
    p.interval = int(maps.size()) - 1;
    std::tie(p.u0, p.u1) = u_range(iv);
    evaluate_panel(f, n, maps.back(), i, p, buf, res.evaluations);
    panels.push_back(std::move(p));
  }

  std::vector<cplx> total(n);
  std::vector<double> terr(n);
  std::vector<double> tabs(n);
  auto recompute_totals = [&] {
    std::fill(total.begin(), total.end(), cplx{0.0});
    std::fill(terr.begin(), terr.end(), 0.0);
    std::fill(tabs.begin(), tabs.end(), 0.0);
    for (const auto& p : panels) {
      for (int j = 0; j < n; ++j) {
        total[j] += p.value[j];
        terr[j] += p.error[j];
        tabs[j] += p.resabs[j];
      }
    }
  };
  auto allowed = [&](int j) {
    return std::max(opt.abs_tol,
                    opt.rel_tol * std::max(std::abs(total[j]),
                                           opt.floor_fraction * tabs[j]));
  };
  auto done = [&] {
    for (int j = 0; j < n; ++j) {
      if (terr[j] > allowed(j)) return false;
    }
    return true;
  };
  const double floor_eps = 50.0 * std::numeric_limits<double>::epsilon();
  auto at_rounding_floor = [&] {
    for (int j = 0; j < n; ++j) {
      if (terr[j] > std::max(allowed(j), 4.0 * floor_eps * tabs[j])) return false;
    }
    return true;
  };
  auto key_of = [&](const Panel& p) {
    const double width = std::abs(p.u1 - p.u0);
    const double ref = std::max(std::abs(p.u0), std::abs(p.u1));
    if (width <= 1e-14 * std::max(ref, 1e-300)) return 0.0;
    double k = 0.0;
    for (int j = 0; j < n; ++j) {
      // Errors already at the rounding floor cannot shrink by bisection.
      if (p.error[j] <= 1.01 * floor_eps * p.resabs[j]) continue;
      const double scale = std::max(allowed(j), 1e-300);
      k = std::max(k, p.error[j] / scale);
    }
    return k;
  };

  using Entry = std::pair<double, int>;
  std::priority_queue<Entry> heap;
  auto rebuild = [&] {
    recompute_totals();
    heap = {};
    for (int i = 0; i < int(panels.size()); ++i) heap.emplace(key_of(panels[i]), i);
  };
  rebuild();
  int since_rebuild = 0;
  while (!done()) {
    if (int(panels.size()) >= opt.max_panels || heap.empty()) break;
    if (at_rounding_floor()) break;
    const auto [key, idx] = heap.top();
    if (key <= 0.0) break;
    heap.pop();
    Panel parent = std::move(panels[idx]);
    const double mid = 0.5 * (parent.u0 + parent.u1);
    Panel left;
    left.interval = parent.interval;
    left.u0 = parent.u0;
    left.u1 = mid;
    Panel right;
    right.interval = parent.interval;
    right.u0 = mid;
    right.u1 = parent.u1;
    evaluate_panel(f, n, maps[parent.interval], source[parent.interval], left,
                   buf, res.evaluations);
    evaluate_panel(f, n, maps[parent.interval], source[parent.interval], right,
                   buf, res.evaluations);
    for (int j = 0; j < n; ++j) {
      total[j] += left.value[j] + right.value[j] - parent.value[j];
      terr[j] += left.error[j] + right.error[j] - parent.error[j];
      tabs[j] += left.resabs[j] + right.resabs[j] - parent.resabs[j];
    }
    panels[idx] = std::move(left);
    panels.push_back(std::move(right));
    heap.emplace(key_of(panels[idx]), idx);
    heap.emplace(key_of(panels.back()), int(panels.size()) - 1);
    if (++since_rebuild >= 64) {
      rebuild();
      since_rebuild = 0;
    }
  }

  std::sort(panels.begin(), panels.end(), [](const Panel& a, const Panel& b) {
    return a.interval != b.interval ? a.interval < b.interval : a.u0 < b.u0;
  });
  recompute_totals();
  res.converged = done();
  res.roundoff_limited = !res.converged && int(panels.size()) < opt.max_panels;
  res.value = total;
  res.error = terr;
  res.panels = int(panels.size());
  res.nodes.reserve(panels.size() * 15);
  for (const auto& p : panels) {
    for (int k = 0; k < 15; ++k) {
      double x = 0.0, jac = 0.0;
      maps[p.interval](node_u(p.u0, p.u1, k), x, jac);
      res.nodes.push_back({x, node_w(p.u0, p.u1, k) * jac, source[p.interval]});
    }
  }
  if (!res.converged && !res.roundoff_limited && opt.throw_on_failure) {
    double worst = 0.0;
    for (int j = 0; j < n; ++j) worst = std::max(worst, terr[j] / std::max(allowed(j), 1e-300));
    throw ConvergenceError("adaptive quadrature stopped at " +
                           std::to_string(res.panels) +
                           " panels with error/tolerance " + std::to_string(worst));
  }
  return res;
}

cplx integrate(const std::function<cplx(double)>& f, double a, double b,
               const AdaptiveOptions& opt, EndSingularity sing) {
  const auto r = integrate_adaptive([&](double x, cplx* out) { out[0] = f(x); },
                                    1, {Interval{a, b, sing}}, opt);
  return r.value[0];
}

// ---------------------------------------------------------------------------

SpectralContext::SpectralContext(LayeredMedium m, double side_eps)
    : medium_(std::move(m)) {
  const int L = medium_.num_interfaces();
  const double lo = std::max(medium_.k_real(0), medium_.k_real(L));
  const double hi = 1.2 * medium_.k_max() + 1.0;
  if (hi > lo) poles_ = sigma::find_real_poles(medium_, lo, hi, side_eps);
}

double SpectralContext::k_split(const QuadratureSpec& spec) const {
  const double def = 1.2 * medium_.k_max() + 1.0;
  if (spec.k_split <= 0.0) return def;
  if (!(spec.k_split > medium_.k_max())) {
    throw DomainError("k_split must exceed every wavenumber");
  }
  for (const auto& p : poles_) {
    if (!(spec.k_split > p.location)) {
      throw DomainError("k_split must exceed every surface-wave pole");
    }
  }
  return spec.k_split;
}

cplx minus_i_w(cplx lambda, cplx k) {
  const cplx h = special::vertical_wavenumber(lambda, k);
  const cplx plus = lambda + h;
  const cplx minus = lambda - h;
  const cplx w = std::abs(plus) >= std::abs(minus) ? k / plus : minus / k;
  return -I * w;
}

cplx i_over_w(cplx lambda, cplx k) {
  const cplx h = special::vertical_wavenumber(lambda, k);
  const cplx plus = lambda + h;
  const cplx minus = lambda - h;
  return std::abs(plus) >= std::abs(minus) ? I * plus / k : I * k / minus;
}

cplx plane_wave_term(cplx lambda, cplx kt, cplx ks, const Geometry& g,
                     const OrderTerm& term) {
  const cplx ht = special::vertical_wavenumber(lambda, kt);
  const cplx hs = special::vertical_wavenumber(lambda, ks);
  cplx expo = -ht * g.ht - hs * g.hs + I * lambda * g.dx;
  if (term.p != 0) expo += double(term.p) * std::log(minus_i_w(lambda, ks));
  if (term.m != 0) expo += double(term.m) * std::log(i_over_w(lambda, kt));
  return std::exp(expo);
}

cplx apply_rule(const SpectralRule& rule, const Geometry& g,
                const OrderTerm& term) {
  cplx sum = 0.0;
  for (const auto& part : rule.parts) {
    for (std::size_t i = 0; i < part.lambda.size(); ++i) {
      cplx v = plane_wave_term(part.lambda[i], part.kt, part.ks, g, term);
      if (part.fold) v += plane_wave_term(-part.lambda[i], part.kt, part.ks, g, term);
      sum += part.weight[i] * v;
    }
  }
  return sum;
}

Geometry component_geometry(const LayeredMedium& m, const ReactionComponentId& id,
                            Point x, Point xs) {
  const int L = m.num_interfaces();
  if (!is_admissible(id, L)) {
    throw InadmissibleError("component prohibited by the incoming-wave rule");
  }
  if (layer_of(m, x.y) != id.t) throw DomainError("target not in layer t");
  if (layer_of(m, xs.y) != id.s) throw DomainError("source not in layer s");
  Geometry g;
  g.dx = x.x - xs.x;
  g.ht = tau(id.dir_t) * (x.y - relevant_interface(m, id.t, id.dir_t));
  g.hs = tau(id.dir_s) * (xs.y - relevant_interface(m, id.s, id.dir_s));
  if (!(g.ht > 0.0) || !(g.hs > 0.0)) {
    throw DomainError("points are not on the polarized side of their interfaces");
  }
  return g;
}

Geometry offset_geometry(const LayeredMedium& m, const ReactionComponentId& id,
                         Point x, Point xs) {
  if (!is_admissible(id, m.num_interfaces())) {
    throw InadmissibleError("component prohibited by the incoming-wave rule");
  }
  Geometry g;
  g.dx = x.x - xs.x;
  g.ht = tau(id.dir_t) * (x.y - relevant_interface(m, id.t, id.dir_t));
  g.hs = tau(id.dir_s) * (xs.y - relevant_interface(m, id.s, id.dir_s));
  if (g.ht < 0.0 || g.hs < 0.0 || !(g.ht + g.hs > 0.0)) {
    throw DomainError("points are not on the polarized side of their interfaces");
  }
  return g;
}

namespace {

// Adds w E a^p b^m into out for one spectral point.
void accumulate_orders(cplx lam, cplx w, cplx kt, cplx ks, const Geometry& g,
                       int P, int M, std::vector<cplx>& pa, std::vector<cplx>& pb,
                       std::vector<cplx>& out) {
  const cplx ht = special::vertical_wavenumber(lam, kt);
  const cplx hs = special::vertical_wavenumber(lam, ks);
  const cplx le = -ht * g.ht - hs * g.hs + I * lam * g.dx;
  const cplx a = minus_i_w(lam, ks);
  const cplx b = i_over_w(lam, kt);
  const int np = 2 * P - 1;
  const int nm = 2 * M - 1;
  const double span = (P - 1) * std::abs(std::log(std::abs(a))) +
                      (M - 1) * std::abs(std::log(std::abs(b)));
  if (le.real() + span > 600.0 || le.real() - span < -600.0) {
    // Powers could overflow or underflow on their own; go through logs.
    const cplx la = std::log(a);
    const cplx lb = std::log(b);
    for (int m = 0; m < nm; ++m) {
      for (int p = 0; p < np; ++p) {
        out[m * np + p] +=
            w * std::exp(le + double(p - P + 1) * la + double(m - M + 1) * lb);
      }
    }
    return;
  }
  const cplx E = std::exp(le);
  pa[P - 1] = w * E;
  for (int p = 1; p < P; ++p) {
    pa[P - 1 + p] = pa[P - 2 + p] * a;
    pa[P - 1 - p] = pa[P - p] / a;
  }
  pb[M - 1] = 1.0;
  for (int m = 1; m < M; ++m) {
    pb[M - 1 + m] = pb[M - 2 + m] * b;
    pb[M - 1 - m] = pb[M - m] / b;
  }
  for (int m = 0; m < nm; ++m) {
    cplx* row = out.data() + std::size_t(m) * np;
    const cplx bm = pb[m];
    for (int p = 0; p < np; ++p) row[p] += bm * pa[p];
  }
}

}  // namespace

std::vector<cplx> apply_rule_orders(const SpectralRule& rule, const Geometry& g,
                                    int P, int M) {
  if (P < 1 || M < 1) throw DomainError("orders must be at least 1");
  std::vector<cplx> out(std::size_t(2 * P - 1) * (2 * M - 1), 0.0);
  std::vector<cplx> pa(2 * P - 1), pb(2 * M - 1);
  // With k_t = k_s, i/w_t = 1/(-i w_s) and the entries depend on p - m only.
  bool toeplitz = M > 1 && P > 1;
  for (const auto& part : rule.parts) toeplitz = toeplitz && part.kt == part.ks;
  if (toeplitz) {
    const int N = P + M - 1;
    std::vector<cplx> diag(2 * N - 1, 0.0), pn(2 * N - 1), one(1);
    for (const auto& part : rule.parts) {
      for (std::size_t i = 0; i < part.lambda.size(); ++i) {
        accumulate_orders(part.lambda[i], part.weight[i], part.kt, part.ks, g, N, 1,
                          pn, one, diag);
        if (part.fold) {
          accumulate_orders(-part.lambda[i], part.weight[i], part.kt, part.ks, g,
                            N, 1, pn, one, diag);
        }
      }
    }
    const int np = 2 * P - 1;
    for (int m = -(M - 1); m < M; ++m) {
      for (int p = -(P - 1); p < P; ++p) {
        out[std::size_t(m + M - 1) * np + p + P - 1] = diag[p - m + N - 1];
      }
    }
    return out;
  }
  for (const auto& part : rule.parts) {
    for (std::size_t i = 0; i < part.lambda.size(); ++i) {
      accumulate_orders(part.lambda[i], part.weight[i], part.kt, part.ks, g, P, M,
                        pa, pb, out);
      if (part.fold) {
        accumulate_orders(-part.lambda[i], part.weight[i], part.kt, part.ks, g,
                          P, M, pa, pb, out);
      }
    }
  }
  return out;
}

double lambda_max_estimate(cplx kt, cplx ks, double ht, double hs, int pmax,
                           int mmax, double tol, double k_split) {
  const double H = ht + hs;
  if (!(H > 0.0)) throw DomainError("spectral tail needs positive vertical offset");
  const double kr_s = ks.real();
  const double kr_t = kt.real();
  auto env = [&](double lam) {
    const double hs_r = special::vertical_wavenumber(lam, ks).real();
    const double ht_r = special::vertical_wavenumber(lam, kt).real();
    double e = -ht_r * ht - hs_r * hs + 2.0 * std::log1p(lam);
    if (pmax > 0 && lam > kr_s) {
      e += pmax * std::log((lam + std::sqrt(lam * lam - kr_s * kr_s)) / kr_s);
    }
    if (mmax > 0 && lam > kr_t) {
      e += mmax * std::log((lam + std::sqrt(lam * lam - kr_t * kr_t)) / kr_t);
    }
    return e;
  };
  const double drop = std::log(tol) - std::log(100.0);
  double lam = k_split;
  double peak = env(lam);
  while (lam < 1e7) {
    lam += std::max(0.25 / H, 0.02 * lam);
    const double e = env(lam);
    if (e > peak) {
      peak = e;
      continue;
    }
    if (e < peak + drop) return lam;
  }
  throw ConvergenceError("spectral integrand does not decay; vertical offset too small");
}

namespace {

struct Window {
  double center;
  double half_width;
  cplx residue;
  int side;
};

// Real piece, or a half circle below a branch point (above its mirror).
struct Segment {
  bool arc = false;
  double c = 0.0;
  double r = 0.0;
  int orient = 1;  // +1 passes below the axis, -1 above
};

struct PartPlan {
  std::vector<Interval> intervals;
  std::vector<Segment> segments;
  std::vector<Window> windows;
};

// Point on segment seg at parameter x, with d lambda / dx.
std::pair<cplx, cplx> segment_point(const Segment& seg, double x) {
  if (!seg.arc) return {cplx(x), cplx(1.0)};
  const cplx e = std::polar(1.0, double(seg.orient) * x);
  return {seg.c - seg.r * e, -double(seg.orient) * I * seg.r * e};
}

// Branch points, pole windows and tail pieces for [0, hi] (fold) or [-hi, hi].
// Branch points are passed below on half circles: interior-layer components
// are singular there and the lossy limit puts the singularity above the axis.
PartPlan plan_intervals(const LayeredMedium& m, const ReactionComponentId& id,
                        const std::vector<sigma::PoleInfo>& poles,
                        bool subtract_poles, bool fold, double k_split,
                        double hi, double piece, double max_dx) {
  PartPlan plan;
  const int L = m.num_interfaces();
  std::vector<double> branch;
  for (int l = 0; l <= L; ++l) branch.push_back(m.k_real(l));
  std::sort(branch.begin(), branch.end());
  branch.erase(std::unique(branch.begin(), branch.end()), branch.end());

  std::vector<double> centers{0.0, k_split};
  for (double b : branch) centers.push_back(b);
  for (const auto& p : poles) centers.push_back(p.location);
  auto gap_of = [&](double c) {
    double g = std::numeric_limits<double>::infinity();
    for (double q : centers) {
      if (q != c) g = std::min(g, std::abs(c - q));
    }
    return g;
  };

  struct Mark {
    double x;
    double arc_r;       // > 0 when an arc starts here
    bool window = false;  // a pole window starts here
  };
  std::vector<Mark> marks{{0.0, 0.0}, {k_split, 0.0}};
  // Off the axis e^{i lambda dx} grows like e^{r |dx|}; cap r to keep that O(1).
  const double arc_cap = max_dx > 0.0 ? 1.0 / max_dx : std::numeric_limits<double>::infinity();
  for (double b : branch) {
    const double r = std::min(0.45 * gap_of(b), arc_cap);
    marks.push_back({b - r, r});
    marks.push_back({b + r, 0.0});
  }
  for (const auto& p : poles) {
    const double c = p.location;
    const double w = 0.45 * gap_of(c);
    if (subtract_poles) {
      marks.push_back({c - w, 0.0, true});
      marks.push_back({c + w, 0.0});
      plan.windows.push_back({c, w, p.residue(id), p.side});
    } else {
      marks.push_back({c, 0.0});
    }
  }
  std::sort(marks.begin(), marks.end(),
            [](const Mark& a, const Mark& b) { return a.x < b.x; });

  std::vector<std::pair<Interval, Segment>> positive;
  for (std::size_t i = 0; i + 1 < marks.size(); ++i) {
    const double a = marks[i].x;
    const double b = marks[i + 1].x;
    if (!(b > a)) continue;
    if (marks[i].arc_r > 0.0) {
      const double r = marks[i].arc_r;
      positive.push_back({{0.0, pi, EndSingularity::none}, {true, a + r, r, 1}});
    } else if (!marks[i].window) {
      positive.push_back({{a, b, EndSingularity::none}, {}});
    }
  }
  const int npieces =
      std::clamp(int(std::ceil((hi - k_split) / piece)), 1, 4000);
  for (int i = 0; i < npieces; ++i) {
    positive.push_back({{k_split + (hi - k_split) * i / npieces,
                         k_split + (hi - k_split) * (i + 1) / npieces,
                         EndSingularity::none},
                        {}});
  }
  if (!fold) {
    for (auto it = positive.rbegin(); it != positive.rend(); ++it) {
      if (it->second.arc) {
        plan.intervals.push_back(it->first);
        plan.segments.push_back({true, -it->second.c, it->second.r, -1});
      } else {
        plan.intervals.push_back(
            {-it->first.b, -it->first.a, EndSingularity::none});
        plan.segments.push_back({});
      }
    }
    const std::size_t nw = plan.windows.size();
    for (std::size_t j = 0; j < nw; ++j) {
      auto w = plan.windows[j];
      plan.windows.push_back({-w.center, w.half_width, -w.residue, -w.side});
    }
  }
  for (const auto& [iv, seg] : positive) {
    plan.intervals.push_back(iv);
    plan.segments.push_back(seg);
  }
  return plan;
}

double tail_piece(const std::vector<Geometry>& reps) {
  double dxmax = 0.0;
  double hmin = std::numeric_limits<double>::infinity();
  for (const auto& g : reps) {
    dxmax = std::max(dxmax, std::abs(g.dx));
    hmin = std::min(hmin, g.ht + g.hs);
  }
  double piece = std::max(2.0, 10.0 / hmin);
  if (dxmax > 0.0) piece = std::min(piece, 4.0 * pi / dxmax);
  return piece;
}

struct PartOutcome {
  RulePart part;
  int panels = 0;
  long evals = 0;
};

// 64-point Gauss-Legendre nodes and weights on [-1, 1].
const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre_window() {
  static const auto rule = [] {
    constexpr int n = 64;
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n / 2; ++i) {
      double z = std::cos(pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = z;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        const double dz = p1 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      x[i] = -z;
      x[n - 1 - i] = z;
      w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return std::pair{x, w};
  }();
  return rule;
}

PartOutcome build_part(const LayeredMedium& m, const ReactionComponentId& id,
                       const std::vector<sigma::PoleInfo>& poles,
                       bool subtract_poles, const std::vector<Geometry>& reps,
                       const std::vector<OrderTerm>& terms, bool fold,
                       double k_split, double hi, double piece, double tol,
                       int max_panels, double scale) {
  double max_dx = 0.0;
  for (const auto& g : reps) max_dx = std::max(max_dx, std::abs(g.dx));
  const auto plan = plan_intervals(m, id, poles, subtract_poles, fold, k_split,
                                   hi, piece, max_dx);
  const cplx kt = m.k(id.t);
  const cplx ks = m.k(id.s);
  const int nt = int(terms.size());
  const int n = int(reps.size()) * nt;

  auto term_value = [&](cplx lam, int r, int q) {
    cplx v = plane_wave_term(lam, kt, ks, reps[r], terms[q]);
    if (fold) v += plane_wave_term(-lam, kt, ks, reps[r], terms[q]);
    return v;
  };

  std::map<std::pair<int, double>, std::pair<cplx, cplx>> cache;
  auto f = [&](int seg_index, double x, cplx* out) {
    const Segment& seg = plan.segments[seg_index];
    const auto [lam, dlam] = segment_point(seg, x);
    const cplx sg = sigma::sigma_component(m, id, lam) * dlam;
    cache[{seg_index, x}] = {lam, sg};
    for (int r = 0; r < int(reps.size()); ++r) {
      for (int q = 0; q < nt; ++q) out[r * nt + q] = sg * term_value(lam, r, q);
    }
  };
  AdaptiveOptions opt;
  opt.rel_tol = tol;
  opt.max_panels = max_panels;
  const auto res = integrate_adaptive(f, n, plan.intervals, opt);

  PartOutcome out;
  out.panels = res.panels;
  out.evals = res.evaluations;
  out.part.kt = kt;
  out.part.ks = ks;
  out.part.fold = fold;
  out.part.lambda.reserve(res.nodes.size() + plan.windows.size());
  out.part.weight.reserve(res.nodes.size() + plan.windows.size());
  for (const auto& nd : res.nodes) {
    const auto& [lam, sg] = cache.at({nd.interval, nd.x});
    out.part.lambda.push_back(lam);
    out.part.weight.push_back(scale * nd.w * sg);
  }
  // Pole windows use a fixed symmetric Gauss-Legendre rule: it integrates the
  // principal part to zero, and the window sits well inside the disc of
  // analyticity, so convergence is geometric. Adaptive refinement would
  // instead chase the rounding error of the pole location toward the center.
  const auto& gl = gauss_legendre_window();
  for (const auto& w : plan.windows) {
    for (std::size_t i = 0; i < gl.first.size(); ++i) {
      const double lam = w.center + w.half_width * gl.first[i];
      out.part.lambda.push_back(lam);
      out.part.weight.push_back(scale * w.half_width * gl.second[i] *
                                sigma::sigma_component(m, id, lam));
    }
    out.part.lambda.push_back(w.center);
    out.part.weight.push_back(scale * w.residue * double(w.side) * I * pi);
  }
  return out;
}

int max_abs_p(const std::vector<OrderTerm>& terms) {
  int v = 0;
  for (const auto& t : terms) v = std::max(v, std::abs(t.p));
  return v;
}

int max_abs_m(const std::vector<OrderTerm>& terms) {
  int v = 0;
  for (const auto& t : terms) v = std::max(v, std::abs(t.m));
  return v;
}

}  // namespace

SpectralRule build_rule(const SpectralContext& ctx, const ReactionComponentId& id,
                        const std::vector<Geometry>& reps,
                        const std::vector<OrderTerm>& terms,
                        const QuadratureSpec& spec) {
  if (reps.empty() || terms.empty()) throw DomainError("empty rule request");
  if (!(spec.tolerance > 1e-14 && spec.tolerance < 1e-2)) {
    throw DomainError("tolerance must lie in (1e-14, 1e-2)");
  }
  const auto& m = ctx.medium();
  const double k_split = ctx.k_split(spec);
  double hi = spec.lambda_max;
  if (hi <= 0.0) {
    for (const auto& g : reps) {
      hi = std::max(hi, lambda_max_estimate(m.k(id.t), m.k(id.s), g.ht, g.hs,
                                            max_abs_p(terms), max_abs_m(terms),
                                            spec.tolerance, k_split));
    }
  }
  if (!(hi > k_split)) throw DomainError("lambda_max must exceed k_split");
  const double piece = tail_piece(reps);

  SpectralRule rule;
  rule.lambda_max = hi;
  if (spec.pole_mode == PoleMode::corrected) {
    auto o = build_part(m, id, ctx.poles(), true, reps, terms, spec.half_line,
                        k_split, hi, piece, spec.tolerance, spec.max_panels, 1.0);
    rule.parts.push_back(std::move(o.part));
    rule.panels = o.panels;
    rule.evaluations = o.evals;
    return rule;
  }
  // Lossy media at eps, eps/10, eps/100 combined by two Richardson levels.
  const double eps[3] = {spec.perturbation, spec.perturbation / 10.0,
                         spec.perturbation / 100.0};
  const double coef[3] = {1.0 / 891.0, -110.0 / 891.0, 1000.0 / 891.0};
  for (int i = 0; i < 3; ++i) {
    const auto lossy = m.with_loss(eps[i]);
    auto o = build_part(lossy, id, ctx.poles(), false, reps, terms,
                        spec.half_line, k_split, hi, piece,
                        std::min(spec.tolerance, 1e-11), spec.max_panels, coef[i]);
    rule.parts.push_back(std::move(o.part));
    rule.panels += o.panels;
    rule.evaluations += o.evals;
  }
  return rule;
}

namespace {

// Integral over [0, k_split] only (folded), with pole subtraction.
cplx core_integral(const SpectralContext& ctx, const ReactionComponentId& id,
                   const Geometry& g, const QuadratureSpec& spec) {
  const double k_split = ctx.k_split(spec);
  const auto& m = ctx.medium();
  const auto plan_piece = tail_piece({g});
  // A vanishing tail of length zero is skipped by the engine.
  auto o = build_part(m, id, ctx.poles(), true, {g}, {OrderTerm{}}, true,
                      k_split, k_split, plan_piece, spec.tolerance,
                      spec.max_panels, 1.0);
  SpectralRule r;
  r.parts.push_back(std::move(o.part));
  return apply_rule(r, g);
}

}  // namespace

cplx evaluate_component(const SpectralContext& ctx, const ReactionComponentId& id,
                        Point x, Point xs, const QuadratureSpec& spec) {
  const auto g = component_geometry(ctx.medium(), id, x, xs);
  if (spec.use_cdh && spec.pole_mode == PoleMode::corrected) {
    return core_integral(ctx, id, g, spec) +
           tail_integral_cdh(ctx, id, x, xs, spec).value;
  }
  const auto rule = build_rule(ctx, id, {g}, {OrderTerm{}}, spec);
  return apply_rule(rule, g);
}

cplx reaction_field(const SpectralContext& ctx, Point x, Point xs,
                    const QuadratureSpec& spec) {
  const auto& m = ctx.medium();
  const int t = layer_of(m, x.y);
  const int s = layer_of(m, xs.y);
  cplx sum = 0.0;
  for (const auto& id : admissible_components(t, s, m.num_interfaces())) {
    sum += evaluate_component(ctx, id, x, xs, spec);
  }
  return sum;
}

cplx green(const SpectralContext& ctx, Point x, Point xs,
           const QuadratureSpec& spec) {
  if (x == xs) throw DomainError("Green's function undefined at coincident points");
  const auto& m = ctx.medium();
  const int t = layer_of(m, x.y);
  const int s = layer_of(m, xs.y);
  cplx g = reaction_field(ctx, x, xs, spec);
  if (t == s) {
    if (m.k(s).imag() != 0.0) {
      throw DomainError("free-space term needs a real wavenumber");
    }
    g += special::free_space_green(m.k_real(s), norm(x - xs));
  }
  return g;
}

SommerfeldCheck sommerfeld_identity_check(double k, Point x, Point xs, int p,
                                          double tol) {
  const double dy = x.y - xs.y;
  if (!(dy > 0.0)) throw DomainError("Sommerfeld check needs y > y'");
  const Geometry g{x.x - xs.x, dy, 0.0};
  const OrderTerm term{p, 0};
  const double k_split = 1.2 * k + 1.0;
  const double hi = lambda_max_estimate(k, k, dy, 0.0, std::abs(p), 0, tol, k_split);
  const double piece = tail_piece({g});
  std::vector<Interval> ivs{{0.0, k, EndSingularity::right},
                            {k, k_split, EndSingularity::left}};
  const int np = std::clamp(int(std::ceil((hi - k_split) / piece)), 1, 4000);
  for (int i = 0; i < np; ++i) {
    ivs.push_back({k_split + (hi - k_split) * i / np,
                   k_split + (hi - k_split) * (i + 1) / np, EndSingularity::none});
  }
  auto f = [&](double lam, cplx* out) {
    const cplx h = special::vertical_wavenumber(lam, k);
    out[0] = (plane_wave_term(lam, k, k, g, term) +
              plane_wave_term(-lam, k, k, g, term)) /
             (I * pi * h);
  };
  AdaptiveOptions opt;
  opt.rel_tol = tol;
  const auto r = integrate_adaptive(f, 1, ivs, opt);
  SommerfeldCheck c;
  const Point d = x - xs;
  c.quadrature = 0.25 * I * r.value[0];
  c.oracle = 0.25 * I * special::hankel1(p, k * norm(d)) *
             std::exp(I * double(p) * angle(d));
  c.abs_residual = std::abs(c.quadrature - c.oracle);
  c.rel_residual = c.abs_residual / std::abs(c.oracle);
  return c;
}

cplx integrate_with_pole(const std::function<cplx(double)>& h,
                         const std::function<cplx(double)>& sig,
                         const sigma::PoleInfo& pole, cplx residue, double a,
                         double b, const AdaptiveOptions& opt) {
  const double c = pole.location;
  if (residue == cplx{0.0}) {
    return integrate([&](double l) { return h(l) * sig(l); }, a, b, opt);
  }
  if (!(c > a && c < b)) {
    throw DomainError("pole must lie strictly inside the interval");
  }
  const cplx hc = h(c) * residue;
  auto f = [&](double l, cplx* out) { out[0] = h(l) * sig(l) - hc / (l - c); };
  AdaptiveOptions o = opt;
  o.abs_tol = std::max(o.abs_tol, 1e-300);
  const auto r = integrate_adaptive(
      f, 1, {Interval{a, c, EndSingularity::none}, Interval{c, b, EndSingularity::none}},
      o);
  const cplx pv = hc * std::log((b - c) / (c - a));
  return r.value[0] + pv + double(pole.side) * I * pi * hc;
}

// ---------------------------------------------------------------------------

cplx cdh_phi(const CdHMap& map, cplx z) {
  return z * std::cos(map.beta) +
         I * special::branch_sqrt(z * z - map.k * map.k) * std::sin(map.beta);
}

cplx cdh_phi_inv(const CdHMap& map, cplx w) {
  return w * std::cos(map.beta) -
         I * special::branch_sqrt(w * w - map.k * map.k) * std::sin(map.beta);
}

cplx cdh_phi_derivative(const CdHMap& map, cplx z) {
  const cplx h = special::branch_sqrt(z * z - map.k * map.k);
  return std::cos(map.beta) + I * std::sin(map.beta) * z / h;
}

namespace {

bool right_of_hyperbola(const CdHMap& map, cplx z) {
  const double c = std::cos(map.beta);
  const double s = std::sin(map.beta);
  if (!(c > 0.0) || !(s > 0.0)) return false;
  return z.real() / c > std::sqrt(z.imag() * z.imag() / (s * s) + map.k * map.k);
}

}  // namespace

bool in_d_plus(const CdHMap& map, cplx w) {
  return w.imag() > 0.0 && right_of_hyperbola(map, w);
}

bool in_d_minus(const CdHMap& map, cplx z) {
  return z.imag() < 0.0 && right_of_hyperbola(map, z);
}

TailResult tail_integral_real(const SpectralContext& ctx,
                              const ReactionComponentId& id, Point x, Point xs,
                              const QuadratureSpec& spec) {
  const auto& m = ctx.medium();
  const auto g = component_geometry(m, id, x, xs);
  const double k_split = ctx.k_split(spec);
  const cplx kt = m.k(id.t);
  const cplx ks = m.k(id.s);
  const double hi = spec.lambda_max > 0.0
                        ? spec.lambda_max
                        : lambda_max_estimate(kt, ks, g.ht, g.hs, 0, 0,
                                              spec.tolerance, k_split);
  const double piece = tail_piece({g});
  const int np = std::clamp(int(std::ceil((hi - k_split) / piece)), 1, 4000);
  std::vector<Interval> ivs;
  for (int i = 0; i < np; ++i) {
    ivs.push_back({k_split + (hi - k_split) * i / np,
                   k_split + (hi - k_split) * (i + 1) / np, EndSingularity::none});
  }
  auto f = [&](double lam, cplx* out) {
    out[0] = sigma::sigma_component(m, id, lam) *
             (plane_wave_term(lam, kt, ks, g, {}) + plane_wave_term(-lam, kt, ks, g, {}));
  };
  AdaptiveOptions opt;
  opt.rel_tol = spec.tolerance;
  opt.max_panels = spec.max_panels;
  const auto r = integrate_adaptive(f, 1, ivs, opt);
  return {r.value[0], r.panels, false};
}

TailResult tail_integral_cdh(const SpectralContext& ctx,
                             const ReactionComponentId& id, Point x, Point xs,
                             const QuadratureSpec& spec) {
  const auto& m = ctx.medium();
  const auto g = component_geometry(m, id, x, xs);
  const double H = g.ht + g.hs;
  if (!(std::abs(g.dx) < spec.cdh_aperture * H) ||
      m.k(id.t).imag() != 0.0 || m.k(id.s).imag() != 0.0) {
    return tail_integral_real(ctx, id, x, xs, spec);
  }
  const double k_split = ctx.k_split(spec);
  const cplx kt = m.k(id.t);
  const cplx ks = m.k(id.s);
  const double rho = std::hypot(g.dx, H);
  const double hi =
      lambda_max_estimate(ks, ks, 0.0, rho, 0, 0, spec.tolerance, k_split);

  TailResult out;
  out.used_cdh = true;
  AdaptiveOptions opt;
  opt.rel_tol = spec.tolerance;
  opt.max_panels = spec.max_panels;
  opt.abs_tol = 0.0;
  for (int sgn : {1, -1}) {
    const Geometry gs{sgn * g.dx, g.ht, g.hs};
    const CdHMap map{std::atan2(gs.dx, H), ks.real()};
    const cplx start = cdh_phi(map, k_split);
    const cplx chord = start - k_split;
    // Hyperbolic path lambda = phi(lambda'), lambda' in [k_split, hi], plus
    // the chord from k_split to phi(k_split). Two outputs keep each piece
    // under its own relative control.
    auto f = [&](double u, cplx* vals) {
      vals[0] = 0.0;
      vals[1] = 0.0;
      if (u <= 1.0) {
        const cplx lam = double(k_split) + u * chord;
        vals[1] = sigma::sigma_component(m, id, lam) *
                  plane_wave_term(lam, kt, ks, gs, {}) * chord;
      } else {
        const double lp = k_split + (u - 1.0);
        const cplx lam = cdh_phi(map, lp);
        vals[0] = sigma::sigma_component(m, id, lam) *
                  plane_wave_term(lam, kt, ks, gs, {}) * cdh_phi_derivative(map, lp);
      }
    };
    std::vector<Interval> ivs{{0.0, 1.0, EndSingularity::none}};
    const double len = hi - k_split;
    const int np = std::clamp(int(std::ceil(len * rho / 10.0)), 1, 400);
    for (int i = 0; i < np; ++i) {
      ivs.push_back({1.0 + len * i / np, 1.0 + len * (i + 1) / np,
                     EndSingularity::none});
    }
    const auto r = integrate_adaptive(f, 2, ivs, opt);
    out.value += r.value[0] + r.value[1];
    out.panels += r.panels;
  }
  return out;
}

}  // namespace layerfmm::quad
