#include "layerfmm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace layerfmm::experiments {

namespace {

using expansions::Source;
using expansions::order_index;

constexpr ReactionComponentId kComponent{0, 0, Dir::up, Dir::up};

std::vector<Point> circle(Point c, double r, int n) {
  std::vector<Point> pts;
  for (int j = 0; j < n; ++j) {
    const double a = 2.0 * pi * j / n + 0.3;
    pts.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  return pts;
}

ConvergenceSeries make_series(const std::string& op, double ratio) {
  ConvergenceSeries s;
  s.op = op;
  s.ratio = ratio;
  s.predicted_slope = std::log10(ratio);
  return s;
}

double max_abs(const std::vector<cplx>& v) {
  double m = 0.0;
  for (cplx z : v) m = std::max(m, std::abs(z));
  return m;
}

ConvergenceSeries le_series(const quad::SpectralContext& ctx, double d0,
                            double ratio, const ConvergenceConfig& cfg) {
  const Point xl{1.5, d0 + 1.5};
  const Point xs{0.0, d0 + 0.5};
  const double D = expansions::polarized_offset_distance(ctx.medium(), kComponent, xl, xs);
  const auto targets = circle(xl, ratio * D, cfg.directions);
  std::vector<cplx> ref;
  for (Point x : targets) {
    ref.push_back(quad::evaluate_component(ctx, kComponent, x, xs, {cfg.tolerance}));
  }
  const double scale = max_abs(ref);
  expansions::ExpansionOptions opt;
  opt.quad.tolerance = cfg.tolerance;
  const std::vector<Source> src{{xs, 1.0}};
  const auto full = expansions::le_coeffs_direct(ctx, kComponent, xl, src,
                                                 cfg.max_order, opt);
  auto s = make_series("LE", ratio);
  for (int M = 1; M <= cfg.max_order; ++M) {
    expansions::LocalExpansion le = full;
    le.M = M;
    le.coeffs.assign(full.coeffs.begin() + (cfg.max_order - M),
                     full.coeffs.begin() + (cfg.max_order + M - 1));
    double err = 0.0;
    for (std::size_t j = 0; j < targets.size(); ++j) {
      err = std::max(err, std::abs(expansions::le_eval(le, targets[j], 1.0) - ref[j]));
    }
    s.orders.push_back(M);
    s.errors.push_back(err / scale);
  }
  return s;
}

ConvergenceSeries m2l_series(const quad::SpectralContext& ctx, double d0,
                             double ratio, const ConvergenceConfig& cfg) {
  constexpr int M0 = 4;
  const auto& m = ctx.medium();
  const Point xl{1.2, d0 + 0.6};
  const Point xc{0.0, d0 + 1.0};
  const double D = expansions::polarized_offset_distance(m, kComponent, xl, xc);
  const auto sources = circle(xc, ratio * D, cfg.directions);
  expansions::ExpansionOptions opt;
  opt.quad.tolerance = cfg.tolerance;
  opt.c0 = 1.0;
  const auto A = expansions::m2l(ctx, kComponent, xl, xc, M0, cfg.max_order, opt);
  auto s = make_series("M2L", ratio);
  std::vector<std::vector<cplx>> ref;
  std::vector<expansions::MultipoleExpansion> mes;
  double scale = 0.0;
  for (Point x : sources) {
    const std::vector<Source> one{{x, 1.0}};
    ref.push_back(expansions::le_coeffs_direct(ctx, kComponent, xl, one, M0, opt).coeffs);
    scale = std::max(scale, max_abs(ref.back()));
    mes.push_back(expansions::me_coeffs(m, kComponent, one, xc, cfg.max_order));
  }
  for (int P = 1; P <= cfg.max_order; ++P) {
    double err = 0.0;
    for (std::size_t j = 0; j < sources.size(); ++j) {
      for (int mm = -(M0 - 1); mm < M0; ++mm) {
        cplx acc = 0.0;
        for (int p = -(P - 1); p < P; ++p) acc += A.at(mm, p) * mes[j].coeff(p);
        err = std::max(err, std::abs(acc - ref[j][order_index(mm, M0)]));
      }
    }
    s.orders.push_back(P);
    s.errors.push_back(err / scale);
  }
  return s;
}

ConvergenceSeries l2l_series(const quad::SpectralContext& ctx, double d0,
                             double ratio, const ConvergenceConfig& cfg) {
  constexpr int M0 = 4;
  const Point xl{1.5, d0 + 1.5};
  const Point xs{0.0, d0 + 0.5};
  const double D = expansions::polarized_offset_distance(ctx.medium(), kComponent, xl, xs);
  const auto centers = circle(xl, ratio * D, cfg.directions);
  expansions::ExpansionOptions opt;
  opt.quad.tolerance = cfg.tolerance;
  const std::vector<Source> src{{xs, 1.0}};
  const auto full = expansions::le_coeffs_direct(ctx, kComponent, xl, src,
                                                 cfg.max_order, opt);
  std::vector<std::vector<cplx>> ref;
  double scale = 0.0;
  for (Point c : centers) {
    ref.push_back(expansions::le_coeffs_direct(ctx, kComponent, c, src, M0, opt).coeffs);
    scale = std::max(scale, max_abs(ref.back()));
  }
  auto s = make_series("L2L", ratio);
  for (int P = 1; P <= cfg.max_order; ++P) {
    expansions::LocalExpansion le = full;
    le.M = P;
    le.coeffs.assign(full.coeffs.begin() + (cfg.max_order - P),
                     full.coeffs.begin() + (cfg.max_order + P - 1));
    double err = 0.0;
    for (std::size_t j = 0; j < centers.size(); ++j) {
      const auto shifted = expansions::l2l(le, centers[j], 1.0);
      for (int mm = -(M0 - 1); mm < M0; ++mm) {
        if (std::abs(mm) >= P) continue;
        err = std::max(err, std::abs(shifted.coeff(mm) - ref[j][order_index(mm, M0)]));
      }
    }
    s.orders.push_back(P);
    s.errors.push_back(err / scale);
  }
  return s;
}

}  // namespace

void fit_slope(ConvergenceSeries& s, const ConvergenceConfig& cfg) {
  s.min_error = std::numeric_limits<double>::infinity();
  for (double e : s.errors) s.min_error = std::min(s.min_error, e);
  const double floor = std::max(s.min_error, 1e-300) * cfg.plateau_factor;
  int last = -1;
  for (std::size_t i = 0; i < s.errors.size(); ++i) {
    if (s.orders[i] >= cfg.fit_min_order && s.errors[i] > floor) last = int(i);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  s.fit_first = 0;
  s.fit_last = 0;
  for (int i = 0; i <= last; ++i) {
    if (s.orders[i] < cfg.fit_min_order) continue;
    if (n == 0) s.fit_first = s.orders[i];
    s.fit_last = s.orders[i];
    const double x = s.orders[i];
    const double y = std::log10(s.errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 3) {
    s.measured_slope = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  s.measured_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ConvergenceSeries me_series(const quad::SpectralContext& ctx,
                            const ReactionComponentId& id, Point center,
                            double rho, Point target, const ConvergenceConfig& cfg) {
  const auto& m = ctx.medium();
  const double D = expansions::polarized_offset_distance(m, id, target, center);
  const auto sources = circle(center, rho, cfg.directions);
  quad::QuadratureSpec spec;
  spec.tolerance = cfg.tolerance;
  std::vector<cplx> ref;
  for (Point x : sources) ref.push_back(quad::evaluate_component(ctx, id, target, x, spec));
  const double scale = max_abs(ref);
  const auto Ip = expansions::expansion_functions(ctx, id, target, center,
                                                  cfg.max_order, spec);
  std::vector<expansions::MultipoleExpansion> mes;
  for (Point x : sources) {
    const std::vector<Source> one{{x, 1.0}};
    mes.push_back(expansions::me_coeffs(m, id, one, center, cfg.max_order));
  }
  auto s = make_series("ME", rho / D);
  for (int P = 1; P <= cfg.max_order; ++P) {
    double err = 0.0;
    for (std::size_t j = 0; j < sources.size(); ++j) {
      cplx acc = 0.0;
      for (int p = -(P - 1); p < P; ++p) {
        acc += Ip[order_index(p, cfg.max_order)] * mes[j].coeff(p);
      }
      err = std::max(err, std::abs(acc - ref[j]));
    }
    s.orders.push_back(P);
    s.errors.push_back(err / scale);
  }
  fit_slope(s, cfg);
  return s;
}

std::vector<ConvergenceSeries> run_convergence(const quad::SpectralContext& ctx,
                                               const ConvergenceConfig& cfg) {
  const double d0 = ctx.medium().depth(0);
  std::vector<ConvergenceSeries> out;
  for (const auto& op : cfg.operators) {
    for (double ratio : cfg.ratios) {
      ConvergenceSeries s;
      if (op == "ME") {
        const Point xc{0.0, d0 + 1.0};
        const Point x{1.2, d0 + 0.6};
        const double D = expansions::polarized_offset_distance(ctx.medium(), kComponent, x, xc);
        s = me_series(ctx, kComponent, xc, ratio * D, x, cfg);
      } else if (op == "LE") {
        s = le_series(ctx, d0, ratio, cfg);
      } else if (op == "M2L") {
        s = m2l_series(ctx, d0, ratio, cfg);
      } else if (op == "L2L") {
        s = l2l_series(ctx, d0, ratio, cfg);
      } else {
        throw DomainError("unknown operator " + op);
      }
      fit_slope(s, cfg);
      out.push_back(std::move(s));
    }
  }
  return out;
}

GovernanceResult polarized_governance(const quad::SpectralContext& ctx,
                                      double factor, const ConvergenceConfig& cfg) {
  if (!(factor > 1.0)) throw DomainError("factor must exceed 1");
  const double d0 = ctx.medium().depth(0);
  const Point xc{0.0, d0 + 1.0};
  const double R = 2.0;
  const double rho = 0.5;
  auto target = [&](double phi) {
    return Point{xc.x + R * std::cos(phi), xc.y + R * std::sin(phi)};
  };
  auto dist = [&](double phi) {
    return expansions::polarized_offset_distance(ctx.medium(), kComponent,
                                                 target(phi), xc);
  };
  const double phi_near = -20.0 * pi / 180.0;
  const double want = factor * dist(phi_near);
  if (!(want < dist(pi / 2))) throw DomainError("factor not reachable at this radius");
  double lo = phi_near;
  double hi = pi / 2;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (dist(mid) < want ? lo : hi) = mid;
  }
  const double phi_far = 0.5 * (lo + hi);

  GovernanceResult r;
  r.euclidean_distance = R;
  r.polarized_near = dist(phi_near);
  r.polarized_far = dist(phi_far);
  r.near = me_series(ctx, kComponent, xc, rho, target(phi_near), cfg);
  r.far = me_series(ctx, kComponent, xc, rho, target(phi_far), cfg);
  r.ordered = r.far.measured_slope < r.near.measured_slope;
  return r;
}

}  // namespace layerfmm::experiments
