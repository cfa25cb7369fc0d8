// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "layerfmm/experiments.hpp"
#include "layerfmm/fmm.hpp"
#include "layerfmm/quadrature.hpp"
#include "layerfmm/special.hpp"

using namespace layerfmm;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

constexpr ReactionComponentId kUU{0, 0, Dir::up, Dir::up};

Outcome sommerfeld_identity() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> udy(0.2, 5.0), udx(-5.0, 5.0);
  const double ks[3] = {0.5, 1.0, 2.0};
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double k = ks[i % 3];
    const Point xs{0.0, 0.0};
    const Point x{udx(rng), udy(rng)};
    worst = std::max(worst, quad::sommerfeld_identity_check(k, x, xs).rel_residual);
  }
  return {worst < 1e-8, fmt("50 geometries, max rel error %.2e (< 1e-8)", worst)};
}

Outcome image_oracle() {
  const double k = 1.3;
  const quad::SpectralContext ss(LayeredMedium::sound_soft(0.0, k, 1.0));
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> ux(-3.0, 3.0), uy(0.1, 3.0);
  quad::QuadratureSpec spec;
  spec.tolerance = 1e-12;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Point x{ux(rng), uy(rng)}, xs{ux(rng), uy(rng)};
    const cplx u = quad::reaction_field(ss, x, xs, spec);
    const cplx o = -special::free_space_green(k, std::hypot(x.x - xs.x, x.y + xs.y));
    worst = std::max(worst, rel(u, o));
  }
  return {worst < 1e-8, fmt("20 pairs, max rel error %.2e (< 1e-8)", worst)};
}

Outcome interface_residuals() {
  const quad::SpectralContext ctx(LayeredMedium::acoustic({0.0}, {1.0, 1.5}));
  quad::QuadratureSpec spec;
  spec.tolerance = 1e-12;
  const Point xs{0.1, 0.7};
  const double h = 1e-3;
  // One-sided cubic extrapolation from y = +-h, +-2h, +-3h, +-4h.
  const double wv[4] = {4.0, -6.0, 4.0, -1.0};
  const double wd[4] = {-13.0 / 3.0, 9.5, -7.0, 11.0 / 6.0};
  double jump_g = 0.0, jump_flux = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double x = -2.0 + 4.0 * i / 9.0;
    cplx g[2] = {0.0, 0.0}, dg[2] = {0.0, 0.0};
    for (int side = 0; side < 2; ++side) {
      const double dir = side == 0 ? 1.0 : -1.0;
      for (int j = 0; j < 4; ++j) {
        const cplx v = quad::green(ctx, {x, dir * (j + 1) * h}, xs, spec);
        g[side] += wv[j] * v;
        dg[side] += dir * wd[j] * v / h;
      }
    }
    jump_g = std::max(jump_g, std::abs(g[0] - g[1]) / std::abs(g[0]));
    jump_flux = std::max(jump_flux, std::abs(dg[0] - dg[1]) / std::abs(dg[0]));
  }
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> ux(-2.0, 2.0), uy(-2.0, 2.0);
  double recip = 0.0;
  for (int i = 0; i < 10; ++i) {
    Point a{ux(rng), uy(rng)}, b{ux(rng), uy(rng)};
    const cplx gab = quad::green(ctx, a, b, spec);
    const cplx gba = quad::green(ctx, b, a, spec);
    recip = std::max(recip, rel(gba, gab));
  }
  const bool ok = jump_g < 1e-6 && jump_flux < 1e-6 && recip < 1e-7;
  return {ok, fmt("jump G %.2e, jump flux %.2e (< 1e-6); reciprocity %.2e (< 1e-7)", jump_g,
                  jump_flux, recip)};
}

const quad::SpectralContext& rate_medium() {
  static const quad::SpectralContext ctx(LayeredMedium::acoustic({0.0}, {1.0, 1.5}, {1.0, 2.0}));
  return ctx;
}

Outcome operator_rates() {
  const auto series = experiments::run_convergence(rate_medium());
  double worst = 0.0, worst_min = 0.0;
  std::string where;
  for (const auto& s : series) {
    const double dev = std::abs(s.measured_slope / s.predicted_slope - 1.0);
    if (dev > worst) {
      worst = dev;
      where = s.op + fmt(" at ratio %.2f", s.ratio);
    }
    worst_min = std::max(worst_min, s.min_error);
  }
  const bool ok = worst < 0.15 && worst_min < 1e-10;
  return {ok, fmt("%.0f series, max slope deviation %.1f%% (< 15%%), ", double(series.size()),
                  100.0 * worst) +
                  "worst " + where + fmt(", max plateau error %.2e (< 1e-10)", worst_min)};
}

Outcome governance() {
  const auto g = experiments::polarized_governance(rate_medium(), 1.5);
  return {g.ordered, fmt("polarized distance %.3f vs %.3f, ", g.polarized_near,
                         g.polarized_far) +
                         fmt("slopes %.3f vs %.3f (steeper for the larger distance)",
                             g.near.measured_slope, g.far.measured_slope)};
}

Outcome pole_formula() {
  const quad::SpectralContext gm(LayeredMedium::acoustic({0.0, -1.5}, {1.0, 2.0, 1.0}));
  if (gm.poles().empty()) return {false, "guided medium has no real pole"};
  const std::vector<std::pair<ReactionComponentId, std::pair<Point, Point>>> cases{
      {{0, 0, Dir::up, Dir::up}, {{0.7, 0.4}, {0.0, 0.3}}},
      {{1, 0, Dir::down, Dir::up}, {{0.7, -0.5}, {0.0, 0.3}}},
      {{1, 1, Dir::up, Dir::down}, {{0.7, -0.5}, {0.0, -1.0}}},
      {{2, 2, Dir::down, Dir::down}, {{-0.4, -2.0}, {0.5, -1.8}}}};
  double worst = 0.0;
  for (const auto& [id, pts] : cases) {
    quad::QuadratureSpec c, p;
    p.pole_mode = quad::PoleMode::perturbed;
    const cplx a = quad::evaluate_component(gm, id, pts.first, pts.second, c);
    const cplx b = quad::evaluate_component(gm, id, pts.first, pts.second, p);
    worst = std::max(worst, rel(b, a));
  }
  sigma::PoleInfo pole;
  pole.location = 1.5;
  auto one = [](double) { return cplx(1.0); };
  auto sig = [](double l) { return cplx(1.0 / (l - 1.5)); };
  double analytic = 0.0;
  for (int side : {1, -1}) {
    pole.side = side;
    const cplx v = quad::integrate_with_pole(one, sig, pole, 1.0, 0.5, 2.5);
    analytic = std::max(analytic, std::abs(v - double(side) * I * pi));
  }
  const bool ok = worst < 1e-4 && analytic < 1e-10;
  return {ok, fmt("pole %.6f, corrected vs perturbed %.2e (< 1e-4); analytic +-i pi error %.2e "
                  "(< 1e-10)",
                  gm.poles()[0].location, worst, analytic)};
}

Outcome cagniard_de_hoop() {
  const quad::CdHMap map{0.6, 1.0};
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> ure(0.0, 6.0), uim(0.0, 4.0);
  int plus = 0, minus = 0, violations = 0;
  double round_trip = 0.0;
  while (plus < 1000 || minus < 1000) {
    const cplx w(ure(rng), uim(rng));
    if (plus < 1000 && quad::in_d_plus(map, w)) {
      round_trip = std::max(round_trip, std::abs(quad::cdh_phi(map, quad::cdh_phi_inv(map, w)) - w));
      ++plus;
    }
    const cplx z(ure(rng), -uim(rng));
    if (minus < 1000 && quad::in_d_minus(map, z)) {
      const cplx p = quad::cdh_phi(map, z);
      if (!(p.real() > 0.0 && p.imag() > 0.0)) ++violations;
      ++minus;
    }
  }
  double tail = 0.0;
  quad::QuadratureSpec spec;
  spec.tolerance = 1e-11;
  const Point x{0.3, 0.5}, xs{0.0, 1.0};
  for (const auto& m : {LayeredMedium::sound_soft(0.0, 1.3, 1.0),
                        LayeredMedium::acoustic({0.0}, {1.0, 1.5}, {1.0, 2.0})}) {
    const quad::SpectralContext ctx(m);
    const auto a = quad::tail_integral_cdh(ctx, kUU, x, xs, spec);
    const auto b = quad::tail_integral_real(ctx, kUU, x, xs, spec);
    const double scale =
        std::max(std::abs(quad::evaluate_component(ctx, kUU, x, xs, spec)), std::abs(b.value));
    if (!a.used_cdh) return {false, "aperture condition rejected the half-space geometry"};
    tail = std::max(tail, std::abs(a.value - b.value) / scale);
  }
  const bool ok = round_trip < 1e-12 && violations == 0 && tail < 1e-9;
  return {ok, fmt("round trip %.2e (< 1e-12), D- sign violations %.0f, tail difference %.2e "
                  "(< 1e-9)",
                  round_trip, double(violations), tail)};
}

Outcome fmm_scaling() {
  const quad::SpectralContext ctx(LayeredMedium::acoustic({0.0}, {1.0, 1.5}));
  auto scene = [](int n) {
    std::mt19937_64 rng(7 + n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::pair<std::vector<expansions::Source>, std::vector<Point>> s;
    for (int i = 0; i < n; ++i) s.first.push_back({{u(rng), u(rng)}, cplx(u(rng), u(rng))});
    for (int i = 0; i < n; ++i) s.second.push_back({u(rng), u(rng)});
    return s;
  };
  fmm::FmmConfig cfg;
  cfg.tolerance = 1e-6;
  double err = 0.0;
  std::vector<double> lx, ly;
  for (int n : {500, 1000, 2000, 4000}) {
    const auto [src, tg] = scene(n);
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = fmm::evaluate_all(ctx, src, tg, cfg);
    const double sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    lx.push_back(std::log(double(n)));
    ly.push_back(std::log(sec));
    std::printf("  fmm N=%d order %d time %.2f s\n", n, r.stats.order, sec);
    if (n == 2000) {
      const auto d = fmm::direct_sum(ctx, src, tg);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        num += std::norm(r.values[i] - d[i]);
        den += std::norm(d[i]);
      }
      err = std::sqrt(num / den);
    }
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / lx.size();
    my += ly[i] / ly.size();
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  const double exponent = sxy / sxx;
  const bool ok = err < 1e-6 && exponent < 1.3;
  return {ok, fmt("N=2000 rel L2 error %.2e (< 1e-6), runtime exponent %.3f (< 1.3)", err,
                  exponent)};
}

Outcome special_functions() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> uz(-50.0, 50.0);
  std::uniform_int_distribution<int> up(-60, 60);
  int violations = 0, checked = 0;
  while (checked < 10000) {
    const cplx z(uz(rng), uz(rng));
    const int p = up(rng);
    if (std::abs(z) > 50.0 || z == 0.0) continue;
    if (std::abs(special::bessel_j(p, z)) > special::bessel_j_bound(p, z) * (1.0 + 1e-12)) {
      ++violations;
    }
    ++checked;
  }
  std::uniform_real_distribution<double> ur(0.0, 2.0), ua(-pi, pi);
  double gen = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const cplx z = std::polar(ur(rng), ua(rng));
    const cplx om = std::polar(1.0, ua(rng));
    const cplx exact = std::exp(0.5 * z * (om - 1.0 / om));
    gen = std::max(gen, std::abs(special::generating_partial_sum(z, om, 60) - exact) /
                            std::max(1.0, std::abs(exact)));
  }
  const bool ok = violations == 0 && gen < 1e-12;
  return {ok, fmt("bound violations %.0f of 10000, generating sum error %.2e (< 1e-12)",
                  double(violations), gen)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"sommerfeld-identity", sommerfeld_identity},
      {"image-oracle", image_oracle},
      {"interface-residuals", interface_residuals},
      {"operator-rates", operator_rates},
      {"polarized-governance", governance},
      {"pole-formula", pole_formula},
      {"cagniard-de-hoop", cagniard_de_hoop},
      {"fmm-equivalence-scaling", fmm_scaling},
      {"special-functions", special_functions},
  };
  int failed = 0;
  int index = 1;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %d %s: %s\n", o.passed ? "PASS" : "FAIL", index++, name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.passed) ++failed;
  }
  std::printf("%d of %d criteria passed\n", index - 1 - failed, index - 1);
  return failed == 0 ? 0 : 1;
}
