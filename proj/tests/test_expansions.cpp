#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "layerfmm/expansions.hpp"
#include "layerfmm/experiments.hpp"
#include "layerfmm/special.hpp"

using namespace layerfmm;
using namespace layerfmm::expansions;

namespace {

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

constexpr ReactionComponentId kUU{0, 0, Dir::up, Dir::up};

std::vector<Source> cluster(Point c, double r, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Source> out;
  while (int(out.size()) < n) {
    const Point d{r * u(rng), r * u(rng)};
    if (norm(d) < r) out.push_back({c + d, cplx(u(rng), u(rng))});
  }
  return out;
}

cplx direct(const quad::SpectralContext& ctx, const ReactionComponentId& id, Point x,
            const std::vector<Source>& src, double tol = 1e-12) {
  cplx acc = 0.0;
  for (const auto& s : src) acc += s.q * quad::evaluate_component(ctx, id, x, s.x, {tol});
  return acc;
}

}  // namespace

TEST_CASE("free-space multipole expansion") {
  const std::vector<Source> unit{{{0.2, 0.3}, 1.0}};
  const auto me1 = fs_me(unit, {0.2, 0.3}, 1.0, 10);
  CHECK(me1.coeffs[order_index(0, 10)] == cplx(1.0));
  for (int p = 1; p < 10; ++p) CHECK(me1.coeffs[order_index(p, 10)] == cplx(0.0));
  CHECK(rel(fs_me_eval(me1, {2.0, 1.0}), special::free_space_green(1.0, norm(Point{1.8, 0.7}))) <
        1e-14);

  const auto src = cluster({0.0, 0.0}, 0.5, 10, 1);
  const auto me = fs_me(src, {0.0, 0.0}, 1.0, 25);
  const Point x{2.0 * std::cos(0.7), 2.0 * std::sin(0.7)};
  cplx ref = 0.0;
  for (const auto& s : src) ref += s.q * special::free_space_green(1.0, norm(x - s.x));
  CHECK(rel(fs_me_eval(me, x), ref) < 1e-10);
  CHECK_THROWS_AS(fs_me_eval(me, {0.6, 0.0}), FarFieldError);
}

TEST_CASE("free-space translations") {
  const auto src = cluster({0.1, -0.2}, 0.3, 8, 2);
  const auto me = fs_me(src, {0.1, -0.2}, 1.5, 30);
  const auto moved = fs_m2m(me, {0.2, -0.1});
  const Point xl{3.0, 1.0};
  const auto le = fs_m2l(moved, xl, 30);
  const auto le2 = fs_l2l(le, {3.1, 0.9});
  const Point x{3.15, 0.95};
  cplx ref = 0.0;
  for (const auto& s : src) ref += s.q * special::free_space_green(1.5, norm(x - s.x));
  CHECK(rel(fs_le_eval(le, x), ref) < 1e-10);
  CHECK(rel(fs_le_eval(le2, x), ref) < 1e-10);
}

TEST_CASE("layered multipole coefficients") {
  const auto m = LayeredMedium::acoustic({0.0}, {1.0, 1.5}, {1.0, 2.0});
  const Point c{0.0, 1.0};
  const std::vector<Source> at_center{{c, cplx(0.5, 2.0)}};
  const auto m0 = me_coeffs(m, kUU, at_center, c, 6);
  CHECK(m0.coeff(0) == cplx(0.5, 2.0));
  for (int p = 1; p < 6; ++p) {
    CHECK(m0.coeff(p) == cplx(0.0));
    CHECK(m0.coeff(-p) == cplx(0.0));
  }
  const std::vector<Source> one{{{0.3, 1.2}, 1.0}};
  const auto me = me_coeffs(m, kUU, one, c, 8);
  for (int p = 1; p < 8; ++p) {
    CHECK(rel(me.coeff(-p), (p % 2 ? -1.0 : 1.0) * std::conj(me.coeff(p))) < 1e-14);
  }
  // Interior layer: the same source admits both directions; flipping it
  // conjugates the phase of a real-strength source.
  const auto m3 = LayeredMedium::acoustic({1.0, -2.0}, {1.0, 1.2, 1.5});
  const std::vector<Source> mid{{{0.3, -0.8}, 1.0}};
  const auto up = me_coeffs(m3, {1, 1, Dir::up, Dir::up}, mid, {0.0, -1.0}, 8);
  const auto down = me_coeffs(m3, {1, 1, Dir::up, Dir::down}, mid, {0.0, -1.0}, 8);
  for (int p = -7; p < 8; ++p) CHECK(rel(down.coeff(p), std::conj(up.coeff(p))) < 1e-14);
  const std::vector<Source> below{{{0.0, -0.5}, 1.0}};
  CHECK_THROWS_AS(me_coeffs(m, kUU, below, c, 4), DomainError);
}

TEST_CASE("multipole expansion matches direct Sommerfeld sums") {
  const quad::SpectralContext ss(LayeredMedium::sound_soft(0.0, 1.0, 1.0));
  const Point c{0.0, 1.0};
  const auto src = cluster(c, 0.4, 5, 3);
  const auto me = me_coeffs(ss.medium(), kUU, src, c, 20);
  const Point x{1.5, 1.2};
  ExpansionOptions opt;
  opt.quad.tolerance = 1e-12;
  CHECK(rel(me_eval(ss, kUU, me, x, opt), direct(ss, kUU, x, src)) < 1e-8);
  // Near the wall the image of the cluster is close to the target.
  const std::vector<Source> low{{{0.24, 0.3}, 1.0}};
  const auto near_wall = me_coeffs(ss.medium(), kUU, low, {0.0, 0.3}, 20);
  CHECK_THROWS_AS(me_eval(ss, kUU, near_wall, {0.1, 0.1}, opt), FarFieldError);
}

TEST_CASE("local expansion matches direct evaluation") {
  const quad::SpectralContext ctx(LayeredMedium::acoustic({0.0}, {1.0, 1.5}, {1.0, 2.0}));
  const Point xl{1.5, 1.5};
  const auto src = cluster({0.0, 0.5}, 0.2, 3, 4);
  ExpansionOptions opt;
  opt.quad.tolerance = 1e-12;
  const auto le = le_coeffs_direct(ctx, kUU, xl, src, 20, opt);
  CHECK(le_eval(le, xl) == le.coeff(0));
  const Point x{1.7, 1.4};
  CHECK(rel(le_eval(le, x), direct(ctx, kUU, x, src)) < 1e-8);
}

TEST_CASE("translations compose to the direct field") {
  const quad::SpectralContext ctx(LayeredMedium::acoustic({0.0}, {1.0, 1.5}, {1.0, 2.0}));
  const Point xc{0.0, 1.0}, xl{1.2, 0.6};
  const auto src = cluster(xc, 0.25, 4, 5);
  ExpansionOptions opt;
  opt.quad.tolerance = 1e-12;
  const int P = 24;
  const auto me = me_coeffs(ctx.medium(), kUU, src, xc, P);
  const auto A = m2l(ctx, kUU, xl, xc, P, P, opt, 0.25);
  const auto le = apply_m2l(A, me);
  const Point x{1.3, 0.55};
  const cplx ref = direct(ctx, kUU, x, src);
  CHECK(rel(le_eval(le, x), ref) < 1e-8);
  CHECK(rel(le_eval(le, x), me_eval(ctx, kUU, me, x, opt)) < 1e-8);

  const auto zero = l2l(le, xl);
  for (int m = -(P - 1); m < P; ++m) CHECK(zero.coeff(m) == le.coeff(m));
  const auto shifted = l2l(le, {1.25, 0.58});
  CHECK(rel(le_eval(shifted, x), le_eval(le, x)) < 1e-8);

  const auto moved = m2m(me, {0.05, 1.05});
  std::vector<Source> one{src[0]};
  const auto single = m2m(me_coeffs(ctx.medium(), kUU, one, xc, 40), {0.05, 1.05});
  const auto fresh = me_coeffs(ctx.medium(), kUU, one, {0.05, 1.05}, 40);
  for (int p = -10; p <= 10; ++p) CHECK(std::abs(single.coeff(p) - fresh.coeff(p)) < 1e-10);
  CHECK(rel(me_eval(ctx, kUU, moved, {2.0, 1.5}, opt), me_eval(ctx, kUU, me, {2.0, 1.5}, opt)) <
        1e-9);
  const auto same = m2m(me, xc);
  for (int p = -(P - 1); p < P; ++p) CHECK(same.coeff(p) == me.coeff(p));
}

TEST_CASE("translation matrix is stable under a longer spectral range") {
  const quad::SpectralContext ctx(LayeredMedium::acoustic({0.0}, {1.0, 1.5}, {1.0, 2.0}));
  ExpansionOptions a, b;
  a.quad.tolerance = b.quad.tolerance = 1e-10;
  a.quad.lambda_max = 60.0;
  b.quad.lambda_max = 120.0;
  const auto A = m2l(ctx, kUU, {1.2, 0.6}, {0.0, 1.0}, 8, 8, a);
  const auto B = m2l(ctx, kUU, {1.2, 0.6}, {0.0, 1.0}, 8, 8, b);
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < A.entries.size(); ++i) {
    scale = std::max(scale, std::abs(A.entries[i]));
    diff = std::max(diff, std::abs(A.entries[i] - B.entries[i]));
  }
  CHECK(diff < 10.0 * 1e-10 * scale);
}

TEST_CASE("errors are invariant under horizontal translation") {
  const quad::SpectralContext ctx(LayeredMedium::acoustic({0.0}, {1.0, 1.5}, {1.0, 2.0}));
  const Point xc{0.0, 1.0}, x{1.2, 0.6};
  const auto src = cluster(xc, 0.3, 3, 6);
  auto error = [&](double shift) {
    std::vector<Source> s = src;
    for (auto& v : s) v.x.x += shift;
    const auto me = me_coeffs(ctx.medium(), kUU, s, {xc.x + shift, xc.y}, 10);
    const Point t{x.x + shift, x.y};
    return std::abs(me_eval(ctx, kUU, me, t) - direct(ctx, kUU, t, s));
  };
  const double e0 = error(0.0);
  CHECK(error(3.7) == doctest::Approx(e0).epsilon(1e-4));
}

TEST_CASE("choose_truncation") {
  CHECK(choose_truncation(0.5, 1e-8, 1.0, 0.1) == 37);
  CHECK(choose_truncation(1e-300, 1e-8, 1.0, 5.0) == int(std::ceil(std::exp(1.0) * 5.0)));
  CHECK(choose_truncation(1e-300, 1e-8, 1.0, 0.1) == 8);
  CHECK_THROWS_AS(choose_truncation(0.6, 1e-8, 1.0, 0.1), FarFieldError);
  for (double r : {0.1, 0.3, 0.45}) {
    const int P = choose_truncation(r, 1e-6, 2.0, 1.0);
    CHECK(P >= int(std::ceil(std::exp(1.0) * 2.0)));
    CHECK(P >= int(std::ceil((std::log(1e-6) - std::log(1e3)) / std::log(r))));
  }
}

TEST_CASE("measured rates follow the polarized-distance ratio") {
  const quad::SpectralContext ctx(LayeredMedium::acoustic({0.0}, {1.0, 1.5}, {1.0, 2.0}));
  experiments::ConvergenceConfig cfg;
  cfg.ratios = {0.4};
  for (const auto& s : experiments::run_convergence(ctx, cfg)) {
    CAPTURE(s.op);
    CHECK(std::abs(s.measured_slope / s.predicted_slope - 1.0) < 0.15);
    CHECK(s.min_error < 1e-10);
  }
  const auto g = experiments::polarized_governance(ctx, 1.5, cfg);
  CHECK(g.polarized_far == doctest::Approx(1.5 * g.polarized_near));
  CHECK(g.ordered);
}
