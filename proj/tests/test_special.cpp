#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "layerfmm/special.hpp"
#include "oracle_values.hpp"

using namespace layerfmm;
using namespace layerfmm::special;

namespace {

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("branch_sqrt follows the fixed cut") {
  CHECK(branch_sqrt(4.0) == cplx(2.0, 0.0));
  CHECK(std::abs(branch_sqrt(-4.0) - cplx(0.0, -2.0)) < 1e-15);
  CHECK(std::abs(branch_sqrt(cplx(-4.0, -0.0)) - cplx(0.0, -2.0)) < 1e-15);
  const cplx h = vertical_wavenumber(0.5, 1.0);
  CHECK(std::abs(h - cplx(0.0, -0.86602540378443864676)) < 1e-15);
  for (double lam = -0.95; lam < 1.0; lam += 0.1) {
    const cplx v = vertical_wavenumber(lam, 1.0);
    CHECK(v.real() == 0.0);
    CHECK(v.imag() == doctest::Approx(-std::sqrt(1.0 - lam * lam)).epsilon(1e-15));
  }
  for (double lam : {1.01, 2.0, 50.0}) {
    const cplx v = vertical_wavenumber(lam, 1.0);
    CHECK(v.imag() == 0.0);
    CHECK(v.real() > 0.0);
  }
}

TEST_CASE("bessel_j matches high-precision values") {
  CHECK(bessel_j(0, 0.0) == cplx(1.0, 0.0));
  CHECK(bessel_j(4, 0.0) == cplx(0.0, 0.0));
  for (const auto& c : oracle::kBesselJ) {
    CAPTURE(c.p);
    CAPTURE(c.z);
    CHECK(rel(bessel_j(c.p, c.z), c.value) < 1e-12);
  }
}

TEST_CASE("bessel_j_array agrees with single evaluations") {
  for (cplx z : {cplx(0.7, 0.0), cplx(8.0, -3.0), cplx(40.0, 2.0)}) {
    const auto all = bessel_j_array(30, z);
    for (int p = 0; p <= 30; ++p) CHECK(rel(all[p], bessel_j(p, z)) < 1e-12);
  }
}

TEST_CASE("bessel_j parity for negative orders") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-35.0, 35.0);
  for (int i = 0; i < 200; ++i) {
    const cplx z(u(rng), u(rng));
    if (std::abs(z) > 50.0) continue;
    const int p = 1 + i % 30;
    const cplx a = bessel_j(-p, z);
    const cplx b = (p % 2 ? -1.0 : 1.0) * bessel_j(p, z);
    CHECK(rel(a, b) < 1e-13);
  }
}

TEST_CASE("bessel_j signals overflow beyond the validity radius") {
  CHECK_THROWS_AS(bessel_j(0, cplx(800.0, 0.0)), OverflowError);
  BesselConfig cfg;
  CHECK_THROWS_AS(bessel_j(cfg.max_order + 1, 1.0), DomainError);
}

TEST_CASE("bessel_j respects the factorial bound") {
  CHECK(std::abs(bessel_j(3, cplx(2.0, 1.0))) <= bessel_j_bound(3, cplx(2.0, 1.0)));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-40.0, 40.0);
  std::uniform_int_distribution<int> up(-40, 40);
  int checked = 0;
  while (checked < 2000) {
    const cplx z(u(rng), u(rng));
    const int p = up(rng);
    if (std::abs(z) > 40.0 || (p == 0 && z == 0.0)) continue;
    CHECK(std::abs(bessel_j(p, z)) <= bessel_j_bound(p, z) * (1.0 + 1e-12));
    ++checked;
  }
}

TEST_CASE("bessel_y and hankel1 match high-precision values") {
  for (const auto& c : oracle::kBesselY) {
    CAPTURE(c.p);
    CAPTURE(c.x);
    CHECK(std::abs(bessel_y(c.p, c.x) - c.value) <= 1e-12 * std::abs(c.value));
  }
  const cplx h0 = hankel1(0, 1.0);
  CHECK(h0.real() == doctest::Approx(0.76519768655796655).epsilon(1e-14));
  CHECK(h0.imag() == doctest::Approx(0.08825696421567696).epsilon(1e-13));
  CHECK(rel(hankel1(-2, 3.0), hankel1(2, 3.0)) < 1e-15);
  CHECK(rel(hankel1(-3, 3.0), -hankel1(3, 3.0)) < 1e-15);
  CHECK((I / 4.0 * hankel1(0, 0.5)).imag() > 0.0);
  CHECK_THROWS_AS(hankel1(0, 0.0), DomainError);
  CHECK_THROWS_AS(hankel1(1, -1.0), DomainError);
}

TEST_CASE("Wronskian of J and Y") {
  for (double x : {0.05, 0.9, 3.0, 11.9, 12.1, 40.0, 200.0}) {
    for (int p : {0, 1, 5, 20}) {
      const double w = bessel_j(p + 1, x).real() * bessel_y(p, x) -
                       bessel_j(p, x).real() * bessel_y(p + 1, x);
      CAPTURE(x);
      CAPTURE(p);
      CHECK(w == doctest::Approx(2.0 / (pi * x)).epsilon(1e-12));
    }
  }
}

TEST_CASE("hankel1_array agrees with single evaluations") {
  const auto all = hankel1_array(25, 7.5);
  for (int p = 0; p <= 25; ++p) CHECK(rel(all[p], hankel1(p, 7.5)) < 1e-12);
}

TEST_CASE("generating function partial sums") {
  CHECK(generating_partial_sum(0.0, cplx(0.3, 2.0), 1) == cplx(1.0, 0.0));
  const cplx om = std::polar(1.0, pi / 3);
  const cplx exact = std::exp(0.5 * (om - 1.0 / om));
  CHECK(std::abs(generating_partial_sum(1.0, om, 20) - exact) < 1e-12);
  for (int P : {2, 4, 8}) {
    const cplx w = std::polar(1.0, 0.4);
    const cplx err = generating_partial_sum(2.0, w, P) - std::exp(1.0 * (w - 1.0 / w));
    double bound = 0.0;
    for (int p = P; p < 80; ++p) bound += 2.0 * bessel_j_bound(p, 2.0);
    CHECK(std::abs(err) <= bound);
  }
}

TEST_CASE("generating sums reproduce the plane wave behind the multipole expansion") {
  const double k = 1.3;
  for (double lam : {-1.2, -0.4, 0.0, 0.7, 1.25}) {
    const cplx w = w_map(lam, k);
    for (double theta : {0.2, 1.9, -2.5}) {
      const double r = 1.7;
      const double x = r * std::cos(theta), y = r * std::sin(theta);
      const cplx h = vertical_wavenumber(lam, k);
      const cplx target = std::exp(-h * y - I * lam * x);
      const cplx s = generating_partial_sum(k * r, -I * std::polar(1.0, theta) * w, 60);
      CHECK(std::abs(s - target) < 1e-10);
    }
  }
}

TEST_CASE("w_map identities") {
  CHECK(std::abs(w_map(0.0, 2.5) - I) < 1e-15);
  CHECK(std::abs(w_map(0.3, 1.0)) == doctest::Approx(1.0).epsilon(1e-15));
  const cplx lam(2.5, 0.1);
  CHECK(std::abs(w_map(lam, 1.0) * w_map(-lam, 1.0) + 1.0) < 1e-14);
}

TEST_CASE("free_space_green") {
  CHECK(rel(free_space_green(2.0, 0.7), I / 4.0 * hankel1(0, 1.4)) < 1e-15);
}
