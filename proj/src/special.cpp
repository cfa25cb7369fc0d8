#include "layerfmm/special.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace layerfmm::special {

namespace {

constexpr double euler_gamma = 0.57721566490153286060651209008240243;
constexpr double rescale_threshold = 1e250;

void check_order(int p, const BesselConfig& cfg) {
  if (std::abs(p) > cfg.max_order) {
    throw DomainError("Bessel order " + std::to_string(p) +
                      " exceeds configured maximum " +
                      std::to_string(cfg.max_order));
  }
}

void check_radius(cplx z, const BesselConfig& cfg) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
    throw DomainError("non-finite Bessel argument");
  }
  if (std::abs(z) > cfg.validity_radius) {
    throw OverflowError("Bessel argument |z| = " + std::to_string(std::abs(z)) +
                        " beyond validity radius");
  }
}

// Ascending series; accurate while |z|^2/4 stays below the order (or |z| small).
cplx series_j(int n, cplx z) {
  const cplx half = 0.5 * z;
  cplx lead = 1.0;
  for (int j = 1; j <= n; ++j) lead *= half / double(j);
  const cplx q = -half * half;
  cplx term = 1.0;
  cplx sum = 1.0;
  for (int k = 1; k < 500; ++k) {
    term *= q / (double(k) * double(n + k));
    sum += term;
    if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
  }
  return lead * sum;
}

bool use_series(int n, double az, const BesselConfig& cfg) {
  return az <= cfg.series_radius || 0.25 * az * az <= double(n + 1);
}

// Miller backward recurrence from a start order well above max(top, |z|),
// normalised with e^{cz} = J_0 + 2 sum_m c^m J_m, c = -i sgn(Im z) (or -i on
// the real axis). That choice keeps every term of the sum non-cancelling
// when |Im z| is large. Returns J_0..J_nstart.
std::vector<cplx> miller(int top, cplx z) {
  const double az = std::abs(z);
  const double base = std::max<double>(top, std::ceil(az));
  const int nstart =
      int(base) + 24 + int(std::ceil(std::sqrt(48.0 * std::max(base, 1.0))));
  std::vector<cplx> j(nstart + 2, cplx{0.0});
  j[nstart] = 1e-30;
  const cplx two_over_z = 2.0 / z;
  for (int m = nstart; m >= 1; --m) {
    j[m - 1] = double(m) * two_over_z * j[m] - j[m + 1];
    if (std::abs(j[m - 1]) > rescale_threshold) {
      for (int i = m - 1; i <= nstart; ++i) j[i] /= rescale_threshold;
    }
  }
  const cplx c = (z.imag() >= 0.0) ? -I : I;
  cplx cpow = 1.0;
  cplx sum = j[0];
  for (int m = 1; m <= nstart; ++m) {
    cpow *= c;
    sum += 2.0 * cpow * j[m];
  }
  const cplx scale = std::exp(c * z) / sum;
  j.resize(nstart + 1);
  for (auto& v : j) v *= scale;
  return j;
}

// J_0..J_nmax for real x > 0, extended far enough that the tail is negligible.
std::vector<double> real_j_tail(double x, int nmin) {
  if (use_series(0, x, BesselConfig{}) && x <= 1.0) {
    std::vector<double> out;
    for (int n = 0;; ++n) {
      out.push_back(series_j(n, x).real());
      if (n >= nmin && std::abs(out.back()) < 1e-300) break;
      if (n >= nmin && n > 8 && std::abs(out.back()) < 1e-18 * std::abs(out[0]))
        break;
    }
    return out;
  }
  const auto full = miller(nmin, x);
  std::vector<double> out(full.size());
  std::transform(full.begin(), full.end(), out.begin(),
                 [](cplx v) { return v.real(); });
  return out;
}

struct JYArrays {
  std::vector<double> j;  // J_0.. down to negligible magnitude
  std::vector<double> y;  // Y_0..Y_nmax
};

// Y_0..Y_nmax from Neumann series for Y_0, Y_1, then upward recurrence.
JYArrays bessel_jy_arrays(int nmax, double x) {
  auto j = real_j_tail(x, std::max(nmax, 2) + 2);
  const int n = int(j.size());
  const double lg = std::log(0.5 * x) + euler_gamma;
  double s0 = 0.0;
  double s1 = 0.0;
  for (int k = 1; 2 * k < n; ++k) {
    const double sgn = (k % 2 == 0) ? 1.0 : -1.0;
    s0 += sgn * j[2 * k] / k;
    const double jp = (2 * k + 1 < n) ? j[2 * k + 1] : 0.0;
    s1 += sgn * (j[2 * k - 1] - jp) / k;
  }
  std::vector<double> y(nmax + 1);
  y[0] = (2.0 / pi) * lg * j[0] - (4.0 / pi) * s0;
  if (nmax == 0) return {std::move(j), std::move(y)};
  y[1] = -(2.0 / (pi * x)) * j[0] + (2.0 / pi) * lg * j[1] + (2.0 / pi) * s1;
  for (int m = 1; m < nmax; ++m) {
    y[m + 1] = (2.0 * m / x) * y[m] - y[m - 1];
    if (!std::isfinite(y[m + 1]) || std::abs(y[m + 1]) > 1e300) {
      throw OverflowError("Y_" + std::to_string(m + 1) + "(" +
                          std::to_string(x) + ") overflows");
    }
  }
  return {std::move(j), std::move(y)};
}

}  // namespace

cplx branch_sqrt(cplx z) {
  if (z.imag() == 0.0 && z.real() < 0.0) {
    return {0.0, -std::sqrt(-z.real())};
  }
  return std::sqrt(z);
}

cplx bessel_j(int p, cplx z, const BesselConfig& cfg) {
  check_order(p, cfg);
  const int n = std::abs(p);
  const double sgn = (p < 0 && (n % 2 == 1)) ? -1.0 : 1.0;
  if (z == cplx{0.0}) return n == 0 ? 1.0 : 0.0;
  check_radius(z, cfg);
  const double az = std::abs(z);
  if (use_series(n, az, cfg)) return sgn * series_j(n, z);
  return sgn * miller(n, z)[n];
}

std::vector<cplx> bessel_j_array(int nmax, cplx z, const BesselConfig& cfg) {
  check_order(nmax, cfg);
  std::vector<cplx> out(nmax + 1, cplx{0.0});
  if (z == cplx{0.0}) {
    out[0] = 1.0;
    return out;
  }
  check_radius(z, cfg);
  const double az = std::abs(z);
  if (az <= cfg.series_radius) {
    for (int n = 0; n <= nmax; ++n) out[n] = series_j(n, z);
    return out;
  }
  const auto full = miller(nmax, z);
  std::copy_n(full.begin(), nmax + 1, out.begin());
  return out;
}

double bessel_y(int p, double x, const BesselConfig& cfg) {
  check_order(p, cfg);
  if (!(x > 0.0)) throw DomainError("Y_p(x) requires x > 0");
  check_radius(x, cfg);
  const int n = std::abs(p);
  const double sgn = (p < 0 && (n % 2 == 1)) ? -1.0 : 1.0;
  return sgn * bessel_jy_arrays(n, x).y[n];
}

cplx hankel1(int p, double x, const BesselConfig& cfg) {
  check_order(p, cfg);
  if (!(x > 0.0)) throw DomainError("H_p^(1)(x) requires x > 0");
  check_radius(x, cfg);
  const int n = std::abs(p);
  const double sgn = (p < 0 && (n % 2 == 1)) ? -1.0 : 1.0;
  const auto jy = bessel_jy_arrays(n, x);
  return sgn * cplx{jy.j[n], jy.y[n]};
}

std::vector<cplx> hankel1_array(int nmax, double x, const BesselConfig& cfg) {
  check_order(nmax, cfg);
  if (!(x > 0.0)) throw DomainError("H_p^(1)(x) requires x > 0");
  check_radius(x, cfg);
  const auto jy = bessel_jy_arrays(nmax, x);
  std::vector<cplx> h(nmax + 1);
  for (int n = 0; n <= nmax; ++n) h[n] = {jy.j[n], jy.y[n]};
  return h;
}

cplx free_space_green(double k, double r) {
  return 0.25 * I * hankel1(0, k * r);
}

cplx generating_partial_sum(cplx z, cplx omega, int P,
                            const BesselConfig& cfg) {
  if (omega == cplx{0.0}) throw DomainError("generating function needs omega != 0");
  if (P < 1) throw DomainError("partial sum needs P >= 1");
  const auto j = bessel_j_array(P - 1, z, cfg);
  cplx sum = j[0];
  cplx wp = 1.0;
  cplx wm = 1.0;
  const cplx winv = 1.0 / omega;
  for (int p = 1; p < P; ++p) {
    wp *= omega;
    wm *= -winv;  // J_{-p} w^{-p} = J_p (-1/w)^p
    sum += j[p] * (wp + wm);
  }
  return sum;
}

cplx w_map(cplx lambda, double k) {
  if (!(k > 0.0)) throw DomainError("w_map needs k > 0");
  return (lambda - vertical_wavenumber(lambda, k)) / k;
}

double bessel_j_bound(int p, cplx z) {
  const int n = std::abs(p);
  const double az = std::abs(z);
  if (n == 0) return std::exp(std::abs(z.imag()));
  if (az == 0.0) return 0.0;
  return std::exp(n * std::log(0.5 * az) - std::lgamma(n + 1.0) +
                  std::abs(z.imag()));
}

}  // namespace layerfmm::special
