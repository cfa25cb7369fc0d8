"""Reference values frozen into tests/oracle_values.hpp.

Run: python3 tools/oracles.py > tests/oracle_values.hpp
Every value comes from mpmath at 40 significant digits, independently of
the C++ implementation.
"""

import mpmath as mp

mp.mp.dps = 40


def c(z):
    z = mp.mpc(z)
    return "{%s, %s}" % (mp.nstr(z.real, 20), mp.nstr(z.imag, 20))


def r(x):
    return mp.nstr(mp.mpf(x), 20)


BESSEL_J = [
    (0, 1.0), (1, 1.0), (3, mp.mpc(2, 1)), (0, mp.mpc(30, 5)), (5, mp.mpc(0, 10)),
    (7, mp.mpc(-20, 3)), (50, 10.0), (-3, 2.5), (-4, mp.mpc(1, -2)), (12, 0.3),
    (2, mp.mpc(100, 0.5)), (20, mp.mpc(15, 15)),
]

BESSEL_Y = [(0, 0.3), (1, 0.01), (3, 7.5), (10, 100.0), (20, 3.0), (0, 45.0), (2, 1.0)]


def half_space_green(k0, k1, rho0, rho1, x, xs):
    """Acoustic half-spaces y > 0 (k0, rho0) and y < 0 (k1, rho1).

    Reflection R = (h0/rho0 - h1/rho1) / (h0/rho0 + h1/rho1) follows from
    continuity of G and (1/rho) dG/dy; T = 1 + R. The free part uses
    (i/4) H_0 = (1/(4 pi)) int e^{-h|y|} e^{i l x} / h dl.
    """
    dx = x[0] - xs[0]
    y, ys = x[1], xs[1]

    def h(lam, k):
        v = lam * lam - k * k
        return mp.sqrt(v) if v > 0 else -1j * mp.sqrt(-v)

    def refl(lam):
        a, b = h(lam, k0) / rho0, h(lam, k1) / rho1
        return (a - b) / (a + b)

    if y > 0:
        def f(lam):
            return refl(lam) * mp.exp(-h(lam, k0) * (y + ys)) / h(lam, k0) * mp.cos(lam * dx)
    else:
        def f(lam):
            t = 1 + refl(lam)
            return t * mp.exp(h(lam, k1) * y - h(lam, k0) * ys) / h(lam, k0) * mp.cos(lam * dx)

    pts = sorted({0, k0, k1}) + [max(k0, k1) + 2, max(k0, k1) + 10, mp.inf]
    integral = 2 * mp.quad(f, pts)
    reaction = integral / (4 * mp.pi)
    free = 0
    if y > 0:
        dist = mp.sqrt(dx * dx + (y - ys) ** 2)
        free = 0.25j * (mp.besselj(0, k0 * dist) + 1j * mp.bessely(0, k0 * dist))
    return free + reaction, reaction


GREEN_CASES = [
    # k0, k1, rho0, rho1, target, source
    (1.0, 1.5, 1.0, 1.0, (0.5, 0.3), (0.0, 0.2)),
    (1.0, 1.5, 1.0, 2.0, (0.5, 0.3), (0.0, 0.2)),
    (1.0, 1.5, 1.0, 2.0, (1.0, -0.7), (0.0, 0.2)),
    (2.0, 0.5, 1.0, 3.0, (-2.0, 1.5), (0.3, 0.4)),
]


def main():
    print("#pragma once")
    print("// Generated by tools/oracles.py (mpmath, 40 digits). Do not edit.")
    print()
    print("#include <complex>")
    print()
    print("namespace oracle {")
    print()
    print("struct BesselJCase { int p; std::complex<double> z; std::complex<double> value; };")
    print("inline const BesselJCase kBesselJ[] = {")
    for p, z in BESSEL_J:
        print("    {%d, %s, %s}," % (p, c(z), c(mp.besselj(p, z))))
    print("};")
    print()
    print("struct BesselYCase { int p; double x; double value; };")
    print("inline const BesselYCase kBesselY[] = {")
    for p, x in BESSEL_Y:
        print("    {%d, %s, %s}," % (p, r(x), r(mp.bessely(p, x))))
    print("};")
    print()
    print("struct HalfSpaceCase {")
    print("  double k0, k1, rho0, rho1, x, y, xs, ys;")
    print("  std::complex<double> green, reaction;")
    print("};")
    print("inline const HalfSpaceCase kHalfSpace[] = {")
    for k0, k1, rho0, rho1, x, xs in GREEN_CASES:
        g, rf = half_space_green(k0, k1, rho0, rho1, x, xs)
        print("    {%s, %s, %s, %s, %s, %s, %s, %s, %s, %s}," % (
            r(k0), r(k1), r(rho0), r(rho1), r(x[0]), r(x[1]), r(xs[0]), r(xs[1]), c(g), c(rf)))
    print("};")
    print()
    print("}  // namespace oracle")


if __name__ == "__main__":
    main()
