#pragma once
// Generated by tools/oracles.py (mpmath, 40 digits). Do not edit.

#include <complex>

namespace oracle {

struct BesselJCase { int p; std::complex<double> z; std::complex<double> value; };
inline const BesselJCase kBesselJ[] = {
    {0, {1.0, 0.0}, {0.76519768655796655145, 0.0}},
    {1, {1.0, 0.0}, {0.44005058574493351596, 0.0}},
    {3, {2.0, 1.0}, {0.082430798954355344807, 0.17535344401066129114}},
    {0, {30.0, 5.0}, {-5.6339379855701518378, 9.1466181158896841674}},
    {5, {0.0, 10.0}, {0.0, 777.18828640325995991}},
    {7, {-20.0, 3.0}, {1.5288023994018093952, 0.1226078309291965856}},
    {50, {10.0, 0.0}, {1.7845136078715953063e-30, 0.0}},
    {-3, {2.5, 0.0}, {-0.21660039103911352477, 0.0}},
    {-4, {1.0, -2.0}, {-0.034897700963775134185, 0.067214508133648970454}},
    {12, {0.2999999999999999889, 0.0}, {2.7039984267648414084e-19, 0.0}},
    {2, {100.0, 0.5}, {-0.024375179824379354284, -0.039970128331427786964}},
    {20, {15.0, 15.0}, {-109.37590784763129787, -212.81961382617013879}},
};

struct BesselYCase { int p; double x; double value; };
inline const BesselYCase kBesselY[] = {
    {0, 0.2999999999999999889, -0.80727357780451949121},
    {1, 0.010000000000000000208, -63.678596282060655049},
    {3, 7.5, 0.1597075919379351151},
    {10, 100.0, 0.058331574236414928754},
    {20, 3.0, -13113540041757.446397},
    {0, 45.0, 0.027060469763313287711},
    {2, 1.0, -1.6506826068162543911},
};

struct HalfSpaceCase {
  double k0, k1, rho0, rho1, x, y, xs, ys;
  std::complex<double> green, reaction;
};
inline const HalfSpaceCase kHalfSpace[] = {
    {1.0, 1.5, 1.0, 1.0, 0.5, 0.2999999999999999889, 0.0, 0.2000000000000000111, {0.083706751283552423465, 0.20739861218491961115}, {-0.023810566173253583188, -0.026613550924584321785}},
    {1.0, 1.5, 1.0, 2.0, 0.5, 0.2999999999999999889, 0.0, 0.2000000000000000111, {0.1002750433014613637, 0.28261251254436951688}, {-0.007242274155344642954, 0.04860034943486558395}},
    {1.0, 1.5, 1.0, 2.0, 1.0, -0.69999999999999995559, 0.0, 0.2000000000000000111, {-0.1755293099435583023, 0.13238751395866085688}, {-0.1755293099435583023, 0.13238751395866085688}},
    {2.0, 0.5, 1.0, 3.0, -2.0, 1.5, 0.2999999999999999889, 0.4000000000000000222, {0.15417860894234255145, -0.038309600775926134574}, {0.073805917244952467216, -0.0021432936197199527513}},
};

}  // namespace oracle
