#include "layerfmm/medium.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace layerfmm {

LayeredMedium::LayeredMedium(std::vector<double> depths,
                             std::vector<cplx> wavenumbers,
                             std::vector<InterfaceRows> rows)
    : depths_(std::move(depths)), k_(std::move(wavenumbers)),
      rows_(std::move(rows)) {
  const std::size_t L = depths_.size();
  if (L < 1) throw DomainError("medium needs at least one interface");
  if (L > 64) throw DomainError("medium supports at most 64 interfaces");
  if (k_.size() != L + 1) {
    throw DomainError("expected " + std::to_string(L + 1) + " wavenumbers, got " +
                      std::to_string(k_.size()));
  }
  if (rows_.size() != L) {
    throw DomainError("expected two condition rows for each of " +
                      std::to_string(L) + " interfaces");
  }
  for (std::size_t l = 0; l < L; ++l) {
    if (!std::isfinite(depths_[l])) throw DomainError("non-finite depth");
    if (l > 0 && !(depths_[l] < depths_[l - 1])) {
      throw DomainError("interface depths must be strictly decreasing");
    }
  }
  for (cplx k : k_) {
    if (!(k.real() > 0.0) || k.imag() < 0.0 || !std::isfinite(std::abs(k))) {
      throw DomainError("wavenumbers must have positive real part and "
                        "non-negative imaginary part");
    }
  }
}

LayeredMedium LayeredMedium::acoustic(std::vector<double> depths,
                                      std::vector<double> wavenumbers,
                                      std::vector<double> densities) {
  if (densities.empty()) densities.assign(wavenumbers.size(), 1.0);
  if (densities.size() != wavenumbers.size()) {
    throw DomainError("one density per layer required");
  }
  for (double r : densities) {
    if (!(r > 0.0)) throw DomainError("densities must be positive");
  }
  std::vector<InterfaceRows> rows;
  for (std::size_t l = 0; l < depths.size() && l + 1 < densities.size(); ++l) {
    rows.push_back({ConditionRow{1.0, 0.0, 1.0, 0.0},
                    ConditionRow{0.0, 1.0 / densities[l], 0.0,
                                 1.0 / densities[l + 1]}});
  }
  std::vector<cplx> k(wavenumbers.begin(), wavenumbers.end());
  return LayeredMedium(std::move(depths), std::move(k), std::move(rows));
}

LayeredMedium LayeredMedium::sound_soft(double d, double k_top,
                                        double k_bottom) {
  return LayeredMedium({d}, {k_top, k_bottom},
                       {InterfaceRows{ConditionRow{1.0, 0.0, 0.0, 0.0},
                                      ConditionRow{0.0, 0.0, 1.0, 0.0}}});
}

double LayeredMedium::k_max() const {
  double m = 0.0;
  for (cplx k : k_) m = std::max(m, k.real());
  return m;
}

double LayeredMedium::k_min() const {
  double m = k_[0].real();
  for (cplx k : k_) m = std::min(m, k.real());
  return m;
}

LayeredMedium LayeredMedium::with_loss(double eps) const {
  std::vector<cplx> k = k_;
  for (cplx& v : k) v = cplx(v.real(), eps * v.real());
  return LayeredMedium(depths_, std::move(k), rows_);
}

int layer_of(const LayeredMedium& m, double y) {
  const auto& d = m.depths();
  for (int l = 0; l < int(d.size()); ++l) {
    if (y == d[l]) {
      throw BoundaryTieError("y = " + std::to_string(y) +
                             " lies on interface " + std::to_string(l));
    }
    if (y > d[l]) return l;
  }
  return int(d.size());
}

bool is_admissible(int l, Dir d, int L) {
  if (l < 0 || l > L) return false;
  if (l == 0 && d == Dir::down) return false;
  if (l == L && d == Dir::up) return false;
  return true;
}

bool is_admissible(const ReactionComponentId& id, int L) {
  return is_admissible(id.t, id.dir_t, L) && is_admissible(id.s, id.dir_s, L);
}

double relevant_interface(const LayeredMedium& m, int l, Dir d) {
  const int L = m.num_interfaces();
  if (!is_admissible(l, d, L)) {
    throw InadmissibleError("layer " + std::to_string(l) + " has no " +
                            to_string(d) + " component");
  }
  return d == Dir::up ? m.depth(l) : m.depth(l - 1);
}

namespace {

std::pair<double, double> side_offsets(const LayeredMedium& m,
                                       const PolarizedPair& pair) {
  const auto& id = pair.id;
  const double ht =
      tau(id.dir_t) * (pair.x1.y - relevant_interface(m, id.t, id.dir_t));
  const double hs =
      tau(id.dir_s) * (pair.x2.y - relevant_interface(m, id.s, id.dir_s));
  if (!(ht > 0.0) || !(hs > 0.0)) {
    throw DomainError("points are not on the polarized side of their interfaces");
  }
  return {ht, hs};
}

}  // namespace

double vertical_offset(const LayeredMedium& m, const PolarizedPair& pair) {
  const auto [ht, hs] = side_offsets(m, pair);
  return ht + hs;
}

double polarized_distance(const LayeredMedium& m, const PolarizedPair& pair) {
  return std::hypot(pair.x1.x - pair.x2.x, vertical_offset(m, pair));
}

Point polarization_image(const LayeredMedium& m, const ReactionComponentId& id,
                         Point x2) {
  const double ds = relevant_interface(m, id.s, id.dir_s);
  const double off = tau(id.dir_s) * (x2.y - ds);
  if (!(off > 0.0)) {
    throw DomainError("source is not on the polarized side of d_s");
  }
  const double dt = relevant_interface(m, id.t, id.dir_t);
  return {x2.x, dt - tau(id.dir_t) * off};
}

std::vector<ReactionComponentId> admissible_components(int t, int s, int L) {
  std::vector<ReactionComponentId> out;
  for (Dir dt : {Dir::up, Dir::down}) {
    for (Dir ds : {Dir::up, Dir::down}) {
      if (is_admissible(t, dt, L) && is_admissible(s, ds, L)) {
        out.push_back({t, s, dt, ds});
      }
    }
  }
  return out;
}

}  // namespace layerfmm
