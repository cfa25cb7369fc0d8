#pragma once

#include <array>
#include <optional>
#include <vector>

#include "layerfmm/common.hpp"

namespace layerfmm {

enum class Dir { up, down };

inline int tau(Dir d) { return d == Dir::up ? 1 : -1; }
inline const char* to_string(Dir d) { return d == Dir::up ? "up" : "down"; }

/// One interface condition a_u G_u + b_u dG_u/dy = a_l G_l + b_l dG_l/dy,
/// where u/l are the upper and lower sides of the interface.
struct ConditionRow {
  cplx a_upper = 0.0;
  cplx b_upper = 0.0;
  cplx a_lower = 0.0;
  cplx b_lower = 0.0;
};

using InterfaceRows = std::array<ConditionRow, 2>;

/// Horizontally layered medium. Layer 0 is the top half-space, layer L the
/// bottom one; interface l separates layers l and l+1 at depth d_l.
class LayeredMedium {
 public:
  LayeredMedium(std::vector<double> depths, std::vector<cplx> wavenumbers,
                std::vector<InterfaceRows> rows);

  /// Acoustic transmission: continuity of G and of (1/rho) dG/dy.
  static LayeredMedium acoustic(std::vector<double> depths,
                                std::vector<double> wavenumbers,
                                std::vector<double> densities = {});

  /// Single interface at d with G = 0 imposed from both sides.
  static LayeredMedium sound_soft(double d, double k_top, double k_bottom);

  int num_interfaces() const { return int(depths_.size()); }
  int num_layers() const { return num_interfaces() + 1; }
  double depth(int l) const { return depths_.at(l); }
  const std::vector<double>& depths() const { return depths_; }
  cplx k(int l) const { return k_.at(l); }
  double k_real(int l) const { return k_.at(l).real(); }
  const std::vector<cplx>& wavenumbers() const { return k_; }
  double k_max() const;
  double k_min() const;
  const InterfaceRows& rows(int l) const { return rows_.at(l); }

  /// Copy with every k_l replaced by k_l (1 + i eps).
  LayeredMedium with_loss(double eps) const;

 private:
  std::vector<double> depths_;
  std::vector<cplx> k_;
  std::vector<InterfaceRows> rows_;
};

struct ReactionComponentId {
  int t = 0;
  int s = 0;
  Dir dir_t = Dir::up;
  Dir dir_s = Dir::up;

  friend bool operator==(const ReactionComponentId&,
                         const ReactionComponentId&) = default;
};

struct PolarizedPair {
  Point x1;  // target side
  Point x2;  // source side
  ReactionComponentId id;
};

/// Layer containing height y. Throws BoundaryTieError on an interface.
int layer_of(const LayeredMedium& m, double y);

bool is_admissible(int l, Dir d, int L);
bool is_admissible(const ReactionComponentId& id, int L);

/// d_l for up (l < L), d_{l-1} for down (l > 0).
double relevant_interface(const LayeredMedium& m, int l, Dir d);

/// tau^*(y1 - d_t^*) + tau^star(y2 - d_s^star); both terms must be positive.
double vertical_offset(const LayeredMedium& m, const PolarizedPair& pair);

double polarized_distance(const LayeredMedium& m, const PolarizedPair& pair);

/// (x2, d_t^* - tau^* tau^star (y2 - d_s^star)).
Point polarization_image(const LayeredMedium& m, const ReactionComponentId& id,
                         Point x2);

std::vector<ReactionComponentId> admissible_components(int t, int s, int L);

}  // namespace layerfmm
