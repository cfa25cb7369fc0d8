#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "layerfmm/common.hpp"
#include "layerfmm/expansions.hpp"
#include "layerfmm/medium.hpp"
#include "layerfmm/quadrature.hpp"

namespace layerfmm::fmm {

using BoxKey = std::int64_t;

inline BoxKey box_key(int ix, int iy) {
  return (BoxKey(iy) << 32) | BoxKey(std::uint32_t(ix));
}
inline int box_ix(BoxKey k) { return int(std::uint32_t(k & 0xffffffff)); }
inline int box_iy(BoxKey k) { return int(k >> 32); }

/// Uniform quadtree over two point sets (targets and sources) sharing one
/// square root box. Level 0 is the root; leaves sit at level `levels()`.
class QuadTree {
 public:
  QuadTree(std::span<const Point> targets, std::span<const Point> sources,
           Point center, double size, int levels);

  int levels() const { return levels_; }
  double box_size(int level) const { return size_ / double(1 << level); }
  Point box_center(int level, BoxKey key) const;
  BoxKey cell_of(Point p, int level) const;

  /// Occupied boxes per level, sorted.
  const std::vector<BoxKey>& target_boxes(int level) const { return tboxes_.at(level); }
  const std::vector<BoxKey>& source_boxes(int level) const { return sboxes_.at(level); }
  bool has_sources(int level, BoxKey key) const;

  std::span<const int> targets_in(BoxKey leaf) const;
  std::span<const int> sources_in(BoxKey leaf) const;

 private:
  struct Range {
    int begin = 0;
    int count = 0;
  };

  Point origin_;  // lower-left corner of the root
  double size_;
  int levels_;
  std::vector<int> torder_, sorder_;
  std::unordered_map<BoxKey, Range> tleaf_, sleaf_;
  std::vector<std::vector<BoxKey>> tboxes_, sboxes_;
};

/// Standard well-separated lists: at level l >= 2 a target box interacts in
/// the far field with source children of its parent's neighbours that are
/// not adjacent to it; adjacent leaves form the near field.
struct InteractionLists {
  std::vector<std::unordered_map<BoxKey, std::vector<BoxKey>>> far;
  std::unordered_map<BoxKey, std::vector<BoxKey>> near;
};

/// Separation ratio (source radius + target radius) bound of far pairs:
/// box radius over centre distance minus box radius.
double separation_ratio();

/// Throws DomainError when c0 cannot be met by one-box separation.
InteractionLists interaction_lists(const QuadTree& tree, double c0 = 2.0);

/// Number of list entries covering the (target, source) pair; exactly one
/// for every pair when the lists partition the interactions.
int coverage_count(const QuadTree& tree, const InteractionLists& lists,
                   Point target, Point source);

struct FmmConfig {
  double tolerance = 1e-6;
  double c0 = 2.0;
  int max_level = 10;
  int max_order = 80;
  int leaf_size = 20;
  /// 0 uses every hardware thread.
  int workers = 0;
};

struct FmmStats {
  int order = 0;
  int trees = 0;
  long m2l_count = 0;
  long m2l_matrices = 0;
  long near_rules = 0;
  double seconds_setup = 0.0;
  double seconds_far = 0.0;
  double seconds_near = 0.0;
};

struct FmmResult {
  std::vector<cplx> values;
  FmmStats stats;
};

/// sum_j q_j G(x_i, x_j) at every target. Pairs at identical positions are
/// skipped. Throws ConvergenceError when the tolerance needs more than
/// max_order terms.
FmmResult evaluate_all(const quad::SpectralContext& ctx,
                       std::span<const expansions::Source> sources,
                       std::span<const Point> targets, const FmmConfig& cfg = {});

/// Reaction component summed over all pairs with one shared spectral mesh:
/// E factorizes, so the double sum costs O(nodes (N_t + N_s)).
std::vector<cplx> shared_mesh_sum(const quad::SpectralContext& ctx,
                                  const ReactionComponentId& id,
                                  std::span<const Point> targets,
                                  std::span<const expansions::Source> sources,
                                  double tolerance);

/// Direct evaluation without expansions: Hankel sums for the same-layer free
/// part and shared-mesh quadrature for every reaction component.
std::vector<cplx> direct_sum(const quad::SpectralContext& ctx,
                             std::span<const expansions::Source> sources,
                             std::span<const Point> targets,
                             double tolerance = 1e-10, int workers = 0);

/// Runs f(i) for i in [0, n) on up to `workers` threads.
void parallel_for(int n, int workers, const std::function<void(int)>& f);

}  // namespace layerfmm::fmm
