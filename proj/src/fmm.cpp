#include "layerfmm/fmm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>
#include <tuple>

#include "layerfmm/special.hpp"

namespace layerfmm::fmm {

using expansions::Source;

void parallel_for(int n, int workers, const std::function<void(int)>& f) {
  if (workers <= 0) workers = int(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  // Static interleaved partition: each index has one owner, so results do
  // not depend on scheduling.
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Tree

QuadTree::QuadTree(std::span<const Point> targets, std::span<const Point> sources,
                   Point center, double size, int levels)
    : origin_{center.x - 0.5 * size, center.y - 0.5 * size}, size_(size),
      levels_(levels) {
  if (!(size > 0.0)) throw DomainError("tree size must be positive");
  if (levels < 2 || levels > 20) throw DomainError("tree depth must lie in [2, 20]");
  auto build = [&](std::span<const Point> pts, std::vector<int>& order,
                   std::unordered_map<BoxKey, Range>& leaves,
                   std::vector<std::vector<BoxKey>>& boxes) {
    std::vector<BoxKey> keys(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) keys[i] = cell_of(pts[i], levels_);
    order.resize(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return keys[a] < keys[b]; });
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j < order.size() && keys[order[j]] == keys[order[i]]) ++j;
      leaves[keys[order[i]]] = {int(i), int(j - i)};
      i = j;
    }
    boxes.assign(levels_ + 1, {});
    for (const auto& [k, r] : leaves) boxes[levels_].push_back(k);
    for (int l = levels_; l >= 0; --l) {
      auto& v = boxes[l];
      if (l < levels_) {
        for (BoxKey k : boxes[l + 1]) v.push_back(box_key(box_ix(k) / 2, box_iy(k) / 2));
      }
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  };
  build(targets, torder_, tleaf_, tboxes_);
  build(sources, sorder_, sleaf_, sboxes_);
}

Point QuadTree::box_center(int level, BoxKey key) const {
  const double w = box_size(level);
  return {origin_.x + (box_ix(key) + 0.5) * w, origin_.y + (box_iy(key) + 0.5) * w};
}

BoxKey QuadTree::cell_of(Point p, int level) const {
  const int n = 1 << level;
  const double w = box_size(level);
  const int ix = std::clamp(int(std::floor((p.x - origin_.x) / w)), 0, n - 1);
  int iy = std::clamp(int(std::floor((p.y - origin_.y) / w)), 0, n - 1);
  // Keep points strictly on their side of the root's horizontal midline,
  // which layered trees align with an interface.
  const double mid = origin_.y + 0.5 * size_;
  if (level >= 1) {
    if (p.y > mid) iy = std::max(iy, n / 2);
    if (p.y < mid) iy = std::min(iy, n / 2 - 1);
  }
  return box_key(ix, iy);
}

bool QuadTree::has_sources(int level, BoxKey key) const {
  const auto& v = sboxes_.at(level);
  return std::binary_search(v.begin(), v.end(), key);
}

std::span<const int> QuadTree::targets_in(BoxKey leaf) const {
  const auto it = tleaf_.find(leaf);
  if (it == tleaf_.end()) return {};
  return {torder_.data() + it->second.begin, std::size_t(it->second.count)};
}

std::span<const int> QuadTree::sources_in(BoxKey leaf) const {
  const auto it = sleaf_.find(leaf);
  if (it == sleaf_.end()) return {};
  return {sorder_.data() + it->second.begin, std::size_t(it->second.count)};
}

double separation_ratio() {
  const double r = 1.0 / std::sqrt(2.0);
  return r / (2.0 - r);
}

InteractionLists interaction_lists(const QuadTree& tree, double c0) {
  // Far pairs have centre distance >= 2w and source radius <= w / sqrt(2).
  if (!(c0 > 1.0 && c0 < 2.0 * std::sqrt(2.0))) {
    throw DomainError("c0 must lie in (1, 2 sqrt 2) for one-box separation");
  }
  const int L = tree.levels();
  InteractionLists lists;
  lists.far.resize(L + 1);
  for (int l = 2; l <= L; ++l) {
    const int n = 1 << l;
    for (BoxKey t : tree.target_boxes(l)) {
      const int tx = box_ix(t);
      const int ty = box_iy(t);
      std::vector<BoxKey> far;
      for (int py = ty / 2 - 1; py <= ty / 2 + 1; ++py) {
        for (int px = tx / 2 - 1; px <= tx / 2 + 1; ++px) {
          for (int b = 0; b < 2; ++b) {
            for (int a = 0; a < 2; ++a) {
              const int sx = 2 * px + a;
              const int sy = 2 * py + b;
              if (sx < 0 || sy < 0 || sx >= n || sy >= n) continue;
              if (std::abs(sx - tx) <= 1 && std::abs(sy - ty) <= 1) continue;
              const BoxKey s = box_key(sx, sy);
              if (tree.has_sources(l, s)) far.push_back(s);
            }
          }
        }
      }
      if (!far.empty()) lists.far[l][t] = std::move(far);
    }
  }
  const int n = 1 << L;
  for (BoxKey t : tree.target_boxes(L)) {
    std::vector<BoxKey> near;
    for (int sy = box_iy(t) - 1; sy <= box_iy(t) + 1; ++sy) {
      for (int sx = box_ix(t) - 1; sx <= box_ix(t) + 1; ++sx) {
        if (sx < 0 || sy < 0 || sx >= n || sy >= n) continue;
        const BoxKey s = box_key(sx, sy);
        if (tree.has_sources(L, s)) near.push_back(s);
      }
    }
    if (!near.empty()) lists.near[t] = std::move(near);
  }
  return lists;
}

int coverage_count(const QuadTree& tree, const InteractionLists& lists,
                   Point target, Point source) {
  int count = 0;
  auto contains = [](const std::unordered_map<BoxKey, std::vector<BoxKey>>& m,
                     BoxKey t, BoxKey s) {
    const auto it = m.find(t);
    return it != m.end() && std::find(it->second.begin(), it->second.end(), s) !=
                                it->second.end();
  };
  const int L = tree.levels();
  for (int l = 2; l <= L; ++l) {
    if (contains(lists.far[l], tree.cell_of(target, l), tree.cell_of(source, l))) ++count;
  }
  if (contains(lists.near, tree.cell_of(target, L), tree.cell_of(source, L))) ++count;
  return count;
}

// ---------------------------------------------------------------------------
// Shared-mesh reaction sums

std::vector<cplx> shared_mesh_sum(const quad::SpectralContext& ctx,
                                  const ReactionComponentId& id,
                                  std::span<const Point> targets,
                                  std::span<const Source> sources,
                                  double tolerance) {
  std::vector<cplx> out(targets.size(), 0.0);
  if (targets.empty() || sources.empty()) return out;
  const auto& m = ctx.medium();
  const double dt = relevant_interface(m, id.t, id.dir_t);
  const double ds = relevant_interface(m, id.s, id.dir_s);
  std::vector<double> ht(targets.size()), hs(sources.size());
  double ht_min = 1e300, hs_min = 1e300;
  double tx0 = 1e300, tx1 = -1e300, sx0 = 1e300, sx1 = -1e300;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ht[i] = tau(id.dir_t) * (targets[i].y - dt);
    if (!(ht[i] > 0.0)) throw DomainError("target on the wrong side of d_t");
    ht_min = std::min(ht_min, ht[i]);
    tx0 = std::min(tx0, targets[i].x);
    tx1 = std::max(tx1, targets[i].x);
  }
  for (std::size_t j = 0; j < sources.size(); ++j) {
    hs[j] = tau(id.dir_s) * (sources[j].x.y - ds);
    if (!(hs[j] > 0.0)) throw DomainError("source on the wrong side of d_s");
    hs_min = std::min(hs_min, hs[j]);
    sx0 = std::min(sx0, sources[j].x.x);
    sx1 = std::max(sx1, sources[j].x.x);
  }
  const double dx_max = std::max(std::abs(tx1 - sx0), std::abs(sx1 - tx0));
  std::vector<quad::Geometry> reps;
  for (int k = 0; k <= 4; ++k) reps.push_back({dx_max * k / 4.0, ht_min, hs_min});
  quad::QuadratureSpec spec;
  spec.tolerance = tolerance;
  const auto rule = quad::build_rule(ctx, id, reps, {quad::OrderTerm{}}, spec);

  const double c = 0.5 * (tx0 + tx1);
  for (const auto& part : rule.parts) {
    for (std::size_t n = 0; n < part.lambda.size(); ++n) {
      for (int sign : {1, -1}) {
        if (sign < 0 && !part.fold) continue;
        const cplx lam = double(sign) * part.lambda[n];
        const cplx hts = special::vertical_wavenumber(lam, part.kt);
        const cplx hss = special::vertical_wavenumber(lam, part.ks);
        cplx S = 0.0;
        for (std::size_t j = 0; j < sources.size(); ++j) {
          S += sources[j].q * std::exp(-hss * hs[j] - I * lam * (sources[j].x.x - c));
        }
        S *= part.weight[n];
        for (std::size_t i = 0; i < targets.size(); ++i) {
          out[i] += S * std::exp(-hts * ht[i] + I * lam * (targets[i].x - c));
        }
      }
    }
  }
  return out;
}

namespace {

// Points grouped by layer.
struct LayerSplit {
  std::vector<std::vector<int>> index;
};

LayerSplit split_by_layer(const LayeredMedium& m, std::span<const Point> pts) {
  LayerSplit s;
  s.index.resize(m.num_layers());
  for (std::size_t i = 0; i < pts.size(); ++i) s.index[layer_of(m, pts[i].y)].push_back(int(i));
  return s;
}

std::vector<Point> source_points(std::span<const Source> src) {
  std::vector<Point> p;
  for (const auto& s : src) p.push_back(s.x);
  return p;
}

void free_space_direct(double k, std::span<const Point> targets,
                       std::span<const int> ti, std::span<const Source> sources,
                       std::span<const int> sj, std::vector<cplx>& out) {
  for (int i : ti) {
    cplx acc = 0.0;
    for (int j : sj) {
      const double r = norm(targets[i] - sources[j].x);
      if (r == 0.0) continue;
      acc += sources[j].q * special::free_space_green(k, r);
    }
    out[i] += acc;
  }
}

double real_wavenumber(const LayeredMedium& m, int l) {
  if (m.k(l).imag() != 0.0) {
    throw DomainError("free-space term needs a real wavenumber");
  }
  return m.k_real(l);
}

// ---------------------------------------------------------------------------
// Generic upward / translation / downward passes.

struct Kernel {
  int P = 0;
  cplx k_src;
  cplx k_tgt;
  int tau_src = 1;
  int tau_tgt = 1;
  double src_y_sign = 1.0;  // source offsets in expansion coordinates
  /// Grouping key for identical M2L matrices.
  std::function<std::tuple<int, int, int, int>(int, BoxKey, BoxKey)> m2l_key;
  /// (2P-1)^2 matrix, row m, column p.
  std::function<std::vector<cplx>(int, Point, Point)> m2l;
  std::function<void(std::span<const int>, const std::vector<int>&,
                     std::vector<cplx>&)> near;
};

// J_n(z) e^{i n phi} for |n| <= nmax at index n + nmax.
std::vector<cplx> shift_table(int nmax, cplx z, double phi) {
  const auto J = special::bessel_j_array(nmax, z);
  std::vector<cplx> t(2 * nmax + 1);
  for (int n = -nmax; n <= nmax; ++n) {
    const cplx v = (n < 0 && (n & 1)) ? -J[-n] : J[std::abs(n)];
    t[n + nmax] = v * std::polar(1.0, n * phi);
  }
  return t;
}

struct PassTimes {
  double far = 0.0;
  double near = 0.0;
  long m2l_count = 0;
  long m2l_matrices = 0;
};

PassTimes run_passes(const QuadTree& tree, const InteractionLists& lists,
                     std::span<const Point> tpts, std::span<const Point> spts,
                     std::span<const cplx> q, Kernel& K, std::vector<cplx>& out,
                     int workers) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const int L = tree.levels();
  const int P = K.P;
  const int np = 2 * P - 1;
  auto slot = [](const std::vector<BoxKey>& v, BoxKey k) {
    return int(std::lower_bound(v.begin(), v.end(), k) - v.begin());
  };

  std::vector<std::vector<cplx>> me(L + 1), le(L + 1);
  for (int l = 2; l <= L; ++l) {
    me[l].assign(tree.source_boxes(l).size() * np, 0.0);
    le[l].assign(tree.target_boxes(l).size() * np, 0.0);
  }

  // Leaf multipoles.
  {
    const auto& boxes = tree.source_boxes(L);
    parallel_for(int(boxes.size()), workers, [&](int b) {
      const Point c = tree.box_center(L, boxes[b]);
      cplx* M = me[L].data() + std::size_t(b) * np;
      for (int j : tree.sources_in(boxes[b])) {
        Point v = spts[j] - c;
        v.y *= K.src_y_sign;
        const auto J = special::bessel_j_array(P - 1, K.k_src * norm(v));
        const cplx e1 = std::polar(1.0, K.tau_src * angle(v));
        cplx ep = q[j];
        M[P - 1] += ep * J[0];
        cplx en = q[j];
        for (int p = 1; p < P; ++p) {
          ep *= e1;
          en /= e1;
          M[P - 1 + p] += ep * J[p];
          M[P - 1 - p] += ((p & 1) ? -en : en) * J[p];
        }
      }
    });
  }

  // Upward pass.
  for (int l = L - 1; l >= 2; --l) {
    const double wc = tree.box_size(l + 1);
    std::vector<cplx> T[2][2];
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const Point d{(a - 0.5) * wc, (b - 0.5) * wc * K.src_y_sign};
        T[a][b] = shift_table(2 * P - 2, K.k_src * norm(d), K.tau_src * angle(d));
      }
    }
    const auto& parents = tree.source_boxes(l);
    const auto& children = tree.source_boxes(l + 1);
    parallel_for(int(parents.size()), workers, [&](int pb) {
      cplx* Mp = me[l].data() + std::size_t(pb) * np;
      const int px = box_ix(parents[pb]);
      const int py = box_iy(parents[pb]);
      for (int b = 0; b < 2; ++b) {
        for (int a = 0; a < 2; ++a) {
          const BoxKey ck = box_key(2 * px + a, 2 * py + b);
          if (!tree.has_sources(l + 1, ck)) continue;
          const cplx* Mc = me[l + 1].data() + std::size_t(slot(children, ck)) * np;
          const auto& t = T[a][b];
          for (int p = 0; p < np; ++p) {
            cplx acc = 0.0;
            for (int qq = 0; qq < np; ++qq) acc += Mc[qq] * t[p - qq + np - 1];
            Mp[p] += acc;
          }
        }
      }
    });
  }

  // Distinct translation matrices.
  std::map<std::tuple<int, int, int, int>, int> key_index;
  std::vector<std::tuple<int, Point, Point>> requests;
  for (int l = 2; l <= L; ++l) {
    for (const auto& [t, far] : lists.far[l]) {
      for (BoxKey s : far) {
        const auto key = K.m2l_key(l, t, s);
        if (key_index.emplace(key, int(requests.size())).second) {
          requests.emplace_back(l, tree.box_center(l, t), tree.box_center(l, s));
        }
      }
    }
  }
  std::vector<std::vector<cplx>> mats(requests.size());
  parallel_for(int(requests.size()), workers, [&](int i) {
    const auto& [l, tc, sc] = requests[i];
    mats[i] = K.m2l(l, tc, sc);
  });

  // Multipole to local.
  long m2l_count = 0;
  for (int l = 2; l <= L; ++l) {
    const auto& tboxes = tree.target_boxes(l);
    const auto& sboxes = tree.source_boxes(l);
    for (const auto& [t, far] : lists.far[l]) m2l_count += long(far.size());
    parallel_for(int(tboxes.size()), workers, [&](int tb) {
      const auto it = lists.far[l].find(tboxes[tb]);
      if (it == lists.far[l].end()) return;
      cplx* Lc = le[l].data() + std::size_t(tb) * np;
      for (BoxKey s : it->second) {
        const auto& A = mats[key_index.at(K.m2l_key(l, tboxes[tb], s))];
        const cplx* Ms = me[l].data() + std::size_t(slot(sboxes, s)) * np;
        for (int mm = 0; mm < np; ++mm) {
          const cplx* row = A.data() + std::size_t(mm) * np;
          cplx acc = 0.0;
          for (int p = 0; p < np; ++p) acc += row[p] * Ms[p];
          Lc[mm] += acc;
        }
      }
    });
  }

  // Downward pass.
  for (int l = 2; l < L; ++l) {
    const double wc = tree.box_size(l + 1);
    std::vector<cplx> T[2][2];
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const Point d{(a - 0.5) * wc, (b - 0.5) * wc};
        T[a][b] = shift_table(2 * P - 2, K.k_tgt * norm(d), K.tau_tgt * angle(d));
      }
    }
    const auto& parents = tree.target_boxes(l);
    const auto& children = tree.target_boxes(l + 1);
    parallel_for(int(children.size()), workers, [&](int cb) {
      const int cx = box_ix(children[cb]);
      const int cy = box_iy(children[cb]);
      const cplx* Lp =
          le[l].data() + std::size_t(slot(parents, box_key(cx / 2, cy / 2))) * np;
      cplx* Lc = le[l + 1].data() + std::size_t(cb) * np;
      const auto& t = T[cx & 1][cy & 1];
      for (int mm = 0; mm < np; ++mm) {
        cplx acc = 0.0;
        for (int p = 0; p < np; ++p) acc += Lp[p] * t[p - mm + np - 1];
        Lc[mm] += acc;
      }
    });
  }

  // Local evaluation.
  {
    const auto& boxes = tree.target_boxes(L);
    parallel_for(int(boxes.size()), workers, [&](int b) {
      const Point c = tree.box_center(L, boxes[b]);
      const cplx* Lc = le[L].data() + std::size_t(b) * np;
      for (int i : tree.targets_in(boxes[b])) {
        const Point v = tpts[i] - c;
        const auto J = special::bessel_j_array(P - 1, K.k_tgt * norm(v));
        const cplx e1 = std::polar(1.0, K.tau_tgt * angle(v));
        cplx acc = Lc[P - 1] * J[0];
        cplx ep = 1.0;
        cplx en = 1.0;
        for (int p = 1; p < P; ++p) {
          ep *= e1;
          en /= e1;
          acc += Lc[P - 1 + p] * ep * J[p];
          acc += Lc[P - 1 - p] * ((p & 1) ? -en : en) * J[p];
        }
        out[i] += acc;
      }
    });
  }
  const auto t1 = clock::now();

  // Near field.
  {
    const auto& boxes = tree.target_boxes(L);
    parallel_for(int(boxes.size()), workers, [&](int b) {
      const auto it = lists.near.find(boxes[b]);
      if (it == lists.near.end()) return;
      std::vector<int> src;
      for (BoxKey s : it->second) {
        for (int j : tree.sources_in(s)) src.push_back(j);
      }
      K.near(tree.targets_in(boxes[b]), src, out);
    });
  }
  const auto t2 = clock::now();

  PassTimes times;
  times.far = std::chrono::duration<double>(t1 - t0).count();
  times.near = std::chrono::duration<double>(t2 - t1).count();
  times.m2l_count = m2l_count;
  times.m2l_matrices = long(requests.size());
  return times;
}

int tree_levels(std::size_t npoints, const FmmConfig& cfg) {
  const double boxes = std::max(1.0, double(npoints) / double(cfg.leaf_size));
  const int l = int(std::ceil(std::log(boxes) / std::log(4.0)));
  return std::clamp(l, 2, cfg.max_level);
}

int expansion_order(const FmmConfig& cfg, double k, double root_size) {
  expansions::TruncationConfig tc;
  tc.c0 = (1.0 - 1e-12) / separation_ratio();
  // Largest interacting boxes sit at level 2.
  const double rho = 0.25 * root_size / std::sqrt(2.0);
  const int P = expansions::choose_truncation(separation_ratio(), cfg.tolerance, k,
                                              rho, tc);
  if (P > cfg.max_order) {
    throw ConvergenceError("tolerance needs order " + std::to_string(P) +
                           " above the configured maximum " +
                           std::to_string(cfg.max_order));
  }
  return P;
}

}  // namespace

FmmResult evaluate_all(const quad::SpectralContext& ctx,
                       std::span<const Source> sources,
                       std::span<const Point> targets, const FmmConfig& cfg) {
  using clock = std::chrono::steady_clock;
  if (!(cfg.tolerance >= 1e-12 && cfg.tolerance <= 1e-2)) {
    throw DomainError("FMM tolerance must lie in [1e-12, 1e-2]");
  }
  if (!(cfg.c0 > 1.0)) throw DomainError("c0 must exceed 1");
  const auto& m = ctx.medium();
  const auto tsplit = split_by_layer(m, targets);
  const auto ssplit = split_by_layer(m, source_points(sources));
  FmmResult res;
  res.values.assign(targets.size(), 0.0);
  const double near_tol = std::clamp(0.01 * cfg.tolerance, 1e-13, 1e-8);

  for (int t = 0; t < m.num_layers(); ++t) {
    const auto& ti = tsplit.index[t];
    if (ti.empty()) continue;
    std::vector<Point> tpts;
    for (int i : ti) tpts.push_back(targets[i]);
    for (int s = 0; s < m.num_layers(); ++s) {
      const auto& sj = ssplit.index[s];
      if (sj.empty()) continue;
      std::vector<Source> ssrc;
      for (int j : sj) ssrc.push_back(sources[j]);
      std::vector<cplx> q;
      for (const auto& x : ssrc) q.push_back(x.q);

      // Same-layer free-space part.
      if (t == s) {
        const auto ts = clock::now();
        const double k = real_wavenumber(m, t);
        std::vector<Point> spts = source_points(ssrc);
        double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
        for (const auto* set : {&tpts, &spts}) {
          for (Point p : *set) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y);
            y1 = std::max(y1, p.y);
          }
        }
        const double size = std::max({x1 - x0, y1 - y0, 1e-12}) * (1.0 + 1e-9);
        const QuadTree tree(tpts, spts, {0.5 * (x0 + x1), 0.5 * (y0 + y1)}, size,
                            tree_levels(tpts.size() + spts.size(), cfg));
        const auto lists = interaction_lists(tree, cfg.c0);
        Kernel K;
        K.P = expansion_order(cfg, k, size);
        K.k_src = K.k_tgt = k;
        K.tau_src = -1;
        K.tau_tgt = 1;
        K.m2l_key = [](int l, BoxKey a, BoxKey b) {
          return std::make_tuple(l, box_ix(a) - box_ix(b), box_iy(a) - box_iy(b), 0);
        };
        const int P = K.P;
        K.m2l = [P, k](int, Point tc, Point sc) {
          const Point b = tc - sc;
          const auto H = special::hankel1_array(2 * P - 2, k * norm(b));
          const double th = angle(b);
          const int np = 2 * P - 1;
          std::vector<cplx> A(std::size_t(np) * np);
          for (int mm = -(P - 1); mm < P; ++mm) {
            for (int p = -(P - 1); p < P; ++p) {
              const int n = p - mm;
              const cplx h = (n < 0 && (n & 1)) ? -H[-n] : H[std::abs(n)];
              A[std::size_t(mm + P - 1) * np + p + P - 1] =
                  0.25 * I * h * std::polar(1.0, n * th);
            }
          }
          return A;
        };
        K.near = [&](std::span<const int> tt, const std::vector<int>& ss,
                     std::vector<cplx>& out) {
          free_space_direct(k, tpts, tt, ssrc, ss, out);
        };
        std::vector<cplx> out(tpts.size(), 0.0);
        res.stats.seconds_setup += std::chrono::duration<double>(clock::now() - ts).count();
        const auto times = run_passes(tree, lists, tpts, spts, q, K, out, cfg.workers);
        res.stats.seconds_far += times.far;
        res.stats.seconds_near += times.near;
        res.stats.m2l_count += times.m2l_count;
        res.stats.m2l_matrices += times.m2l_matrices;
        res.stats.order = std::max(res.stats.order, K.P);
        ++res.stats.trees;
        for (std::size_t i = 0; i < ti.size(); ++i) res.values[ti[i]] += out[i];
      }

      // Reaction components over targets and polarization images.
      for (const auto& id : admissible_components(t, s, m.num_interfaces())) {
        const auto ts = clock::now();
        const double dt = relevant_interface(m, id.t, id.dir_t);
        const double ds = relevant_interface(m, id.s, id.dir_s);
        const int st = tau(id.dir_t);
        const int ss = tau(id.dir_s);
        std::vector<Point> images;
        for (const auto& x : ssrc) images.push_back(polarization_image(m, id, x.x));
        double x0 = 1e300, x1 = -1e300, ext = 0.0;
        for (const auto* set : {&tpts, &images}) {
          for (Point p : *set) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            ext = std::max(ext, std::abs(p.y - dt));
          }
        }
        const double size = std::max({x1 - x0, 2.0 * ext, 1e-12}) * (1.0 + 1e-9);
        const QuadTree tree(tpts, images, {0.5 * (x0 + x1), dt}, size,
                            tree_levels(tpts.size() + images.size(), cfg));
        const auto lists = interaction_lists(tree, cfg.c0);
        Kernel K;
        K.P = expansion_order(cfg, std::max(std::abs(m.k(id.t)), std::abs(m.k(id.s))),
                              size);
        K.k_src = m.k(id.s);
        K.k_tgt = m.k(id.t);
        K.tau_src = ss;
        K.tau_tgt = st;
        K.src_y_sign = -double(st * ss);
        K.m2l_key = [](int l, BoxKey a, BoxKey b) {
          return std::make_tuple(l, box_ix(a) - box_ix(b), box_iy(a), box_iy(b));
        };
        expansions::ExpansionOptions eopt;
        eopt.c0 = cfg.c0;
        eopt.quad.tolerance = std::clamp(0.01 * cfg.tolerance, 1e-13, 1e-8);
        const int P = K.P;
        K.m2l = [&, P](int, Point tc, Point sc) {
          const Point sc_orig{sc.x, ds + double(st * ss) * (dt - sc.y)};
          return expansions::m2l(ctx, id, tc, sc_orig, P, P, eopt).entries;
        };
        K.near = [&](std::span<const int> tt, const std::vector<int>& sidx,
                     std::vector<cplx>& out) {
          std::vector<Point> tp;
          for (int i : tt) tp.push_back(tpts[i]);
          std::vector<Source> sp;
          for (int j : sidx) sp.push_back(ssrc[j]);
          const auto v = shared_mesh_sum(ctx, id, tp, sp, near_tol);
          for (std::size_t a = 0; a < tt.size(); ++a) out[tt[a]] += v[a];
        };
        std::vector<cplx> out(tpts.size(), 0.0);
        res.stats.seconds_setup += std::chrono::duration<double>(clock::now() - ts).count();
        const auto times = run_passes(tree, lists, tpts, images, q, K, out, cfg.workers);
        res.stats.seconds_far += times.far;
        res.stats.seconds_near += times.near;
        res.stats.m2l_count += times.m2l_count;
        res.stats.m2l_matrices += times.m2l_matrices;
        res.stats.near_rules += long(lists.near.size());
        res.stats.order = std::max(res.stats.order, K.P);
        ++res.stats.trees;
        for (std::size_t i = 0; i < ti.size(); ++i) res.values[ti[i]] += out[i];
      }
    }
  }
  return res;
}

std::vector<cplx> direct_sum(const quad::SpectralContext& ctx,
                             std::span<const Source> sources,
                             std::span<const Point> targets, double tolerance,
                             int workers) {
  const auto& m = ctx.medium();
  const auto tsplit = split_by_layer(m, targets);
  const auto ssplit = split_by_layer(m, source_points(sources));
  std::vector<cplx> out(targets.size(), 0.0);
  for (int t = 0; t < m.num_layers(); ++t) {
    const auto& ti = tsplit.index[t];
    if (ti.empty()) continue;
    std::vector<Point> tpts;
    for (int i : ti) tpts.push_back(targets[i]);
    for (int s = 0; s < m.num_layers(); ++s) {
      const auto& sj = ssplit.index[s];
      if (sj.empty()) continue;
      std::vector<Source> ssrc;
      for (int j : sj) ssrc.push_back(sources[j]);
      if (t == s) {
        const double k = real_wavenumber(m, t);
        std::vector<int> all(ssrc.size());
        std::iota(all.begin(), all.end(), 0);
        std::vector<cplx> v(tpts.size(), 0.0);
        parallel_for(int(tpts.size()), workers, [&](int i) {
          const int one[1] = {i};
          free_space_direct(k, tpts, one, ssrc, all, v);
        });
        for (std::size_t i = 0; i < ti.size(); ++i) out[ti[i]] += v[i];
      }
      for (const auto& id : admissible_components(t, s, m.num_interfaces())) {
        const auto v = shared_mesh_sum(ctx, id, tpts, ssrc, tolerance);
        for (std::size_t i = 0; i < ti.size(); ++i) out[ti[i]] += v[i];
      }
    }
  }
  return out;
}

}  // namespace layerfmm::fmm
