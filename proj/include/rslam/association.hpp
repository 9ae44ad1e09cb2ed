#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rslam/features.hpp"
#include "rslam/se2.hpp"

namespace rslam {

// Boolean pairwise-consistency graph over match pairs, adjacency stored as
// bitset rows. Symmetric, zero diagonal.
struct ConsistencyGraph {
  int num_vertices = 0;
  int words_per_row = 0;
  double delta_c = 0.5;
  std::vector<uint64_t> adjacency;

  explicit ConsistencyGraph(int n = 0, double delta = 0.5)
      : num_vertices(n),
        words_per_row((n + 63) / 64),
        delta_c(delta),
        adjacency(size_t(n) * ((n + 63) / 64), 0) {}

  void add_edge(int i, int j) {
    adjacency[size_t(i) * words_per_row + j / 64] |= uint64_t(1) << (j % 64);
    adjacency[size_t(j) * words_per_row + i / 64] |= uint64_t(1) << (i % 64);
  }
  bool has_edge(int i, int j) const {
    return adjacency[size_t(i) * words_per_row + j / 64] >>
               (j % 64) & 1;
  }
  const uint64_t* row(int i) const {
    return adjacency.data() + size_t(i) * words_per_row;
  }
  int degree(int i) const {
    int d = 0;
    for (int w = 0; w < words_per_row; ++w) d += std::popcount(row(i)[w]);
    return d;
  }
};

struct ConsistencyGates {
  // |  ||P_t^i - P_k^i||  -  ||P_t^j - P_k^j||  | < delta_c
  bool displacement_gate = true;
  // |  ||P_t^i - P_t^j||  -  ||P_k^i - P_k^j||  | < delta_c
  bool length_gate = true;
};

// Edge (i, j) present iff the enabled gates all pass. The displacement gate
// compares per-match displacement magnitudes; the length-preservation gate is
// the classic rigidity test and is strictly safer, so both default on.
inline ConsistencyGraph build_graph(const MatchSet& matches,
                                    const std::vector<Keypoint>& kps_t,
                                    const std::vector<Keypoint>& kps_k,
                                    double delta_c,
                                    const ConsistencyGates& gates = {}) {
  if (delta_c <= 0) throw std::invalid_argument("build_graph: delta_c <= 0");
  const int n = int(matches.pairs.size());
  ConsistencyGraph g(n, delta_c);
  std::vector<Point2> pt(n), pk(n);
  std::vector<double> displacement(n);
  for (int i = 0; i < n; ++i) {
    pt[i] = kps_t[matches.pairs[i].query_index].position;
    pk[i] = kps_k[matches.pairs[i].train_index].position;
    displacement[i] = (pt[i] - pk[i]).norm();
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (gates.displacement_gate &&
          std::abs(displacement[i] - displacement[j]) >= delta_c)
        continue;
      if (gates.length_gate &&
          std::abs((pt[i] - pt[j]).norm() - (pk[i] - pk[j]).norm()) >= delta_c)
        continue;
      g.add_edge(i, j);
    }
  }
  return g;
}

struct MaxCliqueParams {
  int exact_limit = 600;        // Bron-Kerbosch up to this many vertices
  uint64_t node_budget = 20'000'000;  // recursion budget before greedy fallback
};

namespace detail {

class BitSet {
 public:
  BitSet() = default;
  BitSet(int words) : words_(words, 0) {}

  void set(int i) { words_[i / 64] |= uint64_t(1) << (i % 64); }
  void clear(int i) { words_[i / 64] &= ~(uint64_t(1) << (i % 64)); }
  bool test(int i) const { return words_[i / 64] >> (i % 64) & 1; }
  bool empty() const {
    for (uint64_t w : words_)
      if (w) return false;
    return true;
  }
  int count() const {
    int c = 0;
    for (uint64_t w : words_) c += std::popcount(w);
    return c;
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (size_t wi = 0; wi < words_.size(); ++wi) {
      uint64_t w = words_[wi];
      while (w) {
        fn(int(wi * 64 + std::countr_zero(w)));
        w &= w - 1;
      }
    }
  }
  void intersect_with(const uint64_t* row) {
    for (size_t wi = 0; wi < words_.size(); ++wi) words_[wi] &= row[wi];
  }
  int count_intersection(const uint64_t* row) const {
    int c = 0;
    for (size_t wi = 0; wi < words_.size(); ++wi)
      c += std::popcount(words_[wi] & row[wi]);
    return c;
  }

  std::vector<uint64_t> words_;
};

class CliqueSearch {
 public:
  CliqueSearch(const ConsistencyGraph& g, uint64_t budget)
      : g_(g), budget_(budget) {}

  // Returns false if the node budget ran out before the search finished.
  bool run(std::vector<int>& best) {
    const int n = g_.num_vertices;
    BitSet p(g_.words_per_row), x(g_.words_per_row);
    for (int i = 0; i < n; ++i) p.set(i);
    std::vector<int> r;
    expand(r, p, x);
    best = best_;
    return !aborted_;
  }

 private:
  void report(const std::vector<int>& r) {
    std::vector<int> sorted = r;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.size() > best_.size() ||
        (sorted.size() == best_.size() &&
         std::lexicographical_compare(sorted.begin(), sorted.end(),
                                      best_.begin(), best_.end())))
      best_ = std::move(sorted);
  }

  void expand(std::vector<int>& r, BitSet& p, BitSet& x) {
    if (aborted_ || ++nodes_ > budget_) {
      aborted_ = true;
      return;
    }
    if (p.empty() && x.empty()) {
      report(r);
      return;
    }
    if (r.size() + size_t(p.count()) < best_.size()) return;

    // pivot on the vertex covering most of P
    int pivot = -1, pivot_cover = -1;
    auto consider = [&](int u) {
      const int cover = p.count_intersection(g_.row(u));
      if (cover > pivot_cover) {
        pivot_cover = cover;
        pivot = u;
      }
    };
    p.for_each(consider);
    x.for_each(consider);

    std::vector<int> ext;
    p.for_each([&](int v) {
      if (pivot < 0 || !g_.has_edge(pivot, v) || pivot == v) ext.push_back(v);
    });
    for (int v : ext) {
      if (aborted_) return;
      BitSet np = p, nx = x;
      np.intersect_with(g_.row(v));
      nx.intersect_with(g_.row(v));
      r.push_back(v);
      expand(r, np, nx);
      r.pop_back();
      p.clear(v);
      x.set(v);
    }
  }

  const ConsistencyGraph& g_;
  uint64_t budget_;
  uint64_t nodes_ = 0;
  bool aborted_ = false;
  std::vector<int> best_;
};

// Greedy multi-seed clique with a drop-one/add-many refinement pass.
inline std::vector<int> greedy_clique(const ConsistencyGraph& g) {
  const int n = g.num_vertices;
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const int da = g.degree(a), db = g.degree(b);
    if (da != db) return da > db;
    return a < b;
  });

  std::vector<int> best;
  const int seeds = std::min(n, 64);
  for (int si = 0; si < seeds; ++si) {
    std::vector<int> clique{order[si]};
    BitSet cand(g.words_per_row);
    for (int i = 0; i < n; ++i)
      if (g.has_edge(order[si], i)) cand.set(i);
    while (!cand.empty()) {
      int pick = -1, pick_cover = -1;
      cand.for_each([&](int v) {
        const int cover = cand.count_intersection(g.row(v));
        if (cover > pick_cover) {
          pick_cover = cover;
          pick = v;
        }
      });
      clique.push_back(pick);
      cand.clear(pick);
      cand.intersect_with(g.row(pick));
    }
    std::sort(clique.begin(), clique.end());
    if (clique.size() > best.size() ||
        (clique.size() == best.size() &&
         std::lexicographical_compare(clique.begin(), clique.end(),
                                      best.begin(), best.end())))
      best = std::move(clique);
  }

  // local refinement: try swapping one member out for two outsiders
  bool improved = true;
  while (improved && !best.empty()) {
    improved = false;
    for (size_t drop = 0; drop < best.size() && !improved; ++drop) {
      std::vector<int> trial;
      for (size_t i = 0; i < best.size(); ++i)
        if (i != drop) trial.push_back(best[i]);
      std::vector<int> addable;
      for (int v = 0; v < n; ++v) {
        if (std::find(trial.begin(), trial.end(), v) != trial.end()) continue;
        bool ok = true;
        for (int u : trial)
          if (!g.has_edge(u, v)) {
            ok = false;
            break;
          }
        if (ok) addable.push_back(v);
      }
      // greedily pack mutually adjacent additions
      std::vector<int> added;
      for (int v : addable) {
        bool ok = true;
        for (int u : added)
          if (!g.has_edge(u, v)) {
            ok = false;
            break;
          }
        if (ok) added.push_back(v);
      }
      if (trial.size() + added.size() > best.size()) {
        trial.insert(trial.end(), added.begin(), added.end());
        std::sort(trial.begin(), trial.end());
        best = std::move(trial);
        improved = true;
      }
    }
  }
  return best;
}

}  // namespace detail

// A maximum clique of the consistency graph; exact Bron-Kerbosch with
// pivoting up to params.exact_limit vertices (budgeted), greedy with local
// refinement beyond. Ties break to the lexicographically smallest vertex set.
inline std::vector<int> max_clique(const ConsistencyGraph& g,
                                   const MaxCliqueParams& params = {}) {
  if (g.num_vertices == 0) return {};
  if (g.num_vertices <= params.exact_limit) {
    detail::CliqueSearch search(g, params.node_budget);
    std::vector<int> best;
    if (search.run(best)) return best;
    std::vector<int> greedy = detail::greedy_clique(g);
    return greedy.size() > best.size() ? greedy : best;
  }
  return detail::greedy_clique(g);
}

// Least-squares rigid transform q_k ~= R q_t + t over point pairs; the
// returned pose maps frame-t coordinates into frame k. Kabsch with the
// determinant correction, so the result is always a proper rotation.
inline std::optional<Pose2> estimate_se2_svd(
    std::span<const std::pair<Point2, Point2>> pairs) {
  if (pairs.size() < 2) return std::nullopt;
  Point2 ct = Point2::Zero(), ck = Point2::Zero();
  for (const auto& [t, k] : pairs) {
    ct += t;
    ck += k;
  }
  ct /= double(pairs.size());
  ck /= double(pairs.size());

  Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
  for (const auto& [t, k] : pairs) h += (t - ct) * (k - ck).transpose();

  Eigen::JacobiSVD<Eigen::Matrix2d> svd(
      h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues()(0) < 1e-12) return std::nullopt;  // all coincident
  const Eigen::Matrix2d u = svd.matrixU(), v = svd.matrixV();
  Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
  d(1, 1) = (v * u.transpose()).determinant() > 0 ? 1.0 : -1.0;
  const Eigen::Matrix2d r = v * d * u.transpose();
  const Point2 t = ck - r * ct;
  return Pose2(std::atan2(r(1, 0), r(0, 0)), t.x(), t.y());
}

inline std::optional<Pose2> estimate_se2_svd(
    const std::vector<std::pair<Point2, Point2>>& pairs) {
  return estimate_se2_svd(
      std::span<const std::pair<Point2, Point2>>(pairs.data(), pairs.size()));
}

}  // namespace rslam
