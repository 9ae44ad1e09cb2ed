#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include "rslam/se2.hpp"

namespace rslam {

// Uniform-grid nearest-neighbor index over a fixed point set. Queries expand
// ring by ring until the best candidate provably beats every unvisited cell.
class PointGrid {
 public:
  explicit PointGrid(const std::vector<Point2>& points, double cell = 2.0)
      : points_(points), cell_(cell) {
    for (int i = 0; i < int(points_.size()); ++i)
      cells_[key_of(points_[i])].push_back(i);
  }

  int size() const { return int(points_.size()); }
  const Point2& point(int i) const { return points_[i]; }

  // Index of the nearest point within max_radius, -1 if there is none.
  int nearest(const Point2& q, double* distance = nullptr,
              double max_radius = std::numeric_limits<double>::infinity()) const {
    if (points_.empty()) return -1;
    const int qx = int(std::floor(q.x() / cell_));
    const int qy = int(std::floor(q.y() / cell_));
    int best = -1;
    double best_d2 = max_radius < std::numeric_limits<double>::infinity()
                         ? max_radius * max_radius
                         : std::numeric_limits<double>::infinity();
    for (int ring = 0;; ++ring) {
      // cells at Chebyshev distance `ring` hold points no closer than
      // (ring - 1) * cell, so the search can stop once that bound is beaten
      const double bound = double(ring - 1) * cell_;
      if (bound > 0 && best_d2 <= bound * bound) break;
      for (int dx = -ring; dx <= ring; ++dx) {
        for (int dy = -ring; dy <= ring; ++dy) {
          if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
          auto it = cells_.find(pack(qx + dx, qy + dy));
          if (it == cells_.end()) continue;
          for (int idx : it->second) {
            const double d2 = (points_[idx] - q).squaredNorm();
            if (d2 < best_d2) {
              best_d2 = d2;
              best = idx;
            }
          }
        }
      }
    }
    if (best >= 0 && distance) *distance = std::sqrt(best_d2);
    return best;
  }

 private:
  int64_t key_of(const Point2& p) const {
    return pack(int(std::floor(p.x() / cell_)), int(std::floor(p.y() / cell_)));
  }
  static int64_t pack(int x, int y) {
    return (int64_t(x) << 32) ^ (int64_t(y) & 0xffffffffLL);
  }

  std::vector<Point2> points_;
  double cell_;
  std::unordered_map<int64_t, std::vector<int>> cells_;
};

}  // namespace rslam
