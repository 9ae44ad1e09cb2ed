#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rslam/scan.hpp"
#include "rslam/se2.hpp"

namespace rslam {

struct Keypoint {
  Point2 position{0, 0};  // scan-local meters
  Point2 pixel{0, 0};     // raster (col, row), subpixel
  double scale = 1.0;     // detection scale, pixels
  double response = 0.0;
};

struct Descriptor {
  Eigen::VectorXf vector;  // L2-normalized
};

inline double descriptor_distance(const Descriptor& a, const Descriptor& b) {
  return double((a.vector - b.vector).norm());
}

struct Match {
  int query_index = -1;
  int train_index = -1;
  double distance = 0.0;
};

// One-to-one correspondences between two frames' keypoint sets.
struct MatchSet {
  std::vector<Match> pairs;
};

struct FrameFeatures {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;
};

struct DetectorParams {
  int octaves = 3;
  double response_threshold = 4e-4;
  int max_keypoints = 500;
};

namespace detail {

// Summed-area table with one row/column of zero padding.
class IntegralImage {
 public:
  explicit IntegralImage(const CartesianImage& img)
      : width_(img.width), sums_(size_t(img.width + 1) * (img.width + 1), 0.0) {
    const int w = img.width;
    for (int r = 0; r < w; ++r) {
      double row_sum = 0.0;
      const float* src = img.pixels.data() + size_t(r) * w;
      double* dst = sums_.data() + size_t(r + 1) * (w + 1);
      const double* prev = sums_.data() + size_t(r) * (w + 1);
      for (int c = 0; c < w; ++c) {
        row_sum += src[c];
        dst[c + 1] = prev[c + 1] + row_sum;
      }
    }
  }

  // Sum of the box with top-left (row, col) spanning rows x cols pixels.
  double box(int row, int col, int rows, int cols) const {
    const int r0 = row, c0 = col, r1 = row + rows, c1 = col + cols;
    const int stride = width_ + 1;
    return sums_[size_t(r1) * stride + c1] - sums_[size_t(r0) * stride + c1] -
           sums_[size_t(r1) * stride + c0] + sums_[size_t(r0) * stride + c0];
  }

 private:
  int width_;
  std::vector<double> sums_;
};

// Box-filter determinant of Hessian at one pixel for filter size `size`
// (odd multiple of 3). Classic SURF layout.
inline double hessian_response(const IntegralImage& ii, int r, int c,
                               int size) {
  const int b = (size - 1) / 2;
  const int l = size / 3;
  const double inv_area = 1.0 / (double(size) * size);
  const double dxx =
      ii.box(r - l + 1, c - b, 2 * l - 1, size) -
      3.0 * ii.box(r - l + 1, c - l / 2, 2 * l - 1, l);
  const double dyy =
      ii.box(r - b, c - l + 1, size, 2 * l - 1) -
      3.0 * ii.box(r - l / 2, c - l + 1, l, 2 * l - 1);
  const double dxy = ii.box(r - l, c + 1, l, l) + ii.box(r + 1, c - l, l, l) -
                     ii.box(r - l, c - l, l, l) - ii.box(r + 1, c + 1, l, l);
  const double nxx = dxx * inv_area, nyy = dyy * inv_area,
               nxy = dxy * inv_area;
  return nxx * nyy - 0.81 * nxy * nxy;
}

struct ResponseMap {
  int size = 0;  // filter size
  int step = 0;  // sampling step in pixels
  int grid = 0;  // samples per side
  int margin = 0;
  std::vector<float> values;

  float at(int i, int j) const { return values[size_t(i) * grid + j]; }
};

inline ResponseMap build_response_map(const IntegralImage& ii, int width,
                                      int size, int step) {
  ResponseMap map;
  map.size = size;
  map.step = step;
  map.margin = size / 2 + 1;
  map.grid = width / step;
  map.values.assign(size_t(map.grid) * map.grid, 0.f);
  for (int i = 0; i < map.grid; ++i) {
    const int r = i * step;
    if (r < map.margin || r >= width - map.margin) continue;
    float* out = map.values.data() + size_t(i) * map.grid;
    for (int j = 0; j < map.grid; ++j) {
      const int c = j * step;
      if (c < map.margin || c >= width - map.margin) continue;
      out[j] = float(hessian_response(ii, r, c, size));
    }
  }
  return map;
}

}  // namespace detail

// Multi-scale blob detector on the Cartesian raster plus a 4x4 grid
// descriptor of gradient-orientation histograms sampled over a
// scale-proportional patch. Deterministic for a fixed image; keypoints come
// back sorted by response, capped at max_keypoints.
inline FrameFeatures detect(const CartesianImage& img, int max_keypoints,
                            const DetectorParams& params = {}) {
  static constexpr int kSizes[3][4] = {
      {9, 15, 21, 27}, {15, 27, 39, 51}, {27, 51, 75, 99}};

  FrameFeatures out;
  if (img.width < 32) return out;
  detail::IntegralImage ii(img);

  struct Candidate {
    double col, row, scale, response;
  };
  std::vector<Candidate> candidates;

  const int octaves = std::clamp(params.octaves, 1, 3);
  for (int o = 0; o < octaves; ++o) {
    const int step = 1 << o;
    detail::ResponseMap maps[4];
    for (int s = 0; s < 4; ++s)
      maps[s] = detail::build_response_map(ii, img.width, kSizes[o][s], step);
    const int grid = maps[0].grid;
    const int max_margin = (kSizes[o][3] / 2 + 1) / step + 1;
    // the bottom layer is a candidate layer too: radar blobs are often
    // barely above pixel scale and would otherwise only leave ring artifacts
    for (int s = 0; s <= 2; ++s) {
      const detail::ResponseMap* m0 = s > 0 ? &maps[s - 1] : nullptr;
      const detail::ResponseMap& m1 = maps[s];
      const detail::ResponseMap& m2 = maps[s + 1];
      for (int i = max_margin; i < grid - max_margin; ++i) {
        for (int j = max_margin; j < grid - max_margin; ++j) {
          const float v = m1.at(i, j);
          if (v <= params.response_threshold) continue;
          bool is_max = true;
          for (int di = -1; di <= 1 && is_max; ++di)
            for (int dj = -1; dj <= 1 && is_max; ++dj) {
              if (m0 && m0->at(i + di, j + dj) >= v) is_max = false;
              if (m2.at(i + di, j + dj) >= v) is_max = false;
              if ((di || dj) && m1.at(i + di, j + dj) >= v) is_max = false;
            }
          if (!is_max) continue;

          // quadratic sub-pixel refinement in the image plane
          const double dx = 0.5 * (m1.at(i, j + 1) - m1.at(i, j - 1));
          const double dy = 0.5 * (m1.at(i + 1, j) - m1.at(i - 1, j));
          const double dxx = m1.at(i, j + 1) + m1.at(i, j - 1) - 2.0 * v;
          const double dyy = m1.at(i + 1, j) + m1.at(i - 1, j) - 2.0 * v;
          const double dxy = 0.25 * (m1.at(i + 1, j + 1) - m1.at(i + 1, j - 1) -
                                     m1.at(i - 1, j + 1) + m1.at(i - 1, j - 1));
          const double det = dxx * dyy - dxy * dxy;
          double ox = 0.0, oy = 0.0;
          if (std::abs(det) > 1e-20) {
            ox = -(dyy * dx - dxy * dy) / det;
            oy = -(dxx * dy - dxy * dx) / det;
            if (std::abs(ox) > 1.0 || std::abs(oy) > 1.0) ox = oy = 0.0;
          }
          // 1-d parabola across scale where both brackets exist
          double size = kSizes[o][s];
          if (m0) {
            const double r0 = m0->at(i, j), r2 = m2.at(i, j);
            const double denom = r0 - 2.0 * v + r2;
            if (std::abs(denom) > 1e-20) {
              const double os = std::clamp(-0.5 * (r2 - r0) / denom, -1.0, 1.0);
              size += os * (os >= 0 ? kSizes[o][s + 1] - kSizes[o][s]
                                    : kSizes[o][s] - kSizes[o][s - 1]);
            }
          }
          candidates.push_back({(j + ox) * step, (i + oy) * step,
                                1.2 * size / 9.0, double(v)});
        }
      }
    }
  }

  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.response != b.response) return a.response > b.response;
              if (a.row != b.row) return a.row < b.row;
              return a.col < b.col;
            });

  // octaves share filter sizes, so suppress near-duplicates across them
  std::vector<Candidate> unique;
  for (const Candidate& c : candidates) {
    bool duplicate = false;
    for (const Candidate& u : unique) {
      const double dc = u.col - c.col, dr = u.row - c.row;
      const double scale_ratio = std::max(u.scale, c.scale) /
                                 std::min(u.scale, c.scale);
      if (dc * dc + dr * dr < 4.0 && scale_ratio < 1.3) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) unique.push_back(c);
    if (int(unique.size()) >= max_keypoints) break;
  }
  candidates = std::move(unique);

  // Brightness mean-shift around each detection. The quadratic fit on box
  // responses quantizes at a tenth of a pixel; the intensity centroid of the
  // blob itself localizes an order of magnitude tighter, which the
  // frame-to-keyframe alignment accuracy directly inherits.
  for (Candidate& c : candidates) {
    const double radius = std::clamp(2.5 * c.scale, 6.0, 12.0);
    double cx = c.col, cy = c.row;
    for (int pass = 0; pass < 3; ++pass) {
      const int x0 = std::max(0, int(std::floor(cx - radius)));
      const int x1 = std::min(img.width - 1, int(std::ceil(cx + radius)));
      const int y0 = std::max(0, int(std::floor(cy - radius)));
      const int y1 = std::min(img.width - 1, int(std::ceil(cy + radius)));
      // border mean as the local background level
      double edge_sum = 0;
      int edge_n = 0;
      for (int x = x0; x <= x1; ++x) {
        edge_sum += img.at(x, y0) + img.at(x, y1);
        edge_n += 2;
      }
      for (int y = y0 + 1; y < y1; ++y) {
        edge_sum += img.at(x0, y) + img.at(x1, y);
        edge_n += 2;
      }
      const double background = edge_n ? edge_sum / edge_n : 0.0;
      double wsum = 0, wx = 0, wy = 0;
      const double r2 = radius * radius;
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          const double dx = x - cx, dy = y - cy;
          if (dx * dx + dy * dy > r2) continue;
          const double w = std::max(0.0, double(img.at(x, y)) - background);
          wsum += w;
          wx += w * x;
          wy += w * y;
        }
      if (wsum <= 1e-9) break;
      cx = wx / wsum;
      cy = wy / wsum;
    }
    const double shift = std::hypot(cx - c.col, cy - c.row);
    if (shift <= 2.0) {
      c.col = cx;
      c.row = cy;
    }
  }

  out.keypoints.reserve(candidates.size());
  out.descriptors.reserve(candidates.size());
  for (const Candidate& c : candidates) {
    Keypoint kp;
    kp.pixel = {c.col, c.row};
    kp.position = pixel_to_local(kp.pixel, img);
    kp.scale = c.scale;
    kp.response = c.response;

    // 16x16 samples spaced by the detection scale, 4x4 cells of 8
    // orientation bins, soft-assigned, Gaussian-windowed.
    Eigen::VectorXf desc = Eigen::VectorXf::Zero(128);
    const double s = kp.scale;
    const double window_sigma = 8.0 * s;
    for (int iy = 0; iy < 16; ++iy) {
      const double v = (iy - 7.5) * s;
      for (int ix = 0; ix < 16; ++ix) {
        const double u = (ix - 7.5) * s;
        const double px = c.col + u, py = c.row + v;
        const double gx =
            (img.sample(px + s, py) - img.sample(px - s, py)) / (2.0 * s);
        const double gy =
            (img.sample(px, py + s) - img.sample(px, py - s)) / (2.0 * s);
        const double mag = std::hypot(gx, gy);
        if (mag < 1e-12) continue;
        const double w =
            mag * std::exp(-(u * u + v * v) / (2.0 * window_sigma * window_sigma));
        double phi = std::atan2(gy, gx);
        if (phi < 0) phi += 2.0 * M_PI;
        const double ob = phi * 8.0 / (2.0 * M_PI);
        const double cx = u / (4.0 * s) + 1.5;  // continuous cell coords
        const double cy = v / (4.0 * s) + 1.5;
        const int cx0 = int(std::floor(cx)), cy0 = int(std::floor(cy));
        const int ob0 = int(std::floor(ob)) % 8;
        const double fx = cx - cx0, fy = cy - cy0, fo = ob - std::floor(ob);
        for (int a = 0; a < 2; ++a) {
          const int cxa = cx0 + a;
          if (cxa < 0 || cxa > 3) continue;
          const double wa = a ? fx : 1.0 - fx;
          for (int b = 0; b < 2; ++b) {
            const int cyb = cy0 + b;
            if (cyb < 0 || cyb > 3) continue;
            const double wb = b ? fy : 1.0 - fy;
            for (int e = 0; e < 2; ++e) {
              const int obe = (ob0 + e) % 8;
              const double we = e ? fo : 1.0 - fo;
              desc[(cyb * 4 + cxa) * 8 + obe] += float(w * wa * wb * we);
            }
          }
        }
      }
    }
    const float norm = desc.norm();
    if (norm > 1e-12f) {
      desc /= norm;
      // clamp large entries and renormalize; standard illumination guard
      desc = desc.cwiseMin(0.25f);
      desc /= desc.norm();
    } else {
      desc.setConstant(1.f / std::sqrt(128.f));
    }
    out.keypoints.push_back(kp);
    out.descriptors.push_back({std::move(desc)});
  }
  return out;
}

struct MatchParams {
  double ratio = 0.8;  // Lowe ratio threshold
};

// Motion-prior gated descriptor matching: candidates for a query keypoint
// are train keypoints within `radius` meters of its scan-local position; the
// best candidate must pass the ratio test, and the surviving pairs are
// deduplicated one-to-one greedily by ascending descriptor distance.
inline MatchSet match_gated(const FrameFeatures& query,
                            const FrameFeatures& train, double radius,
                            const MatchParams& params = {}) {
  if (radius <= 0) throw std::invalid_argument("match_gated: radius <= 0");
  MatchSet out;
  const double radius_sq = radius * radius;

  std::vector<Match> accepted;
  for (int qi = 0; qi < int(query.keypoints.size()); ++qi) {
    const Point2& qp = query.keypoints[qi].position;
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    double second_d = best_d;
    for (int ti = 0; ti < int(train.keypoints.size()); ++ti) {
      if ((train.keypoints[ti].position - qp).squaredNorm() > radius_sq)
        continue;
      const double d =
          descriptor_distance(query.descriptors[qi], train.descriptors[ti]);
      if (d < best_d) {
        second_d = best_d;
        best_d = d;
        best = ti;
      } else if (d < second_d) {
        second_d = d;
      }
    }
    if (best < 0) continue;
    if (std::isfinite(second_d) && best_d >= params.ratio * second_d) continue;
    accepted.push_back({qi, best, best_d});
  }

  std::sort(accepted.begin(), accepted.end(), [](const Match& a, const Match& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.query_index < b.query_index;
  });
  std::vector<char> query_used(query.keypoints.size(), 0);
  std::vector<char> train_used(train.keypoints.size(), 0);
  for (const Match& m : accepted) {
    if (query_used[m.query_index] || train_used[m.train_index]) continue;
    query_used[m.query_index] = train_used[m.train_index] = 1;
    out.pairs.push_back(m);
  }
  return out;
}

}  // namespace rslam
