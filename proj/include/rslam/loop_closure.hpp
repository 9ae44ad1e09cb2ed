#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "rslam/association.hpp"
#include "rslam/grid_index.hpp"
#include "rslam/pointcloud.hpp"
#include "rslam/rng.hpp"
#include "rslam/se2.hpp"

namespace rslam {

struct DescriptorParams {
  int rings = 8;
  int sectors = 16;
  double max_radius = 100.0;  // meters, outer points clamp into the last ring
  int min_points = 10;
};

// Rotation- and translation-invariant scene signature: the cloud is centroid
// centered, rotated into its principal frame (sign fixed by the half-plane
// with more points), binned into a ring x sector occupancy matrix, and
// summarized by the first left and right singular vectors. Exactly symmetric
// clouds keep the flipped variant as an alternate.
struct SceneDescriptor {
  Eigen::VectorXd vector;
  std::optional<Eigen::VectorXd> alternate;
  double align_angle = 0.0;  // rotation taking the cloud into canonical axes
  Point2 centroid{0, 0};
};

inline double descriptor_distance(const SceneDescriptor& a,
                                  const SceneDescriptor& b) {
  double best = (a.vector - b.vector).norm();
  if (a.alternate) best = std::min(best, (*a.alternate - b.vector).norm());
  if (b.alternate) best = std::min(best, (a.vector - *b.alternate).norm());
  if (a.alternate && b.alternate)
    best = std::min(best, (*a.alternate - *b.alternate).norm());
  return best;
}

namespace detail {

inline Eigen::VectorXd signature_vector(const std::vector<Point2>& centered,
                                        double align, const DescriptorParams& p) {
  Eigen::MatrixXd signature = Eigen::MatrixXd::Zero(p.rings, p.sectors);
  const double c = std::cos(-align), s = std::sin(-align);
  for (const Point2& q : centered) {
    const double x = c * q.x() - s * q.y();
    const double y = s * q.x() + c * q.y();
    const double rho = std::hypot(x, y);
    int ring = int(rho / (p.max_radius / p.rings));
    ring = std::min(ring, p.rings - 1);
    double phi = std::atan2(y, x);
    if (phi < 0) phi += 2.0 * M_PI;
    int sector = int(phi / (2.0 * M_PI / p.sectors));
    sector = std::min(sector, p.sectors - 1);
    signature(ring, sector) += 1.0;
  }
  signature /= double(centered.size());

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      signature, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd u = svd.matrixU().col(0);
  Eigen::VectorXd v = svd.matrixV().col(0);
  auto canonicalize = [](Eigen::VectorXd& w) {
    int arg = 0;
    for (int i = 1; i < w.size(); ++i)
      if (std::abs(w[i]) > std::abs(w[arg])) arg = i;
    if (w[arg] < 0) w = -w;
  };
  canonicalize(u);
  canonicalize(v);
  Eigen::VectorXd out(u.size() + v.size());
  out << u, v;
  out.normalize();
  return out;
}

}  // namespace detail

inline std::optional<SceneDescriptor> describe(const RadarPointCloud& cloud,
                                               const DescriptorParams& params = {}) {
  if (int(cloud.points.size()) < params.min_points) return std::nullopt;

  SceneDescriptor desc;
  Point2 centroid = Point2::Zero();
  for (const Point2& p : cloud.points) centroid += p;
  centroid /= double(cloud.points.size());
  desc.centroid = centroid;

  std::vector<Point2> centered;
  centered.reserve(cloud.points.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const Point2& p : cloud.points) {
    const Point2 q = p - centroid;
    centered.push_back(q);
    cov += q * q.transpose();
  }
  cov /= double(centered.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eigen(cov);
  const Eigen::Vector2d axis = eigen.eigenvectors().col(1);  // largest
  double align = std::atan2(axis.y(), axis.x());

  // point-mass vote on the canonical +x half-plane
  int positive = 0, negative = 0;
  const double ca = std::cos(-align), sa = std::sin(-align);
  for (const Point2& q : centered) {
    const double x = ca * q.x() - sa * q.y();
    if (x > 0)
      ++positive;
    else if (x < 0)
      ++negative;
  }
  if (negative > positive) align = wrap_angle(align + M_PI);
  desc.align_angle = align;
  desc.vector = detail::signature_vector(centered, align, params);
  if (positive == negative)
    desc.alternate =
        detail::signature_vector(centered, wrap_angle(align + M_PI), params);
  return desc;
}

struct LoopCandidate {
  int64_t query_id = -1;
  int64_t match_id = -1;
  double descriptor_distance = 0.0;
  std::optional<Pose2> relative;  // maps query-cloud coords into match-cloud frame
  double inlier_fraction = 0.0;
};

struct QueryParams {
  int k = 6;                  // candidates returned; ICP arbitrates
  int temporal_guard = 50;    // recent keyframes excluded
  double max_distance = 0.25; // descriptor distance acceptance
};

// Keyframe descriptor store with linear k-nearest retrieval; the scale of a
// session (thousands of keyframes) does not need anything smarter.
class DescriptorDatabase {
 public:
  void insert(int64_t keyframe_id, SceneDescriptor descriptor) {
    entries_.emplace(keyframe_id, std::move(descriptor));
  }

  const SceneDescriptor* find(int64_t keyframe_id) const {
    auto it = entries_.find(keyframe_id);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::vector<LoopCandidate> query(const SceneDescriptor& q, int64_t query_id,
                                   const QueryParams& params = {}) const {
    std::vector<LoopCandidate> out;
    for (const auto& [id, desc] : entries_) {
      if (id >= query_id - params.temporal_guard) continue;
      LoopCandidate cand;
      cand.query_id = query_id;
      cand.match_id = id;
      cand.descriptor_distance = descriptor_distance(q, desc);
      out.push_back(cand);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      if (a.descriptor_distance != b.descriptor_distance)
        return a.descriptor_distance < b.descriptor_distance;
      return a.match_id < b.match_id;
    });
    if (int(out.size()) > params.k) out.resize(params.k);
    std::erase_if(out, [&](const LoopCandidate& c) {
      return c.descriptor_distance >= params.max_distance;
    });
    return out;
  }

  size_t size() const { return entries_.size(); }

 private:
  std::map<int64_t, SceneDescriptor> entries_;
};

struct IcpParams {
  int ransac_iterations = 200;
  double ransac_consensus_radius = 1.0;  // meters
  double min_sample_separation = 1.0;
  int max_iterations = 50;
  double convergence_tolerance = 1e-6;  // mean residual change, meters
  double inlier_radius = 1.0;
  double min_inlier_fraction = 0.35;
  double max_mean_inlier_residual = 0.5;
  uint64_t seed = 7;
  bool try_flipped_init = true;  // hedge against the pi ambiguity of the init
};

struct IcpResult {
  Pose2 transform;  // maps query-cloud coords into the match-cloud frame
  double inlier_fraction = 0.0;
  double mean_inlier_residual = 0.0;
  std::vector<double> residual_history;  // mean NN residual per iteration
};

// Geometric loop verification: RANSAC over two-point samples associated by
// proximity under the init guess, then point-to-point ICP from the best
// hypothesis. Fails when the consensus or the final inlier statistics do not
// clear the acceptance thresholds.
inline std::optional<IcpResult> verify_icp(const RadarPointCloud& cloud_q,
                                           const RadarPointCloud& cloud_m,
                                           const Pose2& init,
                                           const IcpParams& params = {}) {
  const int nq = int(cloud_q.points.size());
  if (nq < 10 || int(cloud_m.points.size()) < 10) return std::nullopt;
  const PointGrid grid(cloud_m.points, 2.0);

  std::vector<Pose2> inits{init};
  if (params.try_flipped_init) {
    // the same init rotated half a turn about the query centroid
    Point2 centroid = Point2::Zero();
    for (const Point2& p : cloud_q.points) centroid += p;
    centroid /= double(nq);
    inits.push_back(
        compose(init, Pose2(M_PI, 2 * centroid.x(), 2 * centroid.y())));
  }

  Rng rng(params.seed);
  Pose2 best_pose;
  int best_consensus = -1;
  for (int iter = 0; iter < params.ransac_iterations; ++iter) {
    const Pose2& guess = inits[iter % inits.size()];
    const int i = rng.uniform_int(nq);
    const int j = rng.uniform_int(nq);
    if (i == j) continue;
    const Point2& qi = cloud_q.points[i];
    const Point2& qj = cloud_q.points[j];
    if ((qi - qj).norm() < params.min_sample_separation) continue;
    double di = 0, dj = 0;
    const int mi = grid.nearest(transform_point(guess, qi), &di, 8.0);
    const int mj = grid.nearest(transform_point(guess, qj), &dj, 8.0);
    if (mi < 0 || mj < 0 || mi == mj) continue;
    const std::vector<std::pair<Point2, Point2>> sample{
        {qi, grid.point(mi)}, {qj, grid.point(mj)}};
    const auto hypothesis = estimate_se2_svd(sample);
    if (!hypothesis) continue;
    int consensus = 0;
    for (const Point2& q : cloud_q.points) {
      double d = 0;
      if (grid.nearest(transform_point(*hypothesis, q), &d,
                       params.ransac_consensus_radius) >= 0)
        ++consensus;
    }
    if (consensus > best_consensus) {
      best_consensus = consensus;
      best_pose = *hypothesis;
    }
  }
  if (best_consensus < std::max(5, nq / 20)) return std::nullopt;

  // point-to-point ICP seeded by the best hypothesis
  IcpResult result;
  Pose2 pose = best_pose;
  double previous_mean = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    std::vector<std::pair<Point2, Point2>> pairs;
    pairs.reserve(nq);
    double residual_sum = 0;
    for (const Point2& q : cloud_q.points) {
      double d = 0;
      const int m = grid.nearest(transform_point(pose, q), &d);
      if (m < 0) continue;
      pairs.push_back({q, grid.point(m)});
      residual_sum += d;
    }
    if (pairs.size() < 3) return std::nullopt;
    const double mean_residual = residual_sum / double(pairs.size());
    result.residual_history.push_back(mean_residual);
    if (std::abs(previous_mean - mean_residual) < params.convergence_tolerance)
      break;
    previous_mean = mean_residual;
    const auto update = estimate_se2_svd(pairs);
    if (!update) return std::nullopt;
    pose = *update;
  }

  int inliers = 0;
  double inlier_residual = 0;
  for (const Point2& q : cloud_q.points) {
    double d = 0;
    if (grid.nearest(transform_point(pose, q), &d, params.inlier_radius) >= 0) {
      ++inliers;
      inlier_residual += d;
    }
  }
  result.transform = pose;
  result.inlier_fraction = double(inliers) / double(nq);
  result.mean_inlier_residual = inliers ? inlier_residual / inliers : 1e9;
  if (result.inlier_fraction < params.min_inlier_fraction) return std::nullopt;
  if (result.mean_inlier_residual > params.max_mean_inlier_residual)
    return std::nullopt;
  return result;
}

}  // namespace rslam
