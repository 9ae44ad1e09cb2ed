#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "rslam/map.hpp"
#include "rslam/robust.hpp"
#include "rslam/se2.hpp"

namespace rslam {

struct FusionParams {
  double radius = 0.5;               // meters around the point's projection
  double descriptor_distance = 0.3;  // fuse below this, spawn otherwise
};

// Registers the keyframe's keypoints in the map: indices pre-associated by
// tracking gain an observation, the rest either fuse into a nearby existing
// point with a compatible descriptor or spawn a fresh landmark. Returns the
// spawned point ids.
inline std::vector<int64_t> create_map_points(Map& map, int64_t kf_id,
                                              const FusionParams& params = {}) {
  Keyframe& kf = map.keyframes.at(kf_id);
  std::vector<int64_t> spawned;
  for (size_t i = 0; i < kf.features.keypoints.size(); ++i) {
    const int64_t inherited = kf.point_ids[i];
    if (inherited >= 0) {
      if (map.points.count(inherited) &&
          map.add_observation(inherited, kf_id, int(i)))
        continue;
      // culled in the meantime, or another keypoint of this keyframe
      // already claimed the point; treat as unmatched
      kf.point_ids[i] = -1;
    }
    const Point2 world = transform_point(kf.pose, kf.features.keypoints[i].position);

    int64_t fuse_id = -1;
    double fuse_dist = params.descriptor_distance;
    for (const auto& [pid, mp] : map.points) {
      if ((mp.position - world).norm() > params.radius) continue;
      bool seen_here = false;
      for (const auto& [okf, oidx] : mp.observations) seen_here |= okf == kf_id;
      if (seen_here) continue;
      const double d = descriptor_distance(mp.descriptor, kf.features.descriptors[i]);
      if (d < fuse_dist) {
        fuse_dist = d;
        fuse_id = pid;
      }
    }
    if (fuse_id >= 0) {
      map.add_observation(fuse_id, kf_id, int(i));
    } else {
      spawned.push_back(map.spawn_point(kf_id, int(i), world,
                                        kf.features.descriptors[i]));
    }
  }
  return spawned;
}

// Points created by `target_kf` that never gathered more than two keyframe
// observations are dropped once two newer keyframes exist.
inline std::vector<int64_t> cull_map_points(Map& map, int64_t target_kf) {
  int newer = 0;
  for (const auto& [id, kf] : map.keyframes) newer += id > target_kf;
  if (newer < 2) return {};
  std::vector<int64_t> removed;
  for (const auto& [pid, mp] : map.points)
    if (mp.creator_id == target_kf && mp.observations.size() <= 2)
      removed.push_back(pid);
  for (int64_t pid : removed) map.remove_point(pid);
  return removed;
}

struct BaParams {
  int window = 5;                // covisibility-nearest keyframes
  double sigma = 0.5;            // isotropic measurement noise, meters
  double huber_delta = 1.0;      // meters
  int max_iterations = 50;
  double rel_tolerance = 1e-9;
};

struct BaSummary {
  bool ran = false;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  int optimized_keyframes = 0;
  int optimized_points = 0;
};

namespace detail {

// Residual of one landmark observation: measured scan-local position minus
// the world point expressed in the keyframe frame.
inline void observation_residual(const Pose2& kf_pose, const Point2& point_w,
                                 const Point2& measured_local,
                                 Eigen::Vector2d* residual,
                                 Eigen::Matrix<double, 2, 3>* j_pose,
                                 Eigen::Matrix2d* j_point) {
  const double c = std::cos(kf_pose.theta), s = std::sin(kf_pose.theta);
  Eigen::Matrix2d r_inv;
  r_inv << c, s, -s, c;  // R(-theta)
  const Point2 delta = point_w - kf_pose.translation();
  const Point2 predicted = r_inv * delta;
  *residual = measured_local - predicted;
  if (j_point) *j_point = -r_inv;
  if (j_pose) {
    Eigen::Matrix2d dr;  // d/dtheta R(-theta)
    dr << -s, c, -c, -s;
    j_pose->col(0) = -(dr * delta);
    j_pose->block<2, 2>(0, 1) = r_inv;
  }
}

}  // namespace detail

// Levenberg-Marquardt over the window's keyframe poses and their observed
// map points, minimizing the weighted reprojection error with a Huber kernel.
// Out-of-window observers act as fixed anchors; the oldest in-window keyframe
// stays fixed to pin the gauge. Sparse structure handled by eliminating the
// point blocks (Schur complement).
inline BaSummary local_bundle_adjust(Map& map, int64_t center_kf,
                                     const BaParams& params = {}) {
  BaSummary summary;
  if (!map.keyframes.count(center_kf) || params.window < 1) return summary;

  std::vector<int64_t> window{center_kf};
  for (int64_t id : map.covisible_keyframes(center_kf)) {
    if (int(window.size()) >= params.window) break;
    window.push_back(id);
  }
  std::sort(window.begin(), window.end());

  // points observed from the window, plus their out-of-window anchors
  std::set<int64_t> window_set(window.begin(), window.end());
  std::set<int64_t> point_set;
  for (int64_t kf_id : window)
    for (int64_t pid : map.keyframes.at(kf_id).point_ids)
      if (pid >= 0) point_set.insert(pid);
  if (point_set.empty()) return summary;

  const int64_t gauge_kf = window.front();  // oldest in-window
  std::map<int64_t, int> pose_index;        // optimizable poses only
  for (int64_t kf_id : window)
    if (kf_id != gauge_kf) pose_index.emplace(kf_id, int(pose_index.size()));
  if (pose_index.empty()) return summary;

  struct Observation {
    int pose = -1;  // -1 when the observing keyframe is fixed
    int point = 0;
    int64_t kf_id = 0;
    Point2 measured{0, 0};
  };
  std::map<int64_t, int> point_index;
  std::vector<int64_t> point_ids;
  for (int64_t pid : point_set) {
    point_index.emplace(pid, int(point_ids.size()));
    point_ids.push_back(pid);
  }
  std::vector<Observation> observations;
  for (int64_t pid : point_ids)
    for (const auto& [kf_id, kp_idx] : map.points.at(pid).observations) {
      Observation obs;
      obs.pose = pose_index.count(kf_id) ? pose_index.at(kf_id) : -1;
      obs.point = point_index.at(pid);
      obs.kf_id = kf_id;
      obs.measured = map.keyframes.at(kf_id).features.keypoints[kp_idx].position;
      observations.push_back(obs);
    }

  const int num_poses = int(pose_index.size());
  const int num_points = int(point_ids.size());
  std::vector<Pose2> poses(num_poses);
  for (const auto& [kf_id, idx] : pose_index) poses[idx] = map.keyframes.at(kf_id).pose;
  std::vector<Point2> positions(num_points);
  for (int i = 0; i < num_points; ++i) positions[i] = map.points.at(point_ids[i]).position;

  const double info = 1.0 / (params.sigma * params.sigma);
  auto pose_of = [&](const Observation& obs, const std::vector<Pose2>& p) {
    return obs.pose >= 0 ? p[obs.pose] : map.keyframes.at(obs.kf_id).pose;
  };
  auto total_cost = [&](const std::vector<Pose2>& p,
                        const std::vector<Point2>& x) {
    double cost = 0;
    Eigen::Vector2d r;
    for (const Observation& obs : observations) {
      detail::observation_residual(pose_of(obs, p), x[obs.point], obs.measured,
                                   &r, nullptr, nullptr);
      cost += info * huber_cost(r.norm(), params.huber_delta);
    }
    return cost;
  };

  double cost = total_cost(poses, positions);
  summary.ran = true;
  summary.initial_cost = cost;
  summary.optimized_keyframes = num_poses;
  summary.optimized_points = num_points;

  double lambda = 1e-6;
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    ++summary.iterations;
    const int pose_dim = 3 * num_poses;
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(pose_dim, pose_dim);
    Eigen::VectorXd b_pose = Eigen::VectorXd::Zero(pose_dim);
    std::vector<Eigen::Matrix2d> v(num_points, Eigen::Matrix2d::Zero());
    std::vector<Eigen::Vector2d> b_point(num_points, Eigen::Vector2d::Zero());
    // per point: the coupling blocks to each observing optimizable pose
    std::vector<std::vector<std::pair<int, Eigen::Matrix<double, 3, 2>>>> coupling(
        num_points);

    Eigen::Vector2d r;
    Eigen::Matrix<double, 2, 3> jf;
    Eigen::Matrix2d jp;
    for (const Observation& obs : observations) {
      detail::observation_residual(pose_of(obs, poses), positions[obs.point],
                                   obs.measured, &r,
                                   obs.pose >= 0 ? &jf : nullptr, &jp);
      const double w = info * huber_weight(r.norm(), params.huber_delta);
      v[obs.point] += w * jp.transpose() * jp;
      b_point[obs.point] -= w * jp.transpose() * r;
      if (obs.pose >= 0) {
        u.block<3, 3>(3 * obs.pose, 3 * obs.pose) += w * jf.transpose() * jf;
        b_pose.segment<3>(3 * obs.pose) -= w * jf.transpose() * r;
        coupling[obs.point].push_back({obs.pose, w * jf.transpose() * jp});
      }
    }

    // damp, then eliminate the point blocks
    for (int i = 0; i < pose_dim; ++i) u(i, i) += lambda * (u(i, i) + 1e-12);
    Eigen::MatrixXd s = u;
    Eigen::VectorXd rhs = b_pose;
    std::vector<Eigen::Matrix2d> v_inv(num_points);
    for (int p = 0; p < num_points; ++p) {
      Eigen::Matrix2d vp = v[p];
      vp(0, 0) += lambda * (vp(0, 0) + 1e-12);
      vp(1, 1) += lambda * (vp(1, 1) + 1e-12);
      v_inv[p] = vp.inverse();
      for (const auto& [fi, w_fp] : coupling[p]) {
        rhs.segment<3>(3 * fi) -= w_fp * v_inv[p] * b_point[p];
        for (const auto& [fj, w_fq] : coupling[p])
          s.block<3, 3>(3 * fi, 3 * fj) -=
              w_fp * v_inv[p] * w_fq.transpose();
      }
    }

    const Eigen::VectorXd delta_pose = s.ldlt().solve(rhs);
    std::vector<Pose2> new_poses = poses;
    for (int f = 0; f < num_poses; ++f)
      new_poses[f] = Pose2(poses[f].theta + delta_pose[3 * f],
                           poses[f].x + delta_pose[3 * f + 1],
                           poses[f].y + delta_pose[3 * f + 2]);
    std::vector<Point2> new_positions = positions;
    for (int p = 0; p < num_points; ++p) {
      Eigen::Vector2d acc = b_point[p];
      for (const auto& [fi, w_fp] : coupling[p])
        acc -= w_fp.transpose() * delta_pose.segment<3>(3 * fi);
      new_positions[p] += v_inv[p] * acc;
    }

    const double new_cost = total_cost(new_poses, new_positions);
    if (new_cost <= cost) {
      const double drop = cost - new_cost;
      poses = std::move(new_poses);
      positions = std::move(new_positions);
      cost = new_cost;
      lambda = std::max(lambda / 3.0, 1e-12);
      if (drop < params.rel_tolerance * std::max(cost, 1e-30)) break;
    } else {
      lambda *= 5.0;
      if (lambda > 1e8) break;
    }
  }

  for (const auto& [kf_id, idx] : pose_index) map.keyframes.at(kf_id).pose = poses[idx];
  for (int i = 0; i < num_points; ++i) map.points.at(point_ids[i]).position = positions[i];
  summary.final_cost = cost;
  return summary;
}

}  // namespace rslam
