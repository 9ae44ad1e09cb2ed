#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "rslam/association.hpp"
#include "rslam/features.hpp"
#include "rslam/map.hpp"
#include "rslam/pointcloud.hpp"
#include "rslam/robust.hpp"
#include "rslam/scan.hpp"
#include "rslam/se2.hpp"

namespace rslam {

struct TrackingParams {
  int raster_width = 801;
  double raster_gamma = 0.0;  // <= 0 fits the scan's max range
  int max_keypoints = 500;
  DetectorParams detector;
  double match_radius = 12.5;  // v_max * dt + margin
  MatchParams match;
  double delta_c = 0.5;
  ConsistencyGates gates;
  MaxCliqueParams clique;
  int min_inliers = 5;
  int keyframe_min_matches = 60;          // N_min
  double keyframe_max_translation = 2.0;  // d_max, meters
  double keyframe_max_rotation = 5.0 * M_PI / 180.0;  // theta_max
  double huber_delta = 1.0;
  int refine_max_iterations = 20;
  double refine_tolerance = 1e-8;
  int lost_recovery_frames = 5;
  PeakParams peaks;  // keyframe point-cloud extraction
};

enum class TrackStatus { kOk, kLost };

struct TrackState {
  Pose2 pose;
  int64_t active_keyframe = -1;
  int last_match_count = 0;
  TrackStatus status = TrackStatus::kOk;
  Pose2 velocity;  // last per-frame motion, for coasting while lost
  int lost_streak = 0;
};

// Immutable view of optimized keyframe poses and landmark positions,
// published by the mapping side and consumed here.
struct MapSnapshot {
  std::map<int64_t, Pose2> keyframe_poses;
  std::map<int64_t, Point2> point_positions;
};

struct FrameStats {
  double rasterize_ms = 0, detect_ms = 0, associate_ms = 0, refine_ms = 0,
         keyframe_ms = 0;
  int matches = 0;
  int inliers = 0;
};

struct FrameResult {
  TrackState state;
  std::optional<Keyframe> new_keyframe;
  Pose2 relative_to_keyframe;  // maps frame coords into the keyframe frame
  Pose2 keyframe_pose_used;    // the active keyframe pose this frame tracked against
  FrameStats stats;
};

// Keyframe decision rule: too few matches, or the frame moved too far.
inline bool should_create_keyframe(const TrackState&, int matches,
                                   const Pose2& relative,
                                   const TrackingParams& params) {
  if (matches < params.keyframe_min_matches) return true;
  if (relative.translation().norm() > params.keyframe_max_translation)
    return true;
  return std::abs(relative.theta) > params.keyframe_max_rotation;
}

namespace detail {

// Eq.-style reprojection refinement: argmin_C sum huber(|P_w - C p|),
// Levenberg-Marquardt on (theta, x, y). Never returns a pose with a larger
// robust cost than the initial guess.
inline Pose2 refine_pose(const std::vector<std::pair<Point2, Point2>>& world_local,
                         const Pose2& initial, const TrackingParams& params) {
  if (world_local.size() < 3) return initial;
  auto cost_of = [&](const Pose2& c) {
    double cost = 0;
    for (const auto& [world, local] : world_local)
      cost += huber_cost((world - transform_point(c, local)).norm(),
                         params.huber_delta);
    return cost;
  };
  Pose2 pose = initial;
  double cost = cost_of(pose);
  double lambda = 1e-6;
  for (int iter = 0; iter < params.refine_max_iterations; ++iter) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    const Eigen::Matrix2d rot = pose.rotation();
    const Eigen::Matrix2d drot = rotation_derivative(pose.theta);
    for (const auto& [world, local] : world_local) {
      const Eigen::Vector2d r = world - (rot * local + pose.translation());
      Eigen::Matrix<double, 2, 3> j;
      j.col(0) = -(drot * local);
      j(0, 1) = -1;
      j(1, 1) = 0;
      j(0, 2) = 0;
      j(1, 2) = -1;
      const double w = huber_weight(r.norm(), params.huber_delta);
      h += w * j.transpose() * j;
      g -= w * j.transpose() * r;
    }
    Eigen::Matrix3d damped = h;
    for (int k = 0; k < 3; ++k) damped(k, k) += lambda * (h(k, k) + 1e-12);
    const Eigen::Vector3d delta = damped.ldlt().solve(g);
    const Pose2 candidate(pose.theta + delta[0], pose.x + delta[1],
                          pose.y + delta[2]);
    const double new_cost = cost_of(candidate);
    if (new_cost <= cost) {
      pose = candidate;
      cost = new_cost;
      lambda = std::max(lambda / 3.0, 1e-12);
      if (delta.norm() < params.refine_tolerance) break;
    } else {
      lambda *= 5.0;
      if (lambda > 1e8) break;
    }
  }
  return pose;
}

inline double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace detail

// Keyframe-relative pose tracker. Pipeline per frame: rasterize, detect,
// gated matching against the active keyframe, pairwise-consistency clique,
// SVD alignment, then reprojection refinement against the map points. Runs
// as a sequential state machine; the mapping side feeds back optimized
// poses/points through set_snapshot().
class Tracker {
 public:
  explicit Tracker(TrackingParams params = {}) : params_(std::move(params)) {}

  const TrackingParams& params() const { return params_; }
  const TrackState& state() const { return state_; }

  void set_snapshot(std::shared_ptr<const MapSnapshot> snapshot) {
    std::lock_guard<std::mutex> lock(snapshot_mutex_);
    snapshot_ = std::move(snapshot);
  }

  FrameResult track_frame(const PolarScan& scan) {
    FrameResult result;
    auto t0 = std::chrono::steady_clock::now();
    const double gamma = params_.raster_gamma > 0
                             ? params_.raster_gamma
                             : fit_gamma(scan, params_.raster_width);
    const CartesianImage img =
        polar_to_cartesian_image(scan, params_.raster_width, gamma);
    result.stats.rasterize_ms = detail::ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    FrameFeatures features =
        detect(img, params_.max_keypoints, params_.detector);
    result.stats.detect_ms = detail::ms_since(t0);

    if (active_id_ < 0) {
      result.new_keyframe = bootstrap(scan, std::move(features), state_.pose);
      result.relative_to_keyframe = Pose2::identity();
      result.keyframe_pose_used = active_pose_;
      result.state = state_;
      return result;
    }

    t0 = std::chrono::steady_clock::now();
    const MatchSet matches =
        match_gated(features, active_features_, params_.match_radius, params_.match);
    const ConsistencyGraph graph =
        build_graph(matches, features.keypoints, active_features_.keypoints,
                    params_.delta_c, params_.gates);
    const std::vector<int> clique = max_clique(graph, params_.clique);
    result.stats.associate_ms = detail::ms_since(t0);
    result.stats.matches = int(matches.pairs.size());
    result.stats.inliers = int(clique.size());

    std::vector<std::pair<Point2, Point2>> pairs;  // (frame t, keyframe k)
    for (int v : clique) {
      const Match& m = matches.pairs[v];
      pairs.push_back({features.keypoints[m.query_index].position,
                       active_features_.keypoints[m.train_index].position});
    }
    std::optional<Pose2> rel;
    if (int(clique.size()) >= params_.min_inliers) rel = estimate_se2_svd(pairs);
    if (!rel) {
      result.keyframe_pose_used = active_pose_;
      coast(scan, std::move(features));
      result.keyframe_pose_used = active_pose_;  // bootstrap may have moved it
      result.state = state_;
      return result;
    }

    const auto snapshot = current_snapshot();
    Pose2 keyframe_pose = active_pose_;
    if (snapshot) {
      auto it = snapshot->keyframe_poses.find(active_id_);
      if (it != snapshot->keyframe_poses.end()) keyframe_pose = it->second;
    }
    result.keyframe_pose_used = keyframe_pose;
    Pose2 pose = compose(keyframe_pose, *rel);

    // refinement against the map points observed in the keyframe
    t0 = std::chrono::steady_clock::now();
    std::vector<std::pair<Point2, Point2>> world_local;
    for (int v : clique) {
      const Match& m = matches.pairs[v];
      const int64_t pid = active_point_ids_.empty()
                              ? -1
                              : active_point_ids_[m.train_index];
      Point2 world;
      bool have_world = false;
      if (pid >= 0 && snapshot) {
        auto it = snapshot->point_positions.find(pid);
        if (it != snapshot->point_positions.end()) {
          world = it->second;
          have_world = true;
        }
      }
      if (!have_world)
        world = transform_point(keyframe_pose,
                                active_features_.keypoints[m.train_index].position);
      world_local.push_back({world, features.keypoints[m.query_index].position});
    }
    pose = detail::refine_pose(world_local, pose, params_);
    result.stats.refine_ms = detail::ms_since(t0);

    const Pose2 previous = state_.pose;
    state_.velocity = relative_pose(previous, pose);
    state_.pose = pose;
    state_.status = TrackStatus::kOk;
    state_.lost_streak = 0;
    state_.last_match_count = int(clique.size());
    result.relative_to_keyframe = *rel;

    if (should_create_keyframe(state_, int(clique.size()), *rel, params_)) {
      t0 = std::chrono::steady_clock::now();
      Keyframe kf;
      kf.id = next_keyframe_id_++;
      kf.pose = pose;
      kf.timestamp = scan.timestamp;
      kf.cloud = extract(scan, params_.peaks);
      kf.cloud.source_scan_id = kf.id;
      kf.point_ids.assign(features.keypoints.size(), -1);
      for (int v : clique) {
        const Match& m = matches.pairs[v];
        if (!active_point_ids_.empty() && active_point_ids_[m.train_index] >= 0)
          kf.point_ids[m.query_index] = active_point_ids_[m.train_index];
      }
      kf.features = std::move(features);
      adopt_keyframe(kf);
      result.new_keyframe = std::move(kf);
      result.relative_to_keyframe = Pose2::identity();
      result.keyframe_pose_used = active_pose_;
      result.stats.keyframe_ms = detail::ms_since(t0);
    }
    result.state = state_;
    return result;
  }

  // The mapping side assigns landmark ids after create_map_points; mirror
  // them so later frames can look the world positions up. Safe to call from
  // another thread; the update lands at the start of the next frame.
  void update_active_point_ids(int64_t kf_id, std::vector<int64_t> ids) {
    std::lock_guard<std::mutex> lock(snapshot_mutex_);
    pending_point_ids_ = {kf_id, std::move(ids)};
  }

 private:
  std::shared_ptr<const MapSnapshot> current_snapshot() {
    std::lock_guard<std::mutex> lock(snapshot_mutex_);
    if (pending_point_ids_ && pending_point_ids_->first == active_id_) {
      active_point_ids_ = std::move(pending_point_ids_->second);
      pending_point_ids_.reset();
    }
    return snapshot_;
  }

  Keyframe bootstrap(const PolarScan& scan, FrameFeatures features,
                     const Pose2& pose) {
    Keyframe kf;
    kf.id = next_keyframe_id_++;
    kf.pose = pose;
    kf.timestamp = scan.timestamp;
    kf.cloud = extract(scan, params_.peaks);
    kf.cloud.source_scan_id = kf.id;
    kf.point_ids.assign(features.keypoints.size(), -1);
    kf.features = std::move(features);
    adopt_keyframe(kf);
    state_.pose = pose;
    state_.status = TrackStatus::kOk;
    state_.lost_streak = 0;
    state_.last_match_count = 0;
    return kf;
  }

  void adopt_keyframe(const Keyframe& kf) {
    active_id_ = kf.id;
    active_pose_ = kf.pose;
    active_features_ = kf.features;
    active_point_ids_ = kf.point_ids;
    state_.active_keyframe = kf.id;
  }

  void coast(const PolarScan& scan, FrameFeatures features) {
    state_.pose = compose(state_.pose, state_.velocity);
    state_.status = TrackStatus::kLost;
    state_.last_match_count = 0;
    ++state_.lost_streak;
    if (state_.lost_streak > params_.lost_recovery_frames) {
      bootstrap(scan, std::move(features), state_.pose);
      state_.status = TrackStatus::kLost;  // lost until re-tracked
    }
  }

  TrackingParams params_;
  TrackState state_;

  int64_t active_id_ = -1;
  Pose2 active_pose_;
  FrameFeatures active_features_;
  std::vector<int64_t> active_point_ids_;
  int64_t next_keyframe_id_ = 0;

  std::mutex snapshot_mutex_;
  std::shared_ptr<const MapSnapshot> snapshot_;
  std::optional<std::pair<int64_t, std::vector<int64_t>>> pending_point_ids_;
};

}  // namespace rslam
