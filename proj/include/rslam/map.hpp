#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "rslam/features.hpp"
#include "rslam/pointcloud.hpp"
#include "rslam/se2.hpp"

namespace rslam {

struct Keyframe {
  int64_t id = -1;
  Pose2 pose;  // world
  double timestamp = 0.0;
  FrameFeatures features;
  RadarPointCloud cloud;            // scan-local, for place recognition
  std::vector<int64_t> point_ids;   // per keypoint, -1 when unassociated
};

struct MapPoint {
  int64_t id = -1;
  Point2 position{0, 0};  // world
  std::vector<std::pair<int64_t, int>> observations;  // (keyframe, keypoint)
  int64_t creator_id = -1;
  Descriptor descriptor;  // representative, used for fusion
};

// Keyframes plus landmarks with covisibility bookkeeping. Ordered containers
// keep every iteration deterministic.
class Map {
 public:
  std::map<int64_t, Keyframe> keyframes;
  std::map<int64_t, MapPoint> points;
  std::map<int64_t, std::map<int64_t, int>> covisibility;

  void insert_keyframe(Keyframe kf) {
    if (kf.point_ids.size() != kf.features.keypoints.size())
      kf.point_ids.assign(kf.features.keypoints.size(), -1);
    if (keyframes.count(kf.id))
      throw std::invalid_argument("Map: duplicate keyframe id");
    keyframes.emplace(kf.id, std::move(kf));
  }

  int64_t spawn_point(int64_t creator, int keypoint_index,
                      const Point2& world_position, Descriptor descriptor) {
    MapPoint mp;
    mp.id = next_point_id_++;
    mp.position = world_position;
    mp.creator_id = creator;
    mp.descriptor = std::move(descriptor);
    points.emplace(mp.id, std::move(mp));
    add_observation(mp.id, creator, keypoint_index);
    return points.rbegin()->first;
  }

  // One observation per keyframe; returns false if the keyframe already
  // observes this point (the caller must not leave a dangling link behind).
  bool add_observation(int64_t point_id, int64_t kf_id, int keypoint_index) {
    MapPoint& mp = points.at(point_id);
    Keyframe& kf = keyframes.at(kf_id);
    for (const auto& [okf, oidx] : mp.observations)
      if (okf == kf_id) return false;
    for (const auto& [okf, oidx] : mp.observations) {
      ++covisibility[kf_id][okf];
      ++covisibility[okf][kf_id];
    }
    mp.observations.push_back({kf_id, keypoint_index});
    kf.point_ids[keypoint_index] = point_id;
    return true;
  }

  void remove_point(int64_t point_id) {
    const MapPoint& mp = points.at(point_id);
    for (size_t i = 0; i < mp.observations.size(); ++i) {
      const auto [kf_i, idx_i] = mp.observations[i];
      keyframes.at(kf_i).point_ids[idx_i] = -1;
      for (size_t j = i + 1; j < mp.observations.size(); ++j) {
        const auto [kf_j, idx_j] = mp.observations[j];
        if (--covisibility[kf_i][kf_j] <= 0) covisibility[kf_i].erase(kf_j);
        if (--covisibility[kf_j][kf_i] <= 0) covisibility[kf_j].erase(kf_i);
      }
    }
    points.erase(point_id);
  }

  // Bidirectional observation consistency and covisibility symmetry.
  bool audit() const {
    for (const auto& [pid, mp] : points) {
      if (mp.observations.empty()) return false;
      for (const auto& [kf_id, idx] : mp.observations) {
        auto it = keyframes.find(kf_id);
        if (it == keyframes.end()) return false;
        if (idx < 0 || idx >= int(it->second.point_ids.size())) return false;
        if (it->second.point_ids[idx] != pid) return false;
      }
    }
    for (const auto& [kf_id, kf] : keyframes)
      for (size_t i = 0; i < kf.point_ids.size(); ++i) {
        if (kf.point_ids[i] < 0) continue;
        auto it = points.find(kf.point_ids[i]);
        if (it == points.end()) return false;
        bool linked = false;
        for (const auto& [okf, oidx] : it->second.observations)
          linked |= okf == kf_id && oidx == int(i);
        if (!linked) return false;
      }
    for (const auto& [a, row] : covisibility)
      for (const auto& [b, count] : row) {
        auto it = covisibility.find(b);
        if (it == covisibility.end()) return false;
        auto jt = it->second.find(a);
        if (jt == it->second.end() || jt->second != count) return false;
      }
    return true;
  }

  // Covisibility neighbors of `kf_id`, strongest first, ties to newer ids.
  std::vector<int64_t> covisible_keyframes(int64_t kf_id) const {
    std::vector<std::pair<int, int64_t>> ranked;
    auto it = covisibility.find(kf_id);
    if (it != covisibility.end())
      for (const auto& [other, count] : it->second)
        ranked.push_back({count, other});
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second > b.second;
    });
    std::vector<int64_t> out;
    for (const auto& [count, id] : ranked) out.push_back(id);
    return out;
  }

 private:
  int64_t next_point_id_ = 0;
};

}  // namespace rslam
