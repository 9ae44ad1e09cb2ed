#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "rslam/config.hpp"
#include "rslam/evaluation.hpp"
#include "rslam/local_mapping.hpp"
#include "rslam/loop_closure.hpp"
#include "rslam/map.hpp"
#include "rslam/pose_graph.hpp"
#include "rslam/tracking.hpp"

namespace rslam {

namespace detail {

// Bounded FIFO connecting the pipeline workers.
template <typename T>
class WorkQueue {
 public:
  explicit WorkQueue(size_t capacity = 8) : capacity_(capacity) {}

  void push(T item) {
    std::unique_lock<std::mutex> lock(mutex_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
  }

  std::optional<T> pop() {
    std::unique_lock<std::mutex> lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  std::optional<T> try_pop() {
    std::unique_lock<std::mutex> lock(mutex_);
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::unique_lock<std::mutex> lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  size_t capacity_;
  std::deque<T> items_;
  std::mutex mutex_;
  std::condition_variable not_empty_, not_full_;
  bool closed_ = false;
};

}  // namespace detail

// Work order handed from mapping to the loop worker after a keyframe lands.
struct LoopTask {
  int64_t kf_id = -1;
  int64_t prev_kf = -1;
  Pose2 odometry;  // prev_kf^-1 * kf at insertion time
  Pose2 pose;      // keyframe pose after local BA
  RadarPointCloud cloud;
  std::map<int64_t, Pose2> keyframe_poses;  // mapping's current estimates
};

struct StageTimings {
  double rasterize_ms = 0, detect_ms = 0, associate_ms = 0, refine_ms = 0,
         keyframe_ms = 0, mapping_ms = 0, loop_ms = 0, optimize_ms = 0;
  double wall_ms = 0;
  int frames = 0;
  int keyframes = 0;

  double fps() const { return frames / std::max(wall_ms / 1000.0, 1e-9); }
};

struct PipelineOutputs {
  Trajectory online;     // per-frame poses as estimated at track time
  Trajectory rectified;  // re-anchored through the final keyframe poses
  Trajectory keyframes;  // final keyframe trajectory
  Map map;
  PoseGraph graph;
  int verified_loops = 0;
  int lost_frames = 0;
  StageTimings timings;
};

namespace detail {

class MappingEngine {
 public:
  explicit MappingEngine(const PipelineConfig& config) : config_(config) {}

  Map& map() { return map_; }
  const Map& map() const { return map_; }

  LoopTask insert(Keyframe kf) {
    const int64_t id = kf.id;
    RadarPointCloud cloud = kf.cloud;
    map_.insert_keyframe(std::move(kf));
    create_map_points(map_, id, config_.fusion_params());
    local_bundle_adjust(map_, id, config_.ba_params());

    // points spawned three keyframes ago have had their maturation window
    if (map_.keyframes.size() >= 3) {
      auto it = map_.keyframes.rbegin();
      std::advance(it, 2);
      cull_map_points(map_, it->first);
    }

    LoopTask task;
    task.kf_id = id;
    task.prev_kf = previous_kf_;
    task.pose = map_.keyframes.at(id).pose;
    if (previous_kf_ >= 0)
      task.odometry =
          relative_pose(map_.keyframes.at(previous_kf_).pose, task.pose);
    task.cloud = std::move(cloud);
    for (const auto& [kf_id, keyframe] : map_.keyframes)
      task.keyframe_poses[kf_id] = keyframe.pose;
    previous_kf_ = id;
    return task;
  }

  void apply_correction(const std::map<int64_t, Pose2>& poses) {
    update_map(map_, poses);
  }

  std::shared_ptr<const MapSnapshot> snapshot() const {
    auto snap = std::make_shared<MapSnapshot>();
    for (const auto& [id, kf] : map_.keyframes)
      snap->keyframe_poses[id] = kf.pose;
    for (const auto& [id, mp] : map_.points)
      snap->point_positions[id] = mp.position;
    return snap;
  }

  std::vector<int64_t> point_ids_of(int64_t kf_id) const {
    return map_.keyframes.at(kf_id).point_ids;
  }

 private:
  PipelineConfig config_;
  Map map_;
  int64_t previous_kf_ = -1;
};

class LoopEngine {
 public:
  explicit LoopEngine(const PipelineConfig& config) : config_(config) {}

  PoseGraph& graph() { return graph_; }
  int verified_count() const { return verified_; }

  struct Outcome {
    bool fired = false;
    std::map<int64_t, Pose2> corrected;
    double loop_ms = 0, optimize_ms = 0;
  };

  Outcome process(const LoopTask& task) {
    Outcome outcome;
    const auto t0 = std::chrono::steady_clock::now();

    graph_.add_node(task.kf_id, task.pose);
    if (task.prev_kf >= 0)
      graph_.add_odometry_edge(task.prev_kf, task.kf_id, task.odometry,
                               config_.edge_information());
    for (const auto& [id, pose] : task.keyframe_poses)
      if (graph_.has_node(id)) graph_.set_pose(id, pose);

    std::optional<LoopCandidate> verified;
    const auto descriptor = describe(task.cloud, config_.descriptor_params());
    if (descriptor && config_.loop_enabled) {
      for (LoopCandidate& candidate :
           db_.query(*descriptor, task.kf_id, config_.query_params())) {
        const SceneDescriptor* match_desc = db_.find(candidate.match_id);
        auto cloud_it = clouds_.find(candidate.match_id);
        if (!match_desc || cloud_it == clouds_.end()) continue;
        // coarse init from the canonical frames of the two descriptors
        const double rot =
            wrap_angle(match_desc->align_angle - descriptor->align_angle);
        const Eigen::Matrix2d r = Pose2(rot, 0, 0).rotation();
        const Point2 t = match_desc->centroid - r * descriptor->centroid;
        const auto icp = verify_icp(task.cloud, cloud_it->second,
                                    Pose2(rot, t.x(), t.y()),
                                    config_.icp_params());
        if (!icp) continue;
        candidate.relative = icp->transform;
        candidate.inlier_fraction = icp->inlier_fraction;
        verified = candidate;
        break;
      }
    }
    if (descriptor) {
      db_.insert(task.kf_id, *descriptor);
      clouds_[task.kf_id] = task.cloud;
    }
    outcome.loop_ms = ms_since(t0);

    if (verified &&
        graph_.add_loop_edge(*verified, config_.edge_information())) {
      const auto t1 = std::chrono::steady_clock::now();
      const OptimizeResult result = graph_.optimize(config_.graph_params());
      outcome.optimize_ms = ms_since(t1);
      if (result.success) {
        outcome.fired = true;
        ++verified_;
        for (const PoseNode& node : graph_.nodes())
          outcome.corrected[node.id] = node.pose;
      }
    }
    return outcome;
  }

 private:
  PipelineConfig config_;
  PoseGraph graph_;
  DescriptorDatabase db_;
  std::map<int64_t, RadarPointCloud> clouds_;
  int verified_ = 0;
};

}  // namespace detail

// The full pipeline: tracking, local mapping and loop closure over a scan
// stream. Single-thread mode runs the three stages synchronously per frame
// and is bit-reproducible; the default mode runs them as three workers
// connected by queues, mirroring the tracking / mapping / loop split.
class SlamPipeline {
 public:
  explicit SlamPipeline(PipelineConfig config) : config_(std::move(config)) {
    config_.validate();
  }

  PipelineOutputs run(const std::function<PolarScan(int)>& load, int frames) {
    Tracker tracker(config_.tracking_params());
    detail::MappingEngine mapper(config_);
    detail::LoopEngine looper(config_);

    PipelineOutputs out;
    std::vector<double> online_ts;
    std::vector<Pose2> online_poses;
    std::vector<Anchor> anchors;

    const auto wall0 = std::chrono::steady_clock::now();
    if (config_.single_thread)
      run_single(tracker, mapper, looper, load, frames, online_ts,
                 online_poses, anchors, out);
    else
      run_threaded(tracker, mapper, looper, load, frames, online_ts,
                   online_poses, anchors, out);
    out.timings.wall_ms = detail::ms_since(wall0);
    out.timings.frames = frames;

    finalize(mapper, looper, online_ts, online_poses, anchors, out);
    return out;
  }

 private:
  struct Anchor {
    int64_t kf = -1;
    Pose2 relative;  // keyframe-at-track-time -> frame
  };

  static void accumulate(const FrameStats& stats, StageTimings& t) {
    t.rasterize_ms += stats.rasterize_ms;
    t.detect_ms += stats.detect_ms;
    t.associate_ms += stats.associate_ms;
    t.refine_ms += stats.refine_ms;
    t.keyframe_ms += stats.keyframe_ms;
  }

  static void record(const FrameResult& fr, const PolarScan& scan,
                     std::vector<double>& online_ts,
                     std::vector<Pose2>& online_poses,
                     std::vector<Anchor>& anchors, PipelineOutputs& out) {
    online_ts.push_back(scan.timestamp);
    online_poses.push_back(fr.state.pose);
    Anchor anchor;
    anchor.kf = fr.state.active_keyframe;
    anchor.relative = relative_pose(fr.keyframe_pose_used, fr.state.pose);
    anchors.push_back(anchor);
    if (fr.state.status == TrackStatus::kLost) ++out.lost_frames;
  }

  void run_single(Tracker& tracker, detail::MappingEngine& mapper,
                  detail::LoopEngine& looper,
                  const std::function<PolarScan(int)>& load, int frames,
                  std::vector<double>& online_ts,
                  std::vector<Pose2>& online_poses,
                  std::vector<Anchor>& anchors, PipelineOutputs& out) {
    for (int i = 0; i < frames; ++i) {
      const PolarScan scan = load(i);
      FrameResult fr = tracker.track_frame(scan);
      accumulate(fr.stats, out.timings);
      record(fr, scan, online_ts, online_poses, anchors, out);
      if (!fr.new_keyframe) continue;
      ++out.timings.keyframes;
      const int64_t id = fr.new_keyframe->id;
      const auto t0 = std::chrono::steady_clock::now();
      LoopTask task = mapper.insert(std::move(*fr.new_keyframe));
      out.timings.mapping_ms += detail::ms_since(t0);
      tracker.update_active_point_ids(id, mapper.point_ids_of(id));
      tracker.set_snapshot(mapper.snapshot());
      auto outcome = looper.process(task);
      out.timings.loop_ms += outcome.loop_ms;
      out.timings.optimize_ms += outcome.optimize_ms;
      if (outcome.fired) {
        mapper.apply_correction(outcome.corrected);
        tracker.set_snapshot(mapper.snapshot());
      }
    }
  }

  void run_threaded(Tracker& tracker, detail::MappingEngine& mapper,
                    detail::LoopEngine& looper,
                    const std::function<PolarScan(int)>& load, int frames,
                    std::vector<double>& online_ts,
                    std::vector<Pose2>& online_poses,
                    std::vector<Anchor>& anchors, PipelineOutputs& out) {
    detail::WorkQueue<Keyframe> to_mapping(8);
    detail::WorkQueue<LoopTask> to_loop(8);
    // corrections are rare; unbounded so the loop worker never blocks on it
    detail::WorkQueue<std::map<int64_t, Pose2>> corrections(size_t(-1));

    std::thread mapping_thread([&] {
      while (true) {
        while (auto corr = corrections.try_pop()) {
          mapper.apply_correction(*corr);
          tracker.set_snapshot(mapper.snapshot());
        }
        auto kf = to_mapping.pop();
        if (!kf) break;
        const int64_t id = kf->id;
        const auto t0 = std::chrono::steady_clock::now();
        LoopTask task = mapper.insert(std::move(*kf));
        out.timings.mapping_ms += detail::ms_since(t0);
        tracker.update_active_point_ids(id, mapper.point_ids_of(id));
        tracker.set_snapshot(mapper.snapshot());
        to_loop.push(std::move(task));
      }
    });

    std::thread loop_thread([&] {
      while (true) {
        auto task = to_loop.pop();
        if (!task) break;
        auto outcome = looper.process(*task);
        out.timings.loop_ms += outcome.loop_ms;
        out.timings.optimize_ms += outcome.optimize_ms;
        if (outcome.fired) corrections.push(std::move(outcome.corrected));
      }
    });

    for (int i = 0; i < frames; ++i) {
      const PolarScan scan = load(i);
      FrameResult fr = tracker.track_frame(scan);
      accumulate(fr.stats, out.timings);
      record(fr, scan, online_ts, online_poses, anchors, out);
      if (fr.new_keyframe) {
        ++out.timings.keyframes;
        to_mapping.push(std::move(*fr.new_keyframe));
      }
    }
    to_mapping.close();
    mapping_thread.join();
    to_loop.close();
    loop_thread.join();
    // corrections that landed after the mapping worker exited
    while (auto corr = corrections.try_pop()) mapper.apply_correction(*corr);
  }

  void finalize(detail::MappingEngine& mapper, detail::LoopEngine& looper,
                const std::vector<double>& online_ts,
                const std::vector<Pose2>& online_poses,
                const std::vector<Anchor>& anchors, PipelineOutputs& out) {
    if (!online_ts.empty()) out.online = make_trajectory(online_ts, online_poses);

    // final per-frame estimate: each frame re-anchored to the latest pose of
    // the keyframe that tracked it
    const Map& map = mapper.map();
    std::vector<Pose2> rectified;
    rectified.reserve(online_poses.size());
    for (size_t i = 0; i < online_poses.size(); ++i) {
      const Anchor& anchor = anchors[i];
      auto it = anchor.kf >= 0 ? map.keyframes.find(anchor.kf)
                               : map.keyframes.end();
      rectified.push_back(it == map.keyframes.end()
                              ? online_poses[i]
                              : compose(it->second.pose, anchor.relative));
    }
    if (!online_ts.empty()) out.rectified = make_trajectory(online_ts, rectified);

    std::vector<double> kf_ts;
    std::vector<Pose2> kf_poses;
    for (const auto& [id, kf] : map.keyframes) {
      kf_ts.push_back(kf.timestamp);
      kf_poses.push_back(kf.pose);
    }
    for (size_t i = 1; i < kf_ts.size(); ++i)
      if (kf_ts[i] <= kf_ts[i - 1]) kf_ts[i] = kf_ts[i - 1] + 1e-6;
    if (!kf_ts.empty()) out.keyframes = make_trajectory(kf_ts, kf_poses);

    out.verified_loops = looper.verified_count();
    out.map = std::move(mapper.map());
    out.graph = std::move(looper.graph());
  }

  PipelineConfig config_;
};

// ---- output files of a SLAM run ----

inline void write_map_points_csv(const Map& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write map points: " + path);
  out << "# id,x,y,n_obs\n" << std::setprecision(17);
  for (const auto& [id, mp] : map.points)
    out << id << ',' << mp.position.x() << ',' << mp.position.y() << ','
        << mp.observations.size() << '\n';
}

inline void write_timings(const StageTimings& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write timings: " + path);
  const double n = std::max(1, t.frames);
  const double k = std::max(1, t.keyframes);
  out << std::fixed << std::setprecision(3);
  out << "frames:            " << t.frames << "\n";
  out << "keyframes:         " << t.keyframes << "\n";
  out << "throughput:        " << t.fps() << " frames/s\n";
  out << "per-frame mean (ms)\n";
  out << "  rasterize:       " << t.rasterize_ms / n << "\n";
  out << "  detect+describe: " << t.detect_ms / n << "\n";
  out << "  match+clique:    " << t.associate_ms / n << "\n";
  out << "  pose refine:     " << t.refine_ms / n << "\n";
  out << "per-keyframe mean (ms)\n";
  out << "  keyframe setup:  " << t.keyframe_ms / k << "\n";
  out << "  local mapping:   " << t.mapping_ms / k << "\n";
  out << "  loop detection:  " << t.loop_ms / k << "\n";
  out << "  graph optimize:  " << t.optimize_ms / k << "\n";
}

}  // namespace rslam
