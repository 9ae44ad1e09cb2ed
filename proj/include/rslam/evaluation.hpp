#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rslam/association.hpp"
#include "rslam/se2.hpp"

namespace rslam {

// Timestamped pose sequence with cumulative arc length.
struct Trajectory {
  std::vector<double> timestamps;
  std::vector<Pose2> poses;
  std::vector<double> arc_length;

  size_t size() const { return poses.size(); }
  bool empty() const { return poses.empty(); }
};

inline Trajectory make_trajectory(const std::vector<double>& timestamps,
                                  const std::vector<Pose2>& poses) {
  if (timestamps.size() != poses.size())
    throw std::invalid_argument("make_trajectory: size mismatch");
  for (size_t i = 1; i < timestamps.size(); ++i)
    if (timestamps[i] <= timestamps[i - 1])
      throw std::invalid_argument(
          "make_trajectory: timestamps must strictly increase");
  Trajectory t;
  t.timestamps = timestamps;
  t.poses = poses;
  t.arc_length.resize(poses.size(), 0.0);
  for (size_t i = 1; i < poses.size(); ++i)
    t.arc_length[i] =
        t.arc_length[i - 1] +
        (poses[i].translation() - poses[i - 1].translation()).norm();
  return t;
}

// Nearest-timestamp association of estimate poses to truth poses.
inline std::vector<std::pair<int, int>> associate(
    const Trajectory& estimate, const Trajectory& truth,
    double tolerance = std::numeric_limits<double>::infinity()) {
  std::vector<std::pair<int, int>> pairs;
  size_t j = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    const double t = truth.timestamps[i];
    while (j + 1 < estimate.size() &&
           std::abs(estimate.timestamps[j + 1] - t) <=
               std::abs(estimate.timestamps[j] - t))
      ++j;
    if (estimate.empty()) break;
    if (std::abs(estimate.timestamps[j] - t) <= tolerance)
      pairs.push_back({int(j), int(i)});
  }
  return pairs;
}

struct KittiParams {
  // nominal segment lengths 100..800 m scaled for desk-size worlds
  double length_scale = 1.0;
  double association_tolerance = std::numeric_limits<double>::infinity();
  int start_stride = 1;  // evaluate segments from every pose
};

struct KittiErrors {
  double translation_percent = 0.0;
  double rotation_deg_per_m = 0.0;
  int segments = 0;
  std::vector<double> lengths;  // the evaluated segment lengths, meters
};

// KITTI odometry criterion: relative-pose error over segments of nominal
// length 100..800 m (scaled), averaged over every start pose. Translation in
// percent of segment length, rotation in degrees per meter.
inline std::optional<KittiErrors> kitti_errors(const Trajectory& estimate,
                                               const Trajectory& truth,
                                               const KittiParams& params = {}) {
  const auto pairs = associate(estimate, truth, params.association_tolerance);
  if (pairs.size() < 2) return std::nullopt;

  std::vector<double> arc(pairs.size(), 0.0);
  for (size_t i = 1; i < pairs.size(); ++i)
    arc[i] = arc[i - 1] + (truth.poses[pairs[i].second].translation() -
                           truth.poses[pairs[i - 1].second].translation())
                              .norm();

  KittiErrors out;
  for (int i = 1; i <= 8; ++i) out.lengths.push_back(100.0 * i * params.length_scale);

  double terr_sum = 0, rerr_sum = 0;
  int count = 0;
  for (size_t start = 0; start < pairs.size();
       start += size_t(std::max(1, params.start_stride))) {
    for (const double length : out.lengths) {
      const double target = arc[start] + length;
      size_t end = start;
      while (end < pairs.size() && arc[end] < target) ++end;
      if (end >= pairs.size()) break;  // longer segments will not fit either
      const Pose2 gt_rel = relative_pose(truth.poses[pairs[start].second],
                                         truth.poses[pairs[end].second]);
      const Pose2 est_rel = relative_pose(estimate.poses[pairs[start].first],
                                          estimate.poses[pairs[end].first]);
      const Pose2 error = compose(inverse(gt_rel), est_rel);
      terr_sum += error.translation().norm() / length;
      rerr_sum += std::abs(error.theta) / length;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  out.translation_percent = 100.0 * terr_sum / count;
  out.rotation_deg_per_m = (180.0 / M_PI) * rerr_sum / count;
  out.segments = count;
  return out;
}

// Absolute trajectory error: position RMSE after the optimal rigid alignment
// of associated pose positions.
inline double ate(const Trajectory& estimate, const Trajectory& truth,
                  double association_tolerance =
                      std::numeric_limits<double>::infinity()) {
  const auto pairs = associate(estimate, truth, association_tolerance);
  if (pairs.empty()) throw std::invalid_argument("ate: no associated poses");
  std::vector<std::pair<Point2, Point2>> positions;
  for (const auto& [ei, ti] : pairs)
    positions.push_back({estimate.poses[ei].translation(),
                         truth.poses[ti].translation()});
  Pose2 alignment = Pose2::identity();
  if (const auto fitted = estimate_se2_svd(positions)) alignment = *fitted;
  double sum = 0;
  for (const auto& [e, t] : positions)
    sum += (t - transform_point(alignment, e)).squaredNorm();
  return std::sqrt(sum / double(positions.size()));
}

// ---- file formats ----

// Trajectory CSV rows: timestamp,x,y,theta (comment lines start with '#').
inline void write_trajectory_csv(const Trajectory& trajectory,
                                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory: " + path);
  out << "# timestamp,x,y,theta\n" << std::setprecision(17);
  for (size_t i = 0; i < trajectory.size(); ++i)
    out << trajectory.timestamps[i] << ',' << trajectory.poses[i].x << ','
        << trajectory.poses[i].y << ',' << trajectory.poses[i].theta << '\n';
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read trajectory: " + path);
  std::vector<double> timestamps;
  std::vector<Pose2> poses;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double t, x, y, theta;
    if (ss >> t >> x >> y >> theta) {
      timestamps.push_back(t);
      poses.emplace_back(theta, x, y);
    }
  }
  return make_trajectory(timestamps, poses);
}

// SVG overlay of estimate (red) versus ground truth (green), plus optional
// map points (grey).
inline void write_trajectory_svg(const std::string& path,
                                 const Trajectory& estimate,
                                 const Trajectory* truth = nullptr,
                                 const std::vector<Point2>* map_points = nullptr) {
  double min_x = 1e30, max_x = -1e30, min_y = 1e30, max_y = -1e30;
  auto grow = [&](const Point2& p) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  };
  for (const Pose2& p : estimate.poses) grow(p.translation());
  if (truth)
    for (const Pose2& p : truth->poses) grow(p.translation());
  if (map_points)
    for (const Point2& p : *map_points) grow(p);
  if (min_x > max_x) {
    min_x = min_y = -1;
    max_x = max_y = 1;
  }
  const double span = std::max({max_x - min_x, max_y - min_y, 1e-6});
  const double margin = 0.05 * span;
  const double scale = 900.0 / (span + 2 * margin);
  auto sx = [&](double x) { return (x - min_x + margin) * scale + 50; };
  auto sy = [&](double y) { return 950.0 - (y - min_y + margin) * scale; };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write svg: " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='1000' height='1000' "
         "viewBox='0 0 1000 1000'>\n"
      << "<rect width='1000' height='1000' fill='white'/>\n";
  if (map_points) {
    for (const Point2& p : *map_points)
      out << "<circle cx='" << sx(p.x()) << "' cy='" << sy(p.y())
          << "' r='1.5' fill='#b8b8b8'/>\n";
  }
  auto polyline = [&](const Trajectory& t, const char* color) {
    out << "<polyline fill='none' stroke='" << color
        << "' stroke-width='2' points='";
    for (const Pose2& p : t.poses) out << sx(p.x) << ',' << sy(p.y) << ' ';
    out << "'/>\n";
  };
  if (truth) polyline(*truth, "#3aa13a");
  polyline(estimate, "#d03232");
  out << "<text x='60' y='40' font-size='24' fill='#d03232'>estimate</text>\n";
  if (truth)
    out << "<text x='200' y='40' font-size='24' fill='#3aa13a'>ground "
           "truth</text>\n";
  out << "</svg>\n";
}

// Plain-text metrics report plus a machine-readable CSV next to it.
inline void write_metrics_report(const std::string& text_path,
                                 const std::string& csv_path,
                                 const std::optional<KittiErrors>& kitti,
                                 double ate_value, double length_scale) {
  std::ofstream out(text_path);
  if (!out) throw std::runtime_error("cannot write report: " + text_path);
  out << "trajectory evaluation report\n";
  out << "(segment starts at every pose; lengths 100..800 m"
      << " scaled by " << length_scale << ")\n\n";
  if (kitti) {
    out << "translation error: " << std::fixed << std::setprecision(4)
        << kitti->translation_percent << " %\n";
    out << "rotation error:    " << std::setprecision(6)
        << kitti->rotation_deg_per_m << " deg/m\n";
    out << "segments evaluated: " << kitti->segments << "\n";
  } else {
    out << "kitti metric: undefined (no valid segments)\n";
  }
  out << "ATE (rmse): " << std::setprecision(6) << ate_value << " m\n";

  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write report csv: " + csv_path);
  csv << "metric,value\n";
  if (kitti) {
    csv << "translation_percent," << kitti->translation_percent << "\n";
    csv << "rotation_deg_per_m," << kitti->rotation_deg_per_m << "\n";
    csv << "segments," << kitti->segments << "\n";
  }
  csv << "ate_rmse_m," << ate_value << "\n";
}

}  // namespace rslam
