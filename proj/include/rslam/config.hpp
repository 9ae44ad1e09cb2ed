#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rslam/local_mapping.hpp"
#include "rslam/loop_closure.hpp"
#include "rslam/pose_graph.hpp"
#include "rslam/tracking.hpp"

namespace rslam {

// Every tunable of the pipeline in one flat key=value structure. Files hold
// one `key = value` per line, '#' comments; CLI overrides use the same keys.
struct PipelineConfig {
  // dataset
  std::string dataset_format = "auto";  // auto | bin | oxford
  double oxford_range_resolution = 0.0432;

  // raster
  int raster_width = 801;
  double raster_gamma = 0.0;  // <= 0 fits the scan max range

  // detector
  int detector_octaves = 3;
  double detector_response_threshold = 4e-4;
  int detector_max_keypoints = 500;

  // matching and consistency
  double match_radius = 12.5;
  double match_ratio = 0.8;
  double delta_c = 0.5;
  bool gate_displacement = true;
  bool gate_length = true;
  int clique_exact_limit = 600;

  // tracking
  int min_inliers = 5;
  int keyframe_min_matches = 60;
  double keyframe_max_translation = 2.0;
  double keyframe_max_rotation_deg = 5.0;
  double tracking_huber = 1.0;
  int refine_iterations = 20;
  double refine_tolerance = 1e-8;
  int lost_recovery_frames = 5;

  // point cloud extraction
  double peak_delta_p = 0.05;
  int peak_delta_d = 10;

  // local mapping
  int ba_window = 5;
  double ba_sigma = 0.5;
  double ba_huber = 1.0;
  int ba_iterations = 50;
  double fusion_radius = 0.5;
  double fusion_descriptor_distance = 0.3;

  // loop closure
  bool loop_enabled = true;
  int loop_k = 6;
  int loop_guard = 50;
  double loop_max_descriptor_distance = 0.25;
  int descriptor_rings = 8;
  int descriptor_sectors = 16;
  double descriptor_max_radius = 100.0;
  int descriptor_min_points = 10;
  int icp_ransac_iterations = 200;
  int icp_iterations = 50;
  double icp_min_inlier_fraction = 0.35;
  double icp_max_mean_residual = 0.5;
  uint64_t loop_seed = 7;

  // pose graph
  double graph_sigma_xy = 0.1;
  double graph_sigma_theta = 0.01;
  double graph_loop_huber_chi2 = 5.99;
  int graph_iterations = 100;

  // pipeline
  bool single_thread = false;

  // evaluation
  double eval_length_scale = 0.1;

  void set(const std::string& key, const std::string& value);
  void validate() const;

  TrackingParams tracking_params() const {
    TrackingParams p;
    p.raster_width = raster_width;
    p.raster_gamma = raster_gamma;
    p.max_keypoints = detector_max_keypoints;
    p.detector.octaves = detector_octaves;
    p.detector.response_threshold = detector_response_threshold;
    p.detector.max_keypoints = detector_max_keypoints;
    p.match_radius = match_radius;
    p.match.ratio = match_ratio;
    p.delta_c = delta_c;
    p.gates.displacement_gate = gate_displacement;
    p.gates.length_gate = gate_length;
    p.clique.exact_limit = clique_exact_limit;
    p.min_inliers = min_inliers;
    p.keyframe_min_matches = keyframe_min_matches;
    p.keyframe_max_translation = keyframe_max_translation;
    p.keyframe_max_rotation = keyframe_max_rotation_deg * M_PI / 180.0;
    p.huber_delta = tracking_huber;
    p.refine_max_iterations = refine_iterations;
    p.refine_tolerance = refine_tolerance;
    p.lost_recovery_frames = lost_recovery_frames;
    p.peaks.delta_p = peak_delta_p;
    p.peaks.delta_d = peak_delta_d;
    return p;
  }

  BaParams ba_params() const {
    BaParams p;
    p.window = ba_window;
    p.sigma = ba_sigma;
    p.huber_delta = ba_huber;
    p.max_iterations = ba_iterations;
    return p;
  }

  FusionParams fusion_params() const {
    FusionParams p;
    p.radius = fusion_radius;
    p.descriptor_distance = fusion_descriptor_distance;
    return p;
  }

  DescriptorParams descriptor_params() const {
    DescriptorParams p;
    p.rings = descriptor_rings;
    p.sectors = descriptor_sectors;
    p.max_radius = descriptor_max_radius;
    p.min_points = descriptor_min_points;
    return p;
  }

  QueryParams query_params() const {
    QueryParams p;
    p.k = loop_k;
    p.temporal_guard = loop_guard;
    p.max_distance = loop_max_descriptor_distance;
    return p;
  }

  IcpParams icp_params() const {
    IcpParams p;
    p.ransac_iterations = icp_ransac_iterations;
    p.max_iterations = icp_iterations;
    p.min_inlier_fraction = icp_min_inlier_fraction;
    p.max_mean_inlier_residual = icp_max_mean_residual;
    p.seed = loop_seed;
    return p;
  }

  Eigen::Matrix3d edge_information() const {
    Eigen::Matrix3d info = Eigen::Matrix3d::Zero();
    info(0, 0) = info(1, 1) = 1.0 / (graph_sigma_xy * graph_sigma_xy);
    info(2, 2) = 1.0 / (graph_sigma_theta * graph_sigma_theta);
    return info;
  }

  PoseGraphParams graph_params() const {
    PoseGraphParams p;
    p.max_iterations = graph_iterations;
    p.loop_huber_chi2 = graph_loop_huber_chi2;
    return p;
  }

};

namespace detail {

inline bool parse_bool(const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw std::invalid_argument("config: not a boolean: " + value);
}

}  // namespace detail

inline void PipelineConfig::set(const std::string& key,
                                const std::string& value) {
  auto d = [&] { return std::stod(value); };
  auto i = [&] { return std::stoi(value); };
  auto b = [&] { return detail::parse_bool(value); };

  if (key == "dataset.format") dataset_format = value;
  else if (key == "dataset.oxford_range_resolution") oxford_range_resolution = d();
  else if (key == "raster.width") raster_width = i();
  else if (key == "raster.gamma") raster_gamma = d();
  else if (key == "detector.octaves") detector_octaves = i();
  else if (key == "detector.response_threshold") detector_response_threshold = d();
  else if (key == "detector.max_keypoints") detector_max_keypoints = i();
  else if (key == "tracking.match_radius") match_radius = d();
  else if (key == "tracking.match_ratio") match_ratio = d();
  else if (key == "tracking.delta_c") delta_c = d();
  else if (key == "tracking.gate_displacement") gate_displacement = b();
  else if (key == "tracking.gate_length") gate_length = b();
  else if (key == "tracking.clique_exact_limit") clique_exact_limit = i();
  else if (key == "tracking.min_inliers") min_inliers = i();
  else if (key == "tracking.keyframe_min_matches") keyframe_min_matches = i();
  else if (key == "tracking.keyframe_max_translation") keyframe_max_translation = d();
  else if (key == "tracking.keyframe_max_rotation_deg") keyframe_max_rotation_deg = d();
  else if (key == "tracking.huber") tracking_huber = d();
  else if (key == "tracking.refine_iterations") refine_iterations = i();
  else if (key == "tracking.refine_tolerance") refine_tolerance = d();
  else if (key == "tracking.lost_recovery_frames") lost_recovery_frames = i();
  else if (key == "peaks.delta_p") peak_delta_p = d();
  else if (key == "peaks.delta_d") peak_delta_d = i();
  else if (key == "mapping.window") ba_window = i();
  else if (key == "mapping.sigma") ba_sigma = d();
  else if (key == "mapping.huber") ba_huber = d();
  else if (key == "mapping.iterations") ba_iterations = i();
  else if (key == "mapping.fusion_radius") fusion_radius = d();
  else if (key == "mapping.fusion_descriptor_distance") fusion_descriptor_distance = d();
  else if (key == "loop.enabled") loop_enabled = b();
  else if (key == "loop.k") loop_k = i();
  else if (key == "loop.guard") loop_guard = i();
  else if (key == "loop.max_descriptor_distance") loop_max_descriptor_distance = d();
  else if (key == "loop.descriptor_rings") descriptor_rings = i();
  else if (key == "loop.descriptor_sectors") descriptor_sectors = i();
  else if (key == "loop.descriptor_max_radius") descriptor_max_radius = d();
  else if (key == "loop.descriptor_min_points") descriptor_min_points = i();
  else if (key == "loop.icp_ransac_iterations") icp_ransac_iterations = i();
  else if (key == "loop.icp_iterations") icp_iterations = i();
  else if (key == "loop.icp_min_inlier_fraction") icp_min_inlier_fraction = d();
  else if (key == "loop.icp_max_mean_residual") icp_max_mean_residual = d();
  else if (key == "loop.seed") loop_seed = uint64_t(std::stoull(value));
  else if (key == "graph.sigma_xy") graph_sigma_xy = d();
  else if (key == "graph.sigma_theta") graph_sigma_theta = d();
  else if (key == "graph.loop_huber_chi2") graph_loop_huber_chi2 = d();
  else if (key == "graph.iterations") graph_iterations = i();
  else if (key == "pipeline.single_thread") single_thread = b();
  else if (key == "eval.length_scale") eval_length_scale = d();
  else throw std::invalid_argument("config: unknown key: " + key);
}

inline void PipelineConfig::validate() const {
  if (raster_width < 33 || raster_width % 2 == 0)
    throw std::invalid_argument("config: raster.width must be odd and >= 33");
  if (match_radius <= 0) throw std::invalid_argument("config: match radius <= 0");
  if (match_ratio <= 0 || match_ratio > 1)
    throw std::invalid_argument("config: match ratio outside (0, 1]");
  if (delta_c <= 0) throw std::invalid_argument("config: delta_c <= 0");
  if (peak_delta_p <= 0 || peak_delta_d < 1)
    throw std::invalid_argument("config: peak params invalid");
  if (ba_window < 1) throw std::invalid_argument("config: mapping.window < 1");
  if (graph_sigma_xy <= 0 || graph_sigma_theta <= 0)
    throw std::invalid_argument("config: graph sigmas must be positive");
  if (min_inliers < 2) throw std::invalid_argument("config: min_inliers < 2");
  if (descriptor_rings < 2 || descriptor_sectors < 4)
    throw std::invalid_argument("config: descriptor grid too small");
  if (dataset_format != "auto" && dataset_format != "bin" &&
      dataset_format != "oxford")
    throw std::invalid_argument("config: dataset.format must be auto|bin|oxford");
}

inline void apply_config_line(PipelineConfig& config, const std::string& line) {
  const auto hash = line.find('#');
  std::string body = hash == std::string::npos ? line : line.substr(0, hash);
  const auto eq = body.find('=');
  if (eq == std::string::npos) {
    // a bare line must be blank
    std::istringstream check(body);
    std::string token;
    if (check >> token)
      throw std::invalid_argument("config: malformed line: " + line);
    return;
  }
  auto trim = [](std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    const auto last = s.find_last_not_of(" \t\r");
    return first == std::string::npos ? std::string()
                                      : s.substr(first, last - first + 1);
  };
  config.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  PipelineConfig config;
  std::string line;
  while (std::getline(in, line)) apply_config_line(config, line);
  return config;
}

}  // namespace rslam
