// Command line driver: simulate datasets, run the SLAM pipeline, evaluate
// trajectories and convert between scan formats.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "rslam/evaluation.hpp"
#include "rslam/pipeline.hpp"
#include "rslam/pointcloud.hpp"
#include "rslam/scan_io.hpp"
#include "rslam/simulator.hpp"

namespace fs = std::filesystem;
using namespace rslam;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> list_scan_files(const std::string& dir,
                                         const std::string& format) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    const bool is_bin = ext == ".bin";
    const bool is_png = ext == ".png";
    if (format == "bin" && !is_bin) continue;
    if (format == "oxford" && !is_png) continue;
    if (format == "auto" && !is_bin && !is_png) continue;
    files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no scan files in: " + dir);
  return files;
}

PolarScan load_scan(const std::string& path, double oxford_resolution) {
  if (fs::path(path).extension() == ".png")
    return read_oxford_png(path, oxford_resolution);
  return read_scan_bin(path);
}

Trajectory read_truth_csv(const std::string& path) {
  // accepts both (timestamp,x,y,theta) and the simulator's (frame,x,y,theta)
  return read_trajectory_csv(path);
}

int run_sim(const std::string& out_dir, int landmarks, double bounds,
            int frames, double radius, const std::string& shape,
            int azimuths, int bins, double resolution, uint64_t seed,
            bool no_noise, double speckle_rate, double yaw_drift_deg) {
  World world = make_random_world(landmarks, bounds, seed);
  if (int(world.landmarks.size()) < landmarks)
    std::cerr << "warning: placed only " << world.landmarks.size()
              << " landmarks\n";

  SimConfig cfg = no_noise ? SimConfig::noiseless() : SimConfig{};
  cfg.num_azimuths = azimuths;
  cfg.num_bins = bins;
  cfg.range_resolution = resolution;
  cfg.rng_seed = seed;
  if (speckle_rate >= 0) cfg.speckle_rate = speckle_rate;

  std::vector<Pose2> trajectory;
  if (shape == "loop") {
    trajectory = make_loop_trajectory(radius, frames);
  } else if (shape == "line") {
    const double step = 2.0 * radius / std::max(1, frames - 1);
    for (int i = 0; i < frames; ++i)
      trajectory.emplace_back(0.0, -radius + step * i, 0.0);
  } else {
    throw std::invalid_argument("unknown trajectory shape: " + shape);
  }

  auto scans = render_sequence(world, trajectory, cfg);
  if (yaw_drift_deg != 0.0) {
    // yaw-rate bias: frame i rotated by a growing number of azimuth rows
    const double total_rows = yaw_drift_deg / (360.0 / cfg.num_azimuths);
    for (size_t i = 0; i < scans.size(); ++i) {
      const int rows =
          int(std::lround(double(i) * total_rows / double(scans.size())));
      if (rows == 0) continue;
      PolarScan rotated = scans[i];
      for (int a = 0; a < scans[i].num_azimuths; ++a) {
        const int dst = (a + rows) % scans[i].num_azimuths;
        for (int b = 0; b < scans[i].num_bins; ++b)
          rotated.at(dst, b) = scans[i].at(a, b);
      }
      scans[i] = std::move(rotated);
    }
  }

  fs::create_directories(fs::path(out_dir) / "scans");
  char name[64];
  for (size_t i = 0; i < scans.size(); ++i) {
    std::snprintf(name, sizeof(name), "frame_%06zu.bin", i);
    write_scan_bin(scans[i], (fs::path(out_dir) / "scans" / name).string());
  }

  std::ofstream gt(fs::path(out_dir) / "groundtruth.csv");
  gt << "# frame,x,y,theta\n" << std::setprecision(17);
  for (size_t i = 0; i < trajectory.size(); ++i)
    gt << i << ',' << trajectory[i].x << ',' << trajectory[i].y << ','
       << trajectory[i].theta << '\n';

  std::ofstream wf(fs::path(out_dir) / "world.csv");
  wf << "# x,y,reflectivity\n" << std::setprecision(17);
  for (const Landmark& lm : world.landmarks)
    wf << lm.position.x() << ',' << lm.position.y() << ','
       << lm.reflectivity << '\n';

  std::ofstream meta(fs::path(out_dir) / "meta.txt");
  meta << "landmarks = " << world.landmarks.size() << "\n"
       << "frames = " << scans.size() << "\n"
       << "seed = " << seed << "\n"
       << "azimuths = " << azimuths << "\n"
       << "bins = " << bins << "\n"
       << "range_resolution = " << resolution << "\n"
       << "trajectory = " << shape << "\n"
       << "noise = " << (no_noise ? "off" : "on") << "\n"
       << "yaw_drift_deg = " << yaw_drift_deg << "\n";

  std::cout << "wrote " << scans.size() << " scans to " << out_dir << "\n";
  return kExitOk;
}

int run_slam_cmd(const std::string& dataset, const std::string& out_dir,
                 const std::string& config_path,
                 const std::vector<std::string>& overrides,
                 const std::string& truth_path, bool odometry_only,
                 bool single_thread, double length_scale) {
  PipelineConfig config;
  if (!config_path.empty()) config = load_config(config_path);
  for (const std::string& kv : overrides) apply_config_line(config, kv);
  if (odometry_only) config.loop_enabled = false;
  if (single_thread) config.single_thread = true;
  config.validate();

  const auto files = list_scan_files(dataset, config.dataset_format);
  std::cout << "dataset: " << files.size() << " scans\n";

  SlamPipeline pipeline(config);
  const double oxford_res = config.oxford_range_resolution;
  PipelineOutputs out = pipeline.run(
      [&](int i) { return load_scan(files[i], oxford_res); },
      int(files.size()));

  fs::create_directories(out_dir);
  write_trajectory_csv(out.rectified, (fs::path(out_dir) / "trajectory.csv").string());
  write_trajectory_csv(out.online,
                       (fs::path(out_dir) / "trajectory_online.csv").string());
  if (!out.keyframes.empty())
    write_trajectory_csv(out.keyframes,
                         (fs::path(out_dir) / "keyframes.csv").string());
  write_map_points_csv(out.map, (fs::path(out_dir) / "map_points.csv").string());
  out.graph.save((fs::path(out_dir) / "pose_graph.txt").string());
  write_timings(out.timings, (fs::path(out_dir) / "timings.txt").string());

  std::vector<Point2> map_points;
  for (const auto& [id, mp] : out.map.points) map_points.push_back(mp.position);

  std::cout << "keyframes: " << out.timings.keyframes
            << "  map points: " << out.map.points.size()
            << "  verified loops: " << out.verified_loops
            << "  lost frames: " << out.lost_frames << "\n"
            << "throughput: " << out.timings.fps() << " frames/s\n";

  if (!truth_path.empty()) {
    const Trajectory truth = read_truth_csv(truth_path);
    // align the estimate's start to the ground truth frame for plotting
    const auto pairs = associate(out.rectified, truth);
    Trajectory plotted = out.rectified;
    if (!pairs.empty()) {
      const Pose2 g = compose(truth.poses[pairs.front().second],
                              inverse(out.rectified.poses[pairs.front().first]));
      std::vector<Pose2> moved;
      for (const Pose2& p : out.rectified.poses) moved.push_back(compose(g, p));
      plotted = make_trajectory(out.rectified.timestamps, moved);
      for (Point2& p : map_points) p = transform_point(g, p);
    }
    KittiParams params;
    params.length_scale = length_scale;
    const auto kitti = kitti_errors(out.rectified, truth, params);
    const double ate_value = ate(out.rectified, truth);
    write_metrics_report((fs::path(out_dir) / "metrics.txt").string(),
                         (fs::path(out_dir) / "metrics.csv").string(), kitti,
                         ate_value, params.length_scale);
    write_trajectory_svg((fs::path(out_dir) / "map.svg").string(), plotted,
                         &truth, &map_points);
    if (kitti)
      std::cout << "kitti: " << kitti->translation_percent << " % / "
                << kitti->rotation_deg_per_m << " deg/m\n";
    std::cout << "ATE: " << ate_value << " m\n";
  } else {
    write_trajectory_svg((fs::path(out_dir) / "map.svg").string(),
                         out.rectified, nullptr, &map_points);
  }
  return kExitOk;
}

int run_eval_cmd(const std::string& estimate_path, const std::string& truth_path,
                 const std::string& out_dir, double length_scale) {
  const Trajectory estimate = read_trajectory_csv(estimate_path);
  const Trajectory truth = read_truth_csv(truth_path);
  KittiParams params;
  params.length_scale = length_scale;
  const auto kitti = kitti_errors(estimate, truth, params);
  const double ate_value = ate(estimate, truth);
  if (kitti)
    std::cout << "translation error: " << kitti->translation_percent << " %\n"
              << "rotation error:    " << kitti->rotation_deg_per_m
              << " deg/m\n"
              << "segments:          " << kitti->segments << "\n";
  else
    std::cout << "kitti metric undefined (no valid segments)\n";
  std::cout << "ATE (rmse): " << ate_value << " m\n";
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_metrics_report((fs::path(out_dir) / "metrics.txt").string(),
                         (fs::path(out_dir) / "metrics.csv").string(), kitti,
                         ate_value, length_scale);
    write_trajectory_svg((fs::path(out_dir) / "overlay.svg").string(),
                         estimate, &truth, nullptr);
  }
  return kExitOk;
}

int run_convert(const std::string& input, const std::string& output,
                std::string to, double resolution, int width) {
  if (to.empty()) {
    const std::string ext = fs::path(output).extension().string();
    to = ext == ".bin" ? "bin" : "png";
  }
  const PolarScan scan = load_scan(input, resolution);
  if (to == "bin") {
    write_scan_bin(scan, output);
  } else if (to == "png") {
    write_oxford_png(scan, output);
  } else if (to == "cart" || to == "cart-png") {
    const CartesianImage img =
        polar_to_cartesian_image(scan, width, fit_gamma(scan, width));
    write_cartesian_png(img, output);
  } else if (to == "cloud" || to == "cloud-csv") {
    write_point_cloud_csv(extract(scan, PeakParams{}), output);
  } else {
    throw std::invalid_argument("unknown conversion target: " + to);
  }
  std::cout << "wrote " << output << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radar graph SLAM pipeline"};
  app.require_subcommand(1);

  // slam
  auto* slam = app.add_subcommand("slam", "run the pipeline over a dataset");
  std::string dataset, out_dir = "slam_out", config_path, truth_path;
  std::vector<std::string> overrides;
  bool odometry_only = false, single_thread = false;
  double length_scale = 0.1;
  slam->add_option("--dataset", dataset, "directory of .bin or Oxford .png scans")
      ->required();
  slam->add_option("--output", out_dir, "output directory");
  slam->add_option("--config", config_path, "key=value config file");
  slam->add_option("--set", overrides, "config override, key=value");
  slam->add_option("--truth", truth_path, "ground-truth trajectory CSV");
  slam->add_flag("--odometry-only", odometry_only, "disable loop closure");
  slam->add_flag("--single-thread", single_thread, "serialize the pipeline");
  slam->add_option("--length-scale", length_scale,
                   "KITTI segment scale for evaluation");

  // sim
  auto* sim = app.add_subcommand("sim", "render a synthetic radar dataset");
  std::string sim_out = "sim_out", shape = "loop";
  int landmarks = 420, frames = 200, azimuths = 400, bins = 350;
  double bounds = 60, radius = 40, resolution = 0.1, speckle_rate = -1,
         yaw_drift = 0;
  uint64_t seed = 1;
  bool no_noise = false;
  sim->add_option("--output", sim_out, "output directory");
  sim->add_option("--landmarks", landmarks, "number of reflectors");
  sim->add_option("--bounds", bounds, "world half-extent, meters");
  sim->add_option("--frames", frames, "trajectory length");
  sim->add_option("--radius", radius, "loop radius / line half-length");
  sim->add_option("--trajectory", shape, "loop | line");
  sim->add_option("--azimuths", azimuths, "rows per scan");
  sim->add_option("--bins", bins, "range bins per row");
  sim->add_option("--resolution", resolution, "meters per bin");
  sim->add_option("--seed", seed, "rng seed");
  sim->add_flag("--no-noise", no_noise, "disable all noise sources");
  sim->add_option("--speckle-rate", speckle_rate,
                  "override expected false peaks per row");
  sim->add_option("--yaw-drift-deg", yaw_drift,
                  "total yaw bias injected across the sequence");

  // eval
  auto* eval = app.add_subcommand("eval", "compare trajectories");
  std::string est_path, eval_truth, eval_out;
  double eval_scale = 0.1;
  eval->add_option("--estimate", est_path, "estimated trajectory CSV")->required();
  eval->add_option("--truth", eval_truth, "ground truth CSV")->required();
  eval->add_option("--output", eval_out, "report directory");
  eval->add_option("--length-scale", eval_scale, "KITTI segment scale");

  // convert
  auto* convert = app.add_subcommand("convert", "convert scan formats");
  std::string conv_in, conv_out, conv_to;
  double conv_res = 0.0432;
  int conv_width = 801;
  convert->add_option("--input", conv_in, "scan file (.bin or .png)")->required();
  convert->add_option("--output", conv_out, "output file")->required();
  convert->add_option("--to", conv_to, "bin | png | cart-png | cloud-csv");
  convert->add_option("--resolution", conv_res, "range resolution for png input");
  convert->add_option("--width", conv_width, "raster width for cart-png");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (slam->parsed())
      return run_slam_cmd(dataset, out_dir, config_path, overrides, truth_path,
                          odometry_only, single_thread, length_scale);
    if (sim->parsed())
      return run_sim(sim_out, landmarks, bounds, frames, radius, shape,
                     azimuths, bins, resolution, seed, no_noise, speckle_rate,
                     yaw_drift);
    if (eval->parsed())
      return run_eval_cmd(est_path, eval_truth, eval_out, eval_scale);
    if (convert->parsed())
      return run_convert(conv_in, conv_out, conv_to, conv_res, conv_width);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
