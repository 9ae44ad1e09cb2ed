#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rslam/config.hpp"

using namespace rslam;

TEST_CASE("config lines parse key = value with comments", "[config]") {
  PipelineConfig cfg;
  apply_config_line(cfg, "tracking.delta_c = 0.7");
  apply_config_line(cfg, "  loop.guard=12   # trailing comment");
  apply_config_line(cfg, "# full comment line");
  apply_config_line(cfg, "");
  apply_config_line(cfg, "pipeline.single_thread = true");
  CHECK(cfg.delta_c == Catch::Approx(0.7));
  CHECK(cfg.loop_guard == 12);
  CHECK(cfg.single_thread);
}

TEST_CASE("unknown keys and malformed lines are rejected", "[config]") {
  PipelineConfig cfg;
  CHECK_THROWS_AS(apply_config_line(cfg, "nonsense.key = 3"),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_config_line(cfg, "not a key value line"),
                  std::invalid_argument);
  CHECK_THROWS_AS(apply_config_line(cfg, "tracking.gate_length = maybe"),
                  std::invalid_argument);
}

TEST_CASE("validation enforces module preconditions", "[config]") {
  PipelineConfig cfg;
  CHECK_NOTHROW(cfg.validate());

  SECTION("raster width must be odd") {
    cfg.raster_width = 400;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SECTION("delta_c must be positive") {
    cfg.delta_c = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SECTION("peak params must be sane") {
    cfg.peak_delta_d = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SECTION("dataset format is a known token") {
    cfg.dataset_format = "csv";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
}

TEST_CASE("config files round trip through the loader", "[config]") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "rslam_cfg.txt").string();
  {
    std::ofstream out(path);
    out << "# pipeline settings\n";
    out << "raster.width = 401\n";
    out << "detector.max_keypoints = 321\n";
    out << "loop.enabled = false\n";
    out << "graph.sigma_xy = 0.25\n";
  }
  const PipelineConfig cfg = load_config(path);
  CHECK(cfg.raster_width == 401);
  CHECK(cfg.detector_max_keypoints == 321);
  CHECK(!cfg.loop_enabled);
  CHECK(cfg.graph_sigma_xy == Catch::Approx(0.25));
  std::remove(path.c_str());
}

TEST_CASE("derived parameter structs carry the configured values", "[config]") {
  PipelineConfig cfg;
  cfg.keyframe_max_rotation_deg = 10.0;
  cfg.match_radius = 7.5;
  cfg.gate_displacement = false;
  const TrackingParams tp = cfg.tracking_params();
  CHECK(tp.keyframe_max_rotation == Catch::Approx(10.0 * M_PI / 180.0));
  CHECK(tp.match_radius == 7.5);
  CHECK(!tp.gates.displacement_gate);

  cfg.graph_sigma_xy = 0.2;
  const Eigen::Matrix3d info = cfg.edge_information();
  CHECK(info(0, 0) == Catch::Approx(25.0));
  CHECK(info(2, 2) == Catch::Approx(1.0 / (0.01 * 0.01)));
}
