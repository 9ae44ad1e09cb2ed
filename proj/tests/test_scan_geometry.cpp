#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "rslam/rng.hpp"
#include "rslam/scan.hpp"
#include "rslam/scan_io.hpp"

using namespace rslam;

namespace {

PolarScan meta_scan(int n_az = 400, int n_bins = 1000, double res = 0.0432) {
  return PolarScan(n_az, n_bins, res);
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("polar point geometry", "[scan]") {
  const PolarScan scan = meta_scan();
  // 4.32 cm resolution: bin 10 on azimuth 0 sits at x = 0.432 m
  Point2 p = polar_point_to_cartesian(0, 10, scan);
  CHECK(p.x() == Catch::Approx(0.432).margin(1e-12));
  CHECK(p.y() == Catch::Approx(0.0).margin(1e-12));

  const PolarScan unit(400, 100, 1.0);
  p = polar_point_to_cartesian(unit.num_azimuths / 4, 1, unit);
  CHECK(p.x() == Catch::Approx(0.0).margin(1e-12));
  CHECK(p.y() == Catch::Approx(1.0).margin(1e-12));

  const PolarScan half(400, 100, 0.5);
  p = polar_point_to_cartesian(half.num_azimuths / 2, 2, half);
  CHECK(p.x() == Catch::Approx(-1.0).margin(1e-12));
  CHECK(p.y() == Catch::Approx(0.0).margin(1e-12));

  CHECK_THROWS_AS(polar_point_to_cartesian(400, 1, scan), std::out_of_range);
  CHECK_THROWS_AS(polar_point_to_cartesian(-1, 1, scan), std::out_of_range);
}

TEST_CASE("polar round trip recovers range and angle", "[scan]") {
  const PolarScan scan = meta_scan();
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    const int a = rng.uniform_int(scan.num_azimuths);
    const double r = rng.uniform(0.5, scan.num_bins - 1.0);
    const Point2 p = polar_point_to_cartesian(a, r, scan);
    const double rho = p.norm();
    double theta = std::atan2(p.y(), p.x());
    if (theta < 0) theta += 2 * M_PI;
    CHECK(std::abs(rho - r * scan.range_resolution) < 1e-9);
    CHECK(std::abs(wrap_angle(theta - 2 * M_PI * a / scan.num_azimuths)) <
          1e-9);
  }
}

TEST_CASE("azimuth shift rotates points by the azimuth step", "[scan]") {
  const PolarScan scan = meta_scan();
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const int a = rng.uniform_int(scan.num_azimuths);
    const int k = rng.uniform_int(scan.num_azimuths);
    const double r = rng.uniform(1.0, scan.num_bins - 1.0);
    const Point2 base = polar_point_to_cartesian(a, r, scan);
    const Point2 shifted =
        polar_point_to_cartesian((a + k) % scan.num_azimuths, r, scan);
    const Pose2 rot(2 * M_PI * k / scan.num_azimuths, 0, 0);
    CHECK((shifted - transform_point(rot, base)).norm() < 1e-9);
  }
}

TEST_CASE("rasterization of flat and sparse scans", "[scan]") {
  PolarScan scan(64, 128, 0.25);
  const int width = 129;
  const double gamma = fit_gamma(scan, width);

  SECTION("all-zero scan gives an all-zero image") {
    const CartesianImage img = polar_to_cartesian_image(scan, width, gamma);
    for (float v : img.pixels) CHECK(v == 0.f);
  }

  SECTION("uniform scan gives uniform in-range pixels") {
    for (float& v : scan.power) v = 0.5f;
    const CartesianImage img = polar_to_cartesian_image(scan, width, gamma);
    const double c = img.center();
    int checked = 0;
    for (int row = 0; row < width; ++row)
      for (int col = 0; col < width; ++col) {
        const double rho = std::hypot(gamma * (col - c), gamma * (row - c));
        if (rho / scan.range_resolution > scan.num_bins - 1) continue;
        ++checked;
        CHECK(img.at(col, row) == Catch::Approx(0.5).margin(1e-6));
      }
    CHECK(checked > 1000);
  }

  SECTION("single saturated bin lands on the +x axis") {
    const int k = 80;
    scan.at(0, k) = 1.f;
    const CartesianImage img = polar_to_cartesian_image(scan, width, gamma);
    int best_col = -1, best_row = -1;
    float best = -1.f;
    for (int row = 0; row < width; ++row)
      for (int col = 0; col < width; ++col)
        if (img.at(col, row) > best) {
          best = img.at(col, row);
          best_col = col;
          best_row = row;
        }
    REQUIRE(best > 0.f);
    const double expected_col = img.center() + k * scan.range_resolution / gamma;
    CHECK(std::abs(best_col - expected_col) <= 1.0);
    CHECK(std::abs(best_row - img.center()) <= 1.0);
  }
}

TEST_CASE("image energy is invariant to azimuth rotation", "[scan]") {
  PolarScan scan(128, 200, 0.25);
  Rng rng(11);
  for (float& v : scan.power) v = float(rng.uniform());
  const int width = 201;
  const double gamma = fit_gamma(scan, width);

  auto energy = [&](const PolarScan& s) {
    const CartesianImage img = polar_to_cartesian_image(s, width, gamma);
    double e = 0;
    for (float v : img.pixels) e += v;
    return e;
  };

  const double base = energy(scan);
  for (int k : {1, 17, 64}) {
    PolarScan rotated = scan;
    for (int a = 0; a < scan.num_azimuths; ++a)
      for (int b = 0; b < scan.num_bins; ++b)
        rotated.at((a + k) % scan.num_azimuths, b) = scan.at(a, b);
    CHECK(std::abs(energy(rotated) - base) / base < 0.01);
  }
}

TEST_CASE("pixel to local frame", "[scan]") {
  const CartesianImage img(401, 0.25);
  const double c = img.center();
  CHECK((pixel_to_local({c, c}, img) - Point2(0, 0)).norm() < 1e-12);
  CHECK((pixel_to_local({c + 10, c}, img) - Point2(2.5, 0)).norm() < 1e-12);
  CHECK_THROWS_AS(pixel_to_local({-1, 0}, img), std::out_of_range);

  // round trip through integer pixel snapping stays within gamma/2
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    const Point2 local(rng.uniform(-40, 40), rng.uniform(-40, 40));
    const Point2 px = local_to_pixel(local, img);
    const Point2 snapped(std::round(px.x()), std::round(px.y()));
    const Point2 back = pixel_to_local(snapped, img);
    CHECK(std::abs(back.x() - local.x()) <= img.gamma / 2 + 1e-12);
    CHECK(std::abs(back.y() - local.y()) <= img.gamma / 2 + 1e-12);
  }
}

TEST_CASE("binary scan format round trips bit-exactly", "[scan]") {
  PolarScan scan(32, 64, 0.125, 17.25);
  Rng rng(23);
  for (float& v : scan.power) v = float(rng.uniform());
  const std::string path = temp_path("rslam_scan_roundtrip.bin");
  write_scan_bin(scan, path);
  const PolarScan loaded = read_scan_bin(path);
  CHECK(loaded.num_azimuths == scan.num_azimuths);
  CHECK(loaded.num_bins == scan.num_bins);
  CHECK(loaded.range_resolution == scan.range_resolution);
  CHECK(loaded.timestamp == scan.timestamp);
  CHECK(loaded.power == scan.power);
  std::remove(path.c_str());
}

TEST_CASE("oxford png round trip strips metadata columns", "[scan]") {
  PolarScan scan(16, 40, 0.0432, 1547131046.353776);
  Rng rng(31);
  for (float& v : scan.power) v = float(rng.uniform());
  const std::string path = temp_path("rslam_oxford.png");
  write_oxford_png(scan, path);
  const PolarScan loaded = read_oxford_png(path, scan.range_resolution);
  REQUIRE(loaded.num_azimuths == scan.num_azimuths);
  REQUIRE(loaded.num_bins == scan.num_bins);
  CHECK(std::abs(loaded.timestamp - scan.timestamp) < 1e-5);
  for (int a = 0; a < scan.num_azimuths; ++a)
    for (int b = 0; b < scan.num_bins; ++b)
      CHECK(std::abs(loaded.at(a, b) - scan.at(a, b)) <= 0.5f / 255.f + 1e-6f);
  std::remove(path.c_str());
}
