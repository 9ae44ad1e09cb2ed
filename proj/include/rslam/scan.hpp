#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "rslam/se2.hpp"

namespace rslam {

// Raw 360 degree sweep: num_azimuths rows of num_bins power returns in [0,1].
// Azimuth row a covers ranging angle 2*pi*a/num_azimuths, counter-clockwise
// from the +x axis. Range bin r is centered at r * range_resolution meters.
struct PolarScan {
  int num_azimuths = 0;           // N_s
  int num_bins = 0;               // N_b
  double range_resolution = 0.0;  // meters per bin
  double timestamp = 0.0;         // seconds
  std::vector<float> power;       // row-major, num_azimuths x num_bins

  PolarScan() = default;
  PolarScan(int n_azimuths, int n_bins, double resolution, double time = 0.0)
      : num_azimuths(n_azimuths),
        num_bins(n_bins),
        range_resolution(resolution),
        timestamp(time),
        power(size_t(n_azimuths) * size_t(n_bins), 0.f) {
    if (n_azimuths < 4 || n_bins < 1 || resolution <= 0.0)
      throw std::invalid_argument(
          "PolarScan: need >= 4 azimuths, >= 1 bin, positive resolution");
  }

  float& at(int a, int b) { return power[size_t(a) * num_bins + b]; }
  float at(int a, int b) const { return power[size_t(a) * num_bins + b]; }
  std::span<const float> row(int a) const {
    return {power.data() + size_t(a) * num_bins, size_t(num_bins)};
  }
  float* row_data(int a) { return power.data() + size_t(a) * num_bins; }

  double max_range() const { return (num_bins - 1) * range_resolution; }
  double azimuth_step() const { return 2.0 * M_PI / num_azimuths; }
};

// Square grey-scale raster of a scan. width is odd so the radar origin sits
// exactly on the center pixel. Pixel coordinates are (column, row), metric
// +x along increasing column (azimuth 0), +y along increasing row.
struct CartesianImage {
  int width = 0;      // W, odd
  double gamma = 0.0; // meters per pixel
  std::vector<float> pixels;  // row-major W x W

  CartesianImage() = default;
  CartesianImage(int w, double g)
      : width(w), gamma(g), pixels(size_t(w) * size_t(w), 0.f) {
    if (w < 3 || w % 2 == 0 || g <= 0.0)
      throw std::invalid_argument(
          "CartesianImage: width must be odd >= 3 with gamma > 0");
  }

  double center() const { return (width - 1) / 2; }
  float& at(int col, int row) { return pixels[size_t(row) * width + col]; }
  float at(int col, int row) const {
    return pixels[size_t(row) * width + col];
  }

  // Bilinear sample at fractional pixel coordinates, clamped to the border.
  float sample(double col, double row) const {
    const double cx = std::clamp(col, 0.0, double(width - 1));
    const double cy = std::clamp(row, 0.0, double(width - 1));
    const int x0 = std::min(int(cx), width - 2);
    const int y0 = std::min(int(cy), width - 2);
    const double fx = cx - x0, fy = cy - y0;
    return float((1 - fx) * (1 - fy) * at(x0, y0) +
                 fx * (1 - fy) * at(x0 + 1, y0) +
                 (1 - fx) * fy * at(x0, y0 + 1) +
                 fx * fy * at(x0 + 1, y0 + 1));
  }
};

// Eq.-of-the-sensor geometry: polar sample (a, r) -> metric point
// (rho cos theta, rho sin theta) with rho = r * resolution and
// theta = 2 pi a / N_s. Fractional indices are allowed.
inline Point2 polar_point_to_cartesian(double azimuth_index, double range_bins,
                                       const PolarScan& meta) {
  if (azimuth_index < 0.0 || azimuth_index >= meta.num_azimuths)
    throw std::out_of_range("polar_point_to_cartesian: azimuth out of range");
  if (range_bins < 0.0)
    throw std::out_of_range("polar_point_to_cartesian: negative range");
  const double rho = range_bins * meta.range_resolution;
  const double theta = 2.0 * M_PI * azimuth_index / meta.num_azimuths;
  return {rho * std::cos(theta), rho * std::sin(theta)};
}

// Metric point of a (possibly fractional) pixel coordinate.
inline Point2 pixel_to_local(const Point2& pixel, const CartesianImage& img) {
  if (pixel.x() < 0 || pixel.x() > img.width - 1 || pixel.y() < 0 ||
      pixel.y() > img.width - 1)
    throw std::out_of_range("pixel_to_local: pixel outside image");
  const double c = img.center();
  return {img.gamma * (pixel.x() - c), img.gamma * (pixel.y() - c)};
}

inline Point2 local_to_pixel(const Point2& local, const CartesianImage& img) {
  const double c = img.center();
  return {local.x() / img.gamma + c, local.y() / img.gamma + c};
}

// gamma that fits the scan's maximum range inside a width-pixel raster.
inline double fit_gamma(const PolarScan& scan, int width) {
  return scan.max_range() / ((width - 1) / 2);
}

// Rasterizes the polar scan into a Cartesian grey-scale image. Every output
// pixel samples the polar matrix at its (azimuth, range) pre-image with
// bilinear interpolation; azimuth wraps modulo N_s, pixels beyond the last
// range bin are 0.
inline CartesianImage polar_to_cartesian_image(const PolarScan& scan,
                                               int width, double gamma) {
  CartesianImage img(width, gamma);
  const double c = img.center();
  const double inv_res = 1.0 / scan.range_resolution;
  const double az_scale = scan.num_azimuths / (2.0 * M_PI);
  const int n_az = scan.num_azimuths;
  const double max_bin = scan.num_bins - 1;
  for (int row = 0; row < width; ++row) {
    const double dy = gamma * (row - c);
    float* out = img.pixels.data() + size_t(row) * width;
    for (int col = 0; col < width; ++col) {
      const double dx = gamma * (col - c);
      const double rf = std::hypot(dx, dy) * inv_res;
      if (rf > max_bin) {
        out[col] = 0.f;
        continue;
      }
      double theta = std::atan2(dy, dx);
      if (theta < 0) theta += 2.0 * M_PI;
      double af = theta * az_scale;
      if (af >= n_az) af -= n_az;
      const int a0 = std::min(int(af), n_az - 1);
      const int a1 = (a0 + 1) % n_az;
      const double wa = af - a0;
      const int r0 = std::min(int(rf), scan.num_bins - 1);
      const int r1 = std::min(r0 + 1, scan.num_bins - 1);
      const double wr = rf - r0;
      out[col] = float((1 - wa) * ((1 - wr) * scan.at(a0, r0) +
                                   wr * scan.at(a0, r1)) +
                       wa * ((1 - wr) * scan.at(a1, r0) +
                             wr * scan.at(a1, r1)));
    }
  }
  return img;
}

}  // namespace rslam
