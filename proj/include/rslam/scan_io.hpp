#pragma once

#include <png.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rslam/scan.hpp"

namespace rslam {

// Portable binary scan format, little-endian:
//   header  { N_s: u32, N_b: u32, range_resolution: f64, timestamp: f64 }
//   payload row-major f32 power values (N_s * N_b of them).
inline void write_scan_bin(const PolarScan& scan, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  const uint32_t ns = uint32_t(scan.num_azimuths), nb = uint32_t(scan.num_bins);
  out.write(reinterpret_cast<const char*>(&ns), 4);
  out.write(reinterpret_cast<const char*>(&nb), 4);
  out.write(reinterpret_cast<const char*>(&scan.range_resolution), 8);
  out.write(reinterpret_cast<const char*>(&scan.timestamp), 8);
  out.write(reinterpret_cast<const char*>(scan.power.data()),
            std::streamsize(scan.power.size() * sizeof(float)));
  if (!out) throw std::runtime_error("short write: " + path);
}

inline PolarScan read_scan_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open scan: " + path);
  uint32_t ns = 0, nb = 0;
  double res = 0, time = 0;
  in.read(reinterpret_cast<char*>(&ns), 4);
  in.read(reinterpret_cast<char*>(&nb), 4);
  in.read(reinterpret_cast<char*>(&res), 8);
  in.read(reinterpret_cast<char*>(&time), 8);
  if (!in || ns < 4 || nb < 1 || res <= 0)
    throw std::runtime_error("bad scan header: " + path);
  PolarScan scan(int(ns), int(nb), res, time);
  in.read(reinterpret_cast<char*>(scan.power.data()),
          std::streamsize(scan.power.size() * sizeof(float)));
  if (!in) throw std::runtime_error("truncated scan payload: " + path);
  return scan;
}

namespace detail {

struct PngGray {
  int width = 0, height = 0;
  std::vector<uint8_t> data;  // row-major, 8-bit
};

inline PngGray read_png_gray(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw std::runtime_error("cannot open png: " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw std::runtime_error("png decode failed: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA)
    png_set_rgb_to_gray(png, 1, -1, -1);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  PngGray out;
  out.width = int(png_get_image_width(png, info));
  out.height = int(png_get_image_height(png, info));
  out.data.resize(size_t(out.width) * out.height);
  std::vector<png_bytep> rows(out.height);
  for (int r = 0; r < out.height; ++r)
    rows[r] = out.data.data() + size_t(r) * out.width;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return out;
}

inline void write_png_gray(const std::string& path, int width, int height,
                           const uint8_t* data) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw std::runtime_error("cannot open png for write: " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw std::runtime_error("png encode failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(height);
  for (int r = 0; r < height; ++r)
    rows[r] = const_cast<png_bytep>(data + size_t(r) * width);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace detail

// Oxford radar frame layout: one grey-scale PNG per scan, one row per
// azimuth. The first 11 columns of each row are metadata and are stripped:
// bytes 0..7 little-endian UNIX timestamp in microseconds, bytes 8..9 sweep
// counter, byte 10 valid flag. The remaining columns are the power returns,
// scaled from [0, 255] to [0, 1].
inline constexpr int kOxfordMetaColumns = 11;

inline PolarScan read_oxford_png(const std::string& path,
                                 double range_resolution = 0.0432) {
  const detail::PngGray img = detail::read_png_gray(path);
  if (img.width <= kOxfordMetaColumns || img.height < 4)
    throw std::runtime_error("not an Oxford radar frame: " + path);
  const int n_bins = img.width - kOxfordMetaColumns;
  PolarScan scan(img.height, n_bins, range_resolution);
  uint64_t stamp_us = 0;
  std::memcpy(&stamp_us, img.data.data(), 8);
  scan.timestamp = double(stamp_us) * 1e-6;
  for (int a = 0; a < img.height; ++a) {
    const uint8_t* row = img.data.data() + size_t(a) * img.width;
    float* out = scan.row_data(a);
    for (int b = 0; b < n_bins; ++b)
      out[b] = float(row[kOxfordMetaColumns + b]) / 255.f;
  }
  return scan;
}

// Writes the polar matrix as an Oxford-style PNG (metadata columns zeroed
// except the timestamp).
inline void write_oxford_png(const PolarScan& scan, const std::string& path) {
  const int width = scan.num_bins + kOxfordMetaColumns;
  std::vector<uint8_t> data(size_t(width) * scan.num_azimuths, 0);
  const uint64_t stamp_us = uint64_t(scan.timestamp * 1e6);
  for (int a = 0; a < scan.num_azimuths; ++a) {
    uint8_t* row = data.data() + size_t(a) * width;
    std::memcpy(row, &stamp_us, 8);
    row[8] = uint8_t(a & 0xff);
    row[9] = uint8_t(a >> 8);
    row[10] = 255;
    for (int b = 0; b < scan.num_bins; ++b) {
      const float v = std::clamp(scan.at(a, b), 0.f, 1.f);
      row[kOxfordMetaColumns + b] = uint8_t(std::lround(v * 255.f));
    }
  }
  detail::write_png_gray(path, width, scan.num_azimuths, data.data());
}

inline void write_cartesian_png(const CartesianImage& img,
                                const std::string& path) {
  std::vector<uint8_t> data(img.pixels.size());
  for (size_t i = 0; i < img.pixels.size(); ++i)
    data[i] = uint8_t(std::lround(std::clamp(img.pixels[i], 0.f, 1.f) * 255.f));
  detail::write_png_gray(path, img.width, img.width, data.data());
}

}  // namespace rslam
