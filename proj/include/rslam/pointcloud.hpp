#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rslam/scan.hpp"
#include "rslam/se2.hpp"

namespace rslam {

struct PeakParams {
  double delta_p = 0.05;  // minimum peak prominence, normalized power
  int delta_d = 10;       // minimum peak distance, range bins

  void validate() const {
    if (delta_p <= 0 || delta_d < 1)
      throw std::invalid_argument("PeakParams: delta_p > 0, delta_d >= 1");
  }
};

struct Peak {
  int bin = 0;
  float power = 0.f;
};

struct RadarPointCloud {
  std::vector<Point2> points;  // scan-local meters
  int64_t source_scan_id = -1;
};

// Local maxima of one power row, filtered by topographic prominence and
// minimum peak distance. The row is treated as bounded by zero at both ends;
// a peak's prominence is measured against the lower of the two enclosing
// valley minima. Among peaks closer than delta_d bins only the highest
// survives, ties going to the lower bin index. Output is sorted by bin.
inline std::vector<Peak> find_peaks(std::span<const float> row,
                                    const PeakParams& params) {
  params.validate();
  const int n = int(row.size());
  if (n == 0) throw std::invalid_argument("find_peaks: empty row");

  std::vector<Peak> candidates;
  auto value = [&](int i) -> float {
    return (i < 0 || i >= n) ? 0.f : row[i];
  };
  for (int i = 0; i < n; ++i) {
    if (row[i] <= 0.f) continue;
    if (row[i] > value(i - 1) && row[i] > value(i + 1))
      candidates.push_back({i, row[i]});
  }

  std::vector<Peak> prominent;
  for (const Peak& p : candidates) {
    float left_min = p.power, right_min = p.power;
    for (int j = p.bin - 1;; --j) {
      const float v = value(j);
      left_min = std::min(left_min, v);
      if (j < 0 || v > p.power) break;
    }
    for (int j = p.bin + 1;; ++j) {
      const float v = value(j);
      right_min = std::min(right_min, v);
      if (j >= n || v > p.power) break;
    }
    if (p.power - std::min(left_min, right_min) >= params.delta_p)
      prominent.push_back(p);
  }

  // Highest-first suppression inside the delta_d neighborhood.
  std::sort(prominent.begin(), prominent.end(), [](const Peak& a, const Peak& b) {
    if (a.power != b.power) return a.power > b.power;
    return a.bin < b.bin;
  });
  std::vector<Peak> kept;
  for (const Peak& p : prominent) {
    bool suppressed = false;
    for (const Peak& k : kept)
      if (std::abs(k.bin - p.bin) < params.delta_d) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(p);
  }
  std::sort(kept.begin(), kept.end(),
            [](const Peak& a, const Peak& b) { return a.bin < b.bin; });
  return kept;
}

namespace detail {

// population statistics; the fixed convention for reproducibility
inline std::pair<double, double> mean_and_stddev(std::span<const Peak> peaks) {
  double mean = 0;
  for (const Peak& p : peaks) mean += p.power;
  mean /= double(peaks.size());
  double var = 0;
  for (const Peak& p : peaks) var += (p.power - mean) * (p.power - mean);
  var /= double(peaks.size());
  return {mean, std::sqrt(var)};
}

}  // namespace detail

// Converts a scan to a point cloud by keeping, per azimuth row, the peaks
// whose power reaches one standard deviation above the mean of that row's
// peak powers. Rows with a single surviving candidate fall back to the
// whole-scan statistics since a one-sample sigma is undefined. Output order
// is row-major deterministic.
inline RadarPointCloud extract(const PolarScan& scan, const PeakParams& params) {
  std::vector<std::vector<Peak>> row_peaks(scan.num_azimuths);
  std::vector<Peak> all;
  for (int a = 0; a < scan.num_azimuths; ++a) {
    row_peaks[a] = find_peaks(scan.row(a), params);
    all.insert(all.end(), row_peaks[a].begin(), row_peaks[a].end());
  }

  double global_threshold = std::numeric_limits<double>::infinity();
  if (all.size() >= 2) {
    const auto [mu, sigma] = detail::mean_and_stddev(all);
    global_threshold = mu + sigma;
  } else if (all.size() == 1) {
    global_threshold = all[0].power;
  }

  RadarPointCloud cloud;
  for (int a = 0; a < scan.num_azimuths; ++a) {
    const auto& peaks = row_peaks[a];
    if (peaks.empty()) continue;
    double threshold;
    if (peaks.size() >= 2) {
      const auto [mu, sigma] = detail::mean_and_stddev(peaks);
      threshold = mu + sigma;
    } else {
      threshold = global_threshold;
    }
    for (const Peak& p : peaks)
      if (p.power >= float(threshold))
        cloud.points.push_back(polar_point_to_cartesian(a, p.bin, scan));
  }
  return cloud;
}

inline void write_point_cloud_csv(const RadarPointCloud& cloud,
                                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write point cloud: " + path);
  out << "# x,y\n" << std::setprecision(17);
  for (const Point2& p : cloud.points) out << p.x() << ',' << p.y() << '\n';
}

}  // namespace rslam
