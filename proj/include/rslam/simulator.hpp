#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rslam/rng.hpp"
#include "rslam/scan.hpp"
#include "rslam/se2.hpp"

namespace rslam {

struct Landmark {
  Point2 position;            // world frame, meters
  double reflectivity = 1.0;  // (0, 1]
};

struct World {
  std::vector<Landmark> landmarks;
  double bounds = 100.0;  // half-extent of the square world, meters
};

// Forward sensor model parameters. The three noise switches (speckle,
// saturation, multipath) model the classic radar artifacts; zeroing them
// gives a clean deterministic render.
struct SimConfig {
  int num_azimuths = 400;
  int num_bins = 1000;
  double range_resolution = 0.0432;  // meters per bin
  double speckle_rate = 8.0;         // expected false peaks per azimuth row
  double saturation_prob = 0.02;     // per-row probability of a saturated run
  double multipath_prob = 0.05;      // per-landmark ghost echo at 2x range
  double beam_width = 2.0;           // azimuth rows a return smears across
  uint64_t rng_seed = 1;
  // Shaping constants of the forward model.
  double range_sigma_bins = 1.5;  // radial blob width
  double noise_floor = 0.01;      // Rayleigh sigma of the clutter floor
  double speckle_amp = 0.06;      // Rayleigh sigma of false-peak amplitude
  double ghost_gain = 0.45;       // amplitude factor of multipath echoes
  double scan_period = 1.0;       // seconds between frames

  static SimConfig noiseless() {
    SimConfig cfg;
    cfg.speckle_rate = 0.0;
    cfg.saturation_prob = 0.0;
    cfg.multipath_prob = 0.0;
    cfg.noise_floor = 0.0;
    return cfg;
  }

  void validate() const {
    if (saturation_prob < 0 || saturation_prob > 1 || multipath_prob < 0 ||
        multipath_prob > 1 || speckle_rate < 0)
      throw std::invalid_argument("SimConfig: probabilities out of range");
    if (beam_width < 1.0)
      throw std::invalid_argument("SimConfig: beam_width must be >= 1");
  }
};

namespace detail {

// Max-combines a Gaussian power blob centered at fractional (azimuth, bin).
inline void splat_blob(PolarScan& scan, double a_f, double r_f, double amp,
                       const SimConfig& cfg) {
  const double sigma_a = std::max(cfg.beam_width / 2.0, 0.5);
  const double sigma_r = std::max(cfg.range_sigma_bins, 0.5);
  const int a_lo = int(std::floor(a_f - 3 * sigma_a));
  const int a_hi = int(std::ceil(a_f + 3 * sigma_a));
  const int r_lo = std::max(0, int(std::floor(r_f - 3 * sigma_r)));
  const int r_hi = std::min(scan.num_bins - 1, int(std::ceil(r_f + 3 * sigma_r)));
  for (int a = a_lo; a <= a_hi; ++a) {
    const double da = (a - a_f) / sigma_a;
    const int row = ((a % scan.num_azimuths) + scan.num_azimuths) %
                    scan.num_azimuths;
    for (int r = r_lo; r <= r_hi; ++r) {
      const double dr = (r - r_f) / sigma_r;
      const float v = float(amp * std::exp(-0.5 * (da * da + dr * dr)));
      float& cell = scan.at(row, r);
      if (v > cell) cell = v;
    }
  }
}

}  // namespace detail

// Renders the world seen from `pose`. Landmark returns are Gaussian blobs at
// their (azimuth, range) in the pose's local frame; the noise passes add a
// Rayleigh clutter floor, Poisson false peaks, multipath ghosts at doubled
// range and occasional row saturation. Deterministic given cfg.rng_seed.
inline PolarScan render_scan(const World& world, const Pose2& pose,
                             const SimConfig& cfg) {
  cfg.validate();
  if (world.landmarks.empty())
    throw std::invalid_argument("render_scan: world has no landmarks");
  if (std::abs(pose.x) > world.bounds || std::abs(pose.y) > world.bounds)
    throw std::invalid_argument("render_scan: pose outside world bounds");

  PolarScan scan(cfg.num_azimuths, cfg.num_bins, cfg.range_resolution);
  Rng rng(cfg.rng_seed);
  const Pose2 world_to_local = inverse(pose);
  const double az_scale = cfg.num_azimuths / (2.0 * M_PI);

  for (const Landmark& lm : world.landmarks) {
    const Point2 q = transform_point(world_to_local, lm.position);
    const double rho = q.norm();
    const double r_f = rho / cfg.range_resolution;
    if (r_f < 1.0 || r_f > scan.num_bins + 3 * cfg.range_sigma_bins) continue;
    double bearing = std::atan2(q.y(), q.x());
    if (bearing < 0) bearing += 2.0 * M_PI;
    const double a_f = bearing * az_scale;
    detail::splat_blob(scan, a_f, r_f, lm.reflectivity, cfg);
    if (cfg.multipath_prob > 0 && rng.uniform() < cfg.multipath_prob) {
      const double ghost_r = 2.0 * r_f;
      if (ghost_r < scan.num_bins - 1)
        detail::splat_blob(scan, a_f, ghost_r,
                           cfg.ghost_gain * lm.reflectivity, cfg);
    }
  }

  if (cfg.speckle_rate > 0) {
    for (int a = 0; a < scan.num_azimuths; ++a) {
      const int spikes = rng.poisson(cfg.speckle_rate);
      for (int s = 0; s < spikes; ++s) {
        const int bin = rng.uniform_int(scan.num_bins);
        const float amp = float(std::min(1.0, rng.rayleigh(cfg.speckle_amp)));
        float& cell = scan.at(a, bin);
        if (amp > cell) cell = amp;
      }
    }
  }

  if (cfg.noise_floor > 0) {
    for (float& cell : scan.power) {
      const float v = float(std::min(1.0, rng.rayleigh(cfg.noise_floor)));
      if (v > cell) cell = v;
    }
  }

  if (cfg.saturation_prob > 0) {
    for (int a = 0; a < scan.num_azimuths; ++a) {
      if (rng.uniform() >= cfg.saturation_prob) continue;
      const int len = scan.num_bins / 4 +
                      rng.uniform_int(std::max(1, 3 * scan.num_bins / 4));
      for (int b = 0; b < std::min(len, scan.num_bins); ++b) {
        float& cell = scan.at(a, b);
        if (cell < 0.95f) cell = 0.95f;
      }
    }
  }

  for (float& cell : scan.power) cell = std::min(cell, 1.f);
  return scan;
}

// One scan per pose; per-frame rng streams derived from cfg.rng_seed and the
// frame index, timestamps spaced by cfg.scan_period.
inline std::vector<PolarScan> render_sequence(const World& world,
                                              const std::vector<Pose2>& trajectory,
                                              const SimConfig& cfg) {
  for (const Pose2& p : trajectory)
    if (std::abs(p.x) > world.bounds || std::abs(p.y) > world.bounds)
      throw std::invalid_argument("render_sequence: pose outside bounds");
  std::vector<PolarScan> scans;
  scans.reserve(trajectory.size());
  for (size_t i = 0; i < trajectory.size(); ++i) {
    SimConfig frame_cfg = cfg;
    frame_cfg.rng_seed = Rng::derive(cfg.rng_seed, i);
    PolarScan scan = render_scan(world, trajectory[i], frame_cfg);
    scan.timestamp = double(i) * cfg.scan_period;
    scans.push_back(std::move(scan));
  }
  return scans;
}

// Seeded world generator used by the simulator CLI and the test fixtures:
// landmarks scattered uniformly with a minimum separation.
inline World make_random_world(int num_landmarks, double bounds,
                               uint64_t seed, double min_separation = 2.0) {
  World world;
  world.bounds = bounds;
  Rng rng(Rng::derive(seed, 77));
  int attempts = 0;
  while (int(world.landmarks.size()) < num_landmarks && attempts < 100000) {
    ++attempts;
    const Point2 p(rng.uniform(-bounds * 0.9, bounds * 0.9),
                   rng.uniform(-bounds * 0.9, bounds * 0.9));
    bool ok = true;
    for (const Landmark& lm : world.landmarks)
      if ((lm.position - p).norm() < min_separation) {
        ok = false;
        break;
      }
    if (!ok) continue;
    world.landmarks.push_back({p, rng.uniform(0.55, 1.0)});
  }
  return world;
}

// Closed loop trajectory on a circle, heading tangent to the path.
inline std::vector<Pose2> make_loop_trajectory(double radius, int frames,
                                               const Point2& center = {0, 0}) {
  std::vector<Pose2> poses;
  poses.reserve(frames);
  for (int i = 0; i < frames; ++i) {
    const double phi = 2.0 * M_PI * double(i) / frames;
    poses.emplace_back(wrap_angle(phi + M_PI / 2.0),
                       center.x() + radius * std::cos(phi),
                       center.y() + radius * std::sin(phi));
  }
  return poses;
}

}  // namespace rslam
