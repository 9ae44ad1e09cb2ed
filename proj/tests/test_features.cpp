#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "rslam/features.hpp"
#include "rslam/rng.hpp"
#include "rslam/simulator.hpp"

using namespace rslam;

namespace {

void paint_blob(CartesianImage& img, double col, double row, double sigma,
                double amp) {
  const int r_lo = std::max(0, int(row - 4 * sigma));
  const int r_hi = std::min(img.width - 1, int(row + 4 * sigma));
  const int c_lo = std::max(0, int(col - 4 * sigma));
  const int c_hi = std::min(img.width - 1, int(col + 4 * sigma));
  for (int r = r_lo; r <= r_hi; ++r)
    for (int c = c_lo; c <= c_hi; ++c) {
      const double d2 = (r - row) * (r - row) + (c - col) * (c - col);
      const float v = float(amp * std::exp(-d2 / (2 * sigma * sigma)));
      if (v > img.at(c, r)) img.at(c, r) = v;
    }
}

// main blob plus a couple of satellites so every neighborhood is distinct;
// two bare Gaussians of equal sigma would produce identical descriptors
void paint_cluster(CartesianImage& img, Rng& rng, double col, double row,
                   double sigma, double amp) {
  paint_blob(img, col, row, sigma, amp);
  const int satellites = 2 + rng.uniform_int(2);
  for (int s = 0; s < satellites; ++s) {
    const double ang = rng.uniform(0, 2 * M_PI);
    const double dist = rng.uniform(2.5, 5.0) * sigma;
    paint_blob(img, col + dist * std::cos(ang), row + dist * std::sin(ang),
               sigma * rng.uniform(0.4, 0.7), amp * rng.uniform(0.3, 0.6));
  }
}

}  // namespace

TEST_CASE("detector on empty and single-blob images", "[features]") {
  SECTION("all-zero image yields nothing") {
    const CartesianImage img(257, 0.25);
    CHECK(detect(img, 100).keypoints.empty());
  }

  SECTION("bright blob is found within 2 px") {
    CartesianImage img(257, 0.25);
    paint_blob(img, 100.0, 140.0, 4.0, 0.9);
    const FrameFeatures f = detect(img, 100);
    REQUIRE(!f.keypoints.empty());
    bool found = false;
    for (const Keypoint& kp : f.keypoints)
      if ((kp.pixel - Point2(100, 140)).norm() <= 2.0) found = true;
    CHECK(found);
  }

  SECTION("duplicate calls are identical") {
    CartesianImage img(257, 0.25);
    Rng rng(3);
    for (int i = 0; i < 25; ++i)
      paint_blob(img, rng.uniform(40, 215), rng.uniform(40, 215),
                 rng.uniform(2, 6), rng.uniform(0.4, 1.0));
    const FrameFeatures a = detect(img, 200);
    const FrameFeatures b = detect(img, 200);
    REQUIRE(a.keypoints.size() == b.keypoints.size());
    for (size_t i = 0; i < a.keypoints.size(); ++i) {
      CHECK(a.keypoints[i].pixel == b.keypoints[i].pixel);
      CHECK(a.keypoints[i].response == b.keypoints[i].response);
      CHECK(a.descriptors[i].vector == b.descriptors[i].vector);
    }
  }
}

TEST_CASE("keypoint contract", "[features]") {
  CartesianImage img(257, 0.3);
  Rng rng(7);
  for (int i = 0; i < 30; ++i)
    paint_blob(img, rng.uniform(40, 215), rng.uniform(40, 215),
               rng.uniform(2, 7), rng.uniform(0.3, 1.0));
  const FrameFeatures f = detect(img, 64);
  REQUIRE(!f.keypoints.empty());
  CHECK(f.keypoints.size() <= 64);
  for (size_t i = 0; i < f.keypoints.size(); ++i) {
    const Keypoint& kp = f.keypoints[i];
    // position consistent with the raster mapping
    CHECK((kp.position - pixel_to_local(kp.pixel, img)).norm() <=
          img.gamma / 2);
    // descriptors normalized
    CHECK(f.descriptors[i].vector.norm() == Catch::Approx(1.0).margin(1e-6));
    // sorted by response
    if (i > 0) CHECK(f.keypoints[i - 1].response >= kp.response);
  }
}

TEST_CASE("gated matching basics", "[features]") {
  CartesianImage img(257, 0.3);
  Rng rng(11);
  for (int i = 0; i < 14; ++i)
    paint_cluster(img, rng, rng.uniform(48, 208), rng.uniform(48, 208),
                  rng.uniform(2.5, 5.0), rng.uniform(0.4, 1.0));
  const FrameFeatures f = detect(img, 100);
  REQUIRE(f.keypoints.size() >= 10);

  SECTION("identical sets self-match at distance zero") {
    const MatchSet m = match_gated(f, f, 1000.0);
    CHECK(m.pairs.size() == f.keypoints.size());
    for (const Match& match : m.pairs) {
      CHECK(match.query_index == match.train_index);
      CHECK(match.distance == Catch::Approx(0.0).margin(1e-12));
    }
  }

  SECTION("translation beyond the gate empties the match set") {
    FrameFeatures shifted = f;
    const double radius = 5.0;
    // shift past the whole image extent so every pairing exceeds the gate
    for (Keypoint& kp : shifted.keypoints)
      kp.position += Point2(img.width * img.gamma + 2 * radius, 0);
    CHECK(match_gated(f, shifted, radius).pairs.empty());
  }

  SECTION("matches are one-to-one and inside the gate") {
    FrameFeatures jittered = f;
    Rng jrng(13);
    for (Keypoint& kp : jittered.keypoints)
      kp.position += Point2(jrng.uniform(-1, 1), jrng.uniform(-1, 1));
    const double radius = 3.0;
    const MatchSet m = match_gated(f, jittered, radius);
    std::set<int> qs, ts;
    for (const Match& match : m.pairs) {
      CHECK((f.keypoints[match.query_index].position -
             jittered.keypoints[match.train_index].position)
                .norm() <= radius);
      CHECK(qs.insert(match.query_index).second);
      CHECK(ts.insert(match.train_index).second);
    }
  }
}

TEST_CASE("simulated pair with a known shift matches mostly true blobs",
          "[features]") {
  const World world = make_random_world(35, 30, 17, 4.0);
  SimConfig cfg = SimConfig::noiseless();
  cfg.num_azimuths = 400;
  cfg.num_bins = 400;
  cfg.range_resolution = 0.1;

  const Pose2 pose_t = Pose2::identity();
  const Pose2 pose_k(0.0, 1.0, 0.0);  // 1 m shift
  const PolarScan scan_t = render_scan(world, pose_t, cfg);
  const PolarScan scan_k = render_scan(world, pose_k, cfg);
  const int width = 401;
  const double gamma = fit_gamma(scan_t, width);
  const FrameFeatures ft =
      detect(polar_to_cartesian_image(scan_t, width, gamma), 300);
  const FrameFeatures fk =
      detect(polar_to_cartesian_image(scan_k, width, gamma), 300);
  REQUIRE(ft.keypoints.size() >= 20);

  const MatchSet m = match_gated(ft, fk, 5.0);
  REQUIRE(m.pairs.size() >= 10);

  // ground truth correspondence: a correct match maps both keypoints to the
  // same static world location
  int correct = 0;
  for (const Match& match : m.pairs) {
    const Point2 wt =
        transform_point(pose_t, ft.keypoints[match.query_index].position);
    const Point2 wk =
        transform_point(pose_k, fk.keypoints[match.train_index].position);
    if ((wt - wk).norm() < 0.5) ++correct;
  }
  CHECK(double(correct) / double(m.pairs.size()) >= 0.8);
}

TEST_CASE("shrinking the gate radius only removes pairs", "[features]") {
  // orthogonal descriptors isolate the gate: keypoint i can only ever match
  // its namesake, so the output is exactly the set of gated true pairs. Two
  // zero-offset anchors per cluster keep every query supplied with at least
  // two candidates, which stops the lone-candidate auto-accept from pairing
  // strangers when a namesake leaves the gate.
  Rng rng(19);
  FrameFeatures query, train;
  int index = 0;
  auto add_pair = [&](const Point2& qpos, const Point2& offset) {
    Keypoint kq, kt;
    kq.position = qpos;
    kt.position = qpos + offset;
    query.keypoints.push_back(kq);
    train.keypoints.push_back(kt);
    Eigen::VectorXf basis = Eigen::VectorXf::Zero(128);
    basis[index++ % 128] = 1.f;
    query.descriptors.push_back({basis});
    train.descriptors.push_back({basis});
  };
  for (int c = 0; c < 25; ++c) {
    const Point2 center(rng.uniform(-40, 40), rng.uniform(-40, 40));
    add_pair(center + Point2(0.10, 0.0), {0, 0});
    add_pair(center + Point2(-0.10, 0.0), {0, 0});
    const double mag = rng.uniform(0.0, 10.0);
    const double ang = rng.uniform(0, 2 * M_PI);
    add_pair(center, mag * Point2(std::cos(ang), std::sin(ang)));
  }
  const int n = int(query.keypoints.size());

  auto pair_set = [](const MatchSet& m) {
    std::set<std::pair<int, int>> s;
    for (const Match& match : m.pairs)
      s.insert({match.query_index, match.train_index});
    return s;
  };

  std::set<std::pair<int, int>> previous;
  bool first = true;
  for (double radius : {12.0, 8.0, 5.0, 2.0, 0.5}) {
    const auto pairs = pair_set(match_gated(query, train, radius));
    // the returned set is exactly the gated namesake pairs
    for (int i = 0; i < n; ++i) {
      const bool gated = (query.keypoints[i].position -
                          train.keypoints[i].position)
                             .norm() <= radius;
      CHECK(pairs.count({i, i}) == size_t(gated));
    }
    if (!first)
      for (const auto& p : pairs) CHECK(previous.count(p) == 1);
    previous = pairs;
    first = false;
  }
}
