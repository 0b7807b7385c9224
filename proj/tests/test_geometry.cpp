#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "bevswarm/calibration.hpp"
#include "bevswarm/geometry.hpp"
#include "bevswarm/oracle.hpp"
#include "test_support.hpp"

using namespace bevswarm;
using namespace bevswarm::testing;

TEST_CASE("identity cache back-projection") {
  ProjectionCache cache;
  cache.M = Eigen::Matrix3d::Identity();
  cache.N = Eigen::Vector3d::Zero();
  const Eigen::Vector3d p = pixel_to_world(0.0, 0.0, 1.0, cache);
  CHECK(p.isApprox(Eigen::Vector3d(0, 0, 1), 1e-15));

  // d -> 0 recovers the translation part.
  cache.N = Eigen::Vector3d(1, 2, 3);
  const Eigen::Vector3d q = pixel_to_world(5.0, 7.0, 1e-300, cache);
  CHECK(q.isApprox(cache.N, 1e-12));
}

TEST_CASE("projection cache reconstructs the two-factor inverse") {
  SplitMix64 rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const CameraIntrinsics intr = random_intrinsics(rng);
    const CameraPose pose = random_pose(rng);
    const ProjectionCache cache = build_projection_cache(intr, pose);

    // M (K R) v recovers v.
    const Eigen::Vector3d v(rng.next_double(-5, 5), rng.next_double(-5, 5),
                            rng.next_double(-5, 5));
    const Eigen::Vector3d back = cache.M * (intr.matrix() * (pose.R * v));
    CHECK((back - v).norm() < 1e-9 * (1.0 + v.norm()));

    const double u = rng.next_double(0, intr.width);
    const double w = rng.next_double(0, intr.height);
    const double d = rng.next_double(0.1, 200.0);
    const Eigen::Vector3d ours = pixel_to_world(u, w, d, cache);
    const Eigen::Vector3d reference = oracle::pixel_to_world_stepwise(u, w, d, intr, pose);
    CHECK((ours - reference).norm() < 1e-9 * (1.0 + reference.norm()));
  }
}

TEST_CASE("paper-scale crop calibration is accepted") {
  CameraIntrinsics intr{800.0, 800.0, 352.0, 128.0, 704, 256};
  CameraPose pose;
  pose.H = 30.0;
  CHECK_NOTHROW(build_projection_cache(intr, pose));
}

TEST_CASE("invalid calibrations are rejected") {
  CameraIntrinsics good{110.0, 110.0, 96.0, 40.0, 192, 80};
  CameraPose pose;
  pose.H = 10.0;

  CameraIntrinsics bad = good;
  bad.fx = 0.0;
  CHECK_THROWS_AS(build_projection_cache(bad, pose), CalibrationError);
  bad = good;
  bad.cx = -5.0;
  CHECK_THROWS_AS(build_projection_cache(bad, pose), CalibrationError);

  CameraPose skew = pose;
  skew.R(0, 1) = 0.5;
  CHECK_THROWS_AS(build_projection_cache(good, skew), CalibrationError);
  CameraPose flat = pose;
  flat.H = 0.0;
  CHECK_THROWS_AS(build_projection_cache(good, flat), CalibrationError);
  CameraPose mirror = pose;
  mirror.R = Eigen::Matrix3d::Identity();
  mirror.R(2, 2) = -1.0;
  mirror.R(1, 1) = -1.0;
  CHECK_NOTHROW(build_projection_cache(good, mirror));  // still det +1
  mirror.R(1, 1) = 1.0;
  CHECK_THROWS_AS(build_projection_cache(good, mirror), CalibrationError);  // det -1
}

TEST_CASE("world/pixel round trip on visible points") {
  SplitMix64 rng(77);
  int done = 0;
  while (done < 1000) {
    const CameraIntrinsics intr = random_intrinsics(rng);
    const CameraPose pose = random_pose(rng);
    const ProjectionCache cache = build_projection_cache(intr, pose);
    const double u = rng.next_double(0, intr.width);
    const double v = rng.next_double(0, intr.height);
    const double d = rng.next_double(0.5, 150.0);
    const Eigen::Vector3d world = pixel_to_world(u, v, d, cache);
    const auto pix = world_to_pixel(world, intr, pose);
    REQUIRE(pix.has_value());
    CHECK(std::abs(pix->u - u) < 1e-6);
    CHECK(std::abs(pix->v - v) < 1e-6);
    CHECK(std::abs(pix->d - d) < 1e-6 * d);
    const Eigen::Vector3d back = pixel_to_world(pix->u, pix->v, pix->d, cache);
    CHECK((back - world).norm() < 1e-6);
    ++done;
  }
}

TEST_CASE("points behind the camera are not visible") {
  CameraIntrinsics intr{110.0, 110.0, 96.0, 40.0, 192, 80};
  CameraPose pose;
  pose.H = 10.0;
  CHECK(world_to_pixel(Eigen::Vector3d(0, 0, 5), intr, pose).has_value());
  CHECK_FALSE(world_to_pixel(Eigen::Vector3d(0, 0, -5), intr, pose).has_value());
  CHECK_FALSE(world_to_pixel(Eigen::Vector3d(0, 0, 0), intr, pose).has_value());
}

TEST_CASE("nadir principal ray reaches the ground at the altitude") {
  CameraIntrinsics intr{110.0, 110.0, 96.0, 40.0, 192, 80};
  CameraPose pose;
  // Optical axis straight down: camera z = world -y.
  pose.R.row(0) = Eigen::Vector3d(1, 0, 0);
  pose.R.row(1) = Eigen::Vector3d(0, 0, 1);
  pose.R.row(2) = Eigen::Vector3d(0, -1, 0);
  pose.T = Eigen::Vector3d::Zero();
  pose.H = 42.5;
  const ProjectionCache cache = build_projection_cache(intr, pose);
  const DepthBound b = depth_upper_bound(intr.cx, intr.cy, cache, pose.H);
  CHECK_FALSE(b.clamped);
  CHECK(b.depth == doctest::Approx(pose.H).epsilon(1e-12));
}

TEST_CASE("depth upper bound agrees with the ray-marching reference") {
  SplitMix64 rng(2024);
  int checked = 0;
  double worst = 0.0;
  while (checked < 10000) {
    const CameraIntrinsics intr = random_intrinsics(rng);
    const CameraPose pose = random_pose(rng);
    const ProjectionCache cache = build_projection_cache(intr, pose);
    if (cache.N.y() + pose.H <= 0.5) continue;  // unphysical: camera at/below ground
    const double u = rng.next_double(0, intr.width);
    const double v = rng.next_double(0, intr.height);
    const DepthBound bound = depth_upper_bound(u, v, cache, pose.H);
    const auto reference = oracle::ray_ground_depth(u, v, intr, pose);
    const double slope = oracle::ray_vertical_slope(u, v, intr, pose);
    if (reference && *reference < 1e6 && std::abs(slope) > 1e-6) {
      REQUIRE_FALSE(bound.clamped);
      worst = std::max(worst, std::abs(bound.depth - *reference) / *reference);
      ++checked;
    } else if (!reference) {
      CHECK(bound.clamped);
      CHECK(bound.depth == kDefaultMaxDepth);
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("horizon rays clamp to the configured maximum") {
  CameraIntrinsics intr{110.0, 110.0, 96.0, 40.0, 192, 80};
  // Forward-level camera: principal ray parallel to the ground.
  CameraPose pose;
  pose.H = 30.0;
  const ProjectionCache cache = build_projection_cache(intr, pose);
  const DepthBound b = depth_upper_bound(intr.cx, intr.cy, cache, pose.H, 250.0);
  CHECK(b.clamped);
  CHECK(b.depth == 250.0);
  // With identity extrinsics, rows below the principal point aim upward.
  const DepthBound above = depth_upper_bound(intr.cx, 79.0, cache, pose.H, 250.0);
  CHECK(above.clamped);
}

TEST_CASE("depth bound grows with altitude and lands on the plane") {
  SplitMix64 rng(5150);
  for (int trial = 0; trial < 300; ++trial) {
    const CameraIntrinsics intr = random_intrinsics(rng);
    const CameraPose pose = random_pose(rng);
    const ProjectionCache cache = build_projection_cache(intr, pose);
    if (cache.N.y() <= -pose.H) continue;  // keep the camera above the plane
    const double u = rng.next_double(0, intr.width);
    const double v = rng.next_double(0, intr.height);
    const DepthBound b1 = depth_upper_bound(u, v, cache, pose.H);
    if (b1.clamped) continue;

    CameraPose higher = pose;
    higher.H = pose.H * rng.next_double(1.05, 2.0);
    const DepthBound b2 = depth_upper_bound(u, v, cache, higher.H);
    REQUIRE_FALSE(b2.clamped);
    CHECK(b2.depth > b1.depth);

    const Eigen::Vector3d ground = pixel_to_world(u, v, b1.depth, cache);
    CHECK(std::abs(ground.y() + pose.H) < 1e-6);
  }
}

TEST_CASE("depth bound map samples pixel centers") {
  CameraIntrinsics intr{110.0, 110.0, 96.0, 40.0, 32, 16};
  const CameraPose pose = oblique_pose(30.0, 0.6);
  const ProjectionCache cache = build_projection_cache(intr, pose);
  const DepthBoundMap map = compute_depth_bounds(intr, cache, pose.H);
  REQUIRE(map.width == 32);
  REQUIRE(map.height == 16);
  const DepthBound direct = depth_upper_bound(3.5, 7.5, cache, pose.H);
  CHECK(map.bound(3, 7) == direct.depth);
  CHECK(map.is_clamped(3, 7) == direct.clamped);
}

TEST_CASE("calibration json round trip and quaternion form") {
  SplitMix64 rng(404);
  CameraCalibration calib;
  calib.intrinsics = random_intrinsics(rng);
  calib.pose = random_pose(rng);

  const std::string text = calibration_to_json(calib);
  const CameraCalibration back = calibration_from_json(text);
  CHECK((back.pose.R - calib.pose.R).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((back.pose.T - calib.pose.T).norm() < 1e-12);
  CHECK(back.intrinsics.fx == calib.intrinsics.fx);
  CHECK(back.pose.H == calib.pose.H);

  // Quaternion alternative describes the same rotation.
  const Eigen::Quaterniond q(calib.pose.R);
  std::string qtext = "{\"fx\":" + std::to_string(calib.intrinsics.fx) +
                      ",\"fy\":" + std::to_string(calib.intrinsics.fy) +
                      ",\"cx\":" + std::to_string(calib.intrinsics.cx) +
                      ",\"cy\":" + std::to_string(calib.intrinsics.cy) +
                      ",\"width\":" + std::to_string(calib.intrinsics.width) +
                      ",\"height\":" + std::to_string(calib.intrinsics.height) + ",\"q\":[" +
                      std::to_string(q.w()) + "," + std::to_string(q.x()) + "," +
                      std::to_string(q.y()) + "," + std::to_string(q.z()) + "],\"T\":[" +
                      std::to_string(calib.pose.T.x()) + "," + std::to_string(calib.pose.T.y()) +
                      "," + std::to_string(calib.pose.T.z()) +
                      "],\"H\":" + std::to_string(calib.pose.H) + "}";
  const CameraCalibration from_q = calibration_from_json(qtext);
  CHECK((from_q.pose.R - calib.pose.R).cwiseAbs().maxCoeff() < 1e-5);

  CHECK_THROWS_AS(calibration_from_json("{\"fx\": 1"), CalibrationError);
  CHECK_THROWS_AS(calibration_from_json("{}"), CalibrationError);

  const auto tmp = std::filesystem::temp_directory_path() / "bevswarm_calib_test.json";
  save_calibration(calib, tmp);
  const CameraCalibration loaded = load_calibration(tmp);
  CHECK((loaded.pose.R - calib.pose.R).cwiseAbs().maxCoeff() < 1e-12);
  std::filesystem::remove(tmp);
}
