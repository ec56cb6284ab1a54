// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "occforge/geometry.hpp"
#include "support/oracles.hpp"

using namespace occforge;

namespace {

CameraIntrinsics simple_intr() {
  CameraIntrinsics intr;
  intr.fx = intr.fy = 100.0;
  intr.cx = intr.cy = 50.0;
  intr.width = intr.height = 101;
  return intr;
}

CameraExtrinsics rot_z_90() {
  CameraExtrinsics extr;
  extr.rotation << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  extr.translation = {1.0, 0.0, 0.0};
  return extr;
}

}  // namespace

TEST_CASE("backproject_pixel known values") {
  CameraIntrinsics ident;
  ident.fx = ident.fy = 1.0;
  ident.cx = ident.cy = 0.0;
  ident.width = ident.height = 2;
  const Eigen::Vector3d p = backproject_pixel({0.0, 0.0}, 1.0, ident);
  CHECK(p.isApprox(Eigen::Vector3d(0, 0, 1), 1e-15));

  const Eigen::Vector3d q = backproject_pixel({50.0, 50.0}, 2.0, simple_intr());
  CHECK(q.isApprox(Eigen::Vector3d(0, 0, 2), 1e-15));
}

TEST_CASE("backproject_pixel against explicit 3x3 inversion") {
  const CameraIntrinsics intr = simple_intr();
  const Eigen::Matrix3d kinv = test::invert3x3_adjugate(intr.matrix());
  const Eigen::Vector3d expected = 2.0 * (kinv * Eigen::Vector3d(150.0, 50.0, 1.0));
  const Eigen::Vector3d got = backproject_pixel({150.0, 50.0}, 2.0, intr);
  CHECK((got - expected).norm() < 1e-12);
  CHECK(got.isApprox(Eigen::Vector3d(2, 0, 2), 1e-12));
  CHECK(got.z() == 2.0);  // z equals depth exactly
}

TEST_CASE("backproject_pixel rejects non-positive depth") {
  CHECK_THROWS_AS(backproject_pixel({0, 0}, 0.0, simple_intr()), std::invalid_argument);
  CHECK_THROWS_AS(backproject_pixel({0, 0}, -1.0, simple_intr()), std::invalid_argument);
}

TEST_CASE("backproject_pixel is exactly linear in doubling depth") {
  const CameraIntrinsics intr = simple_intr();
  std::uint64_t state = 7;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d px(test::random_unit(state) * 100.0, test::random_unit(state) * 100.0);
    const double d = 0.5 + test::random_unit(state) * 10.0;
    const Eigen::Vector3d a = backproject_pixel(px, 2.0 * d, intr);
    const Eigen::Vector3d b = 2.0 * backproject_pixel(px, d, intr);
    CHECK(a == b);
  }
}

TEST_CASE("cam_to_ego identity and hand-rotated case") {
  CameraExtrinsics ident;
  CHECK(cam_to_ego({1, 2, 3}, ident).isApprox(Eigen::Vector3d(1, 2, 3), 1e-15));

  // Independent evaluation of R^T (x - t) for a 90 degree z rotation.
  const CameraExtrinsics extr = rot_z_90();
  const Eigen::Vector3d x_cam(1.0, 0.0, 0.0);
  const double c = std::cos(M_PI / 2), s = std::sin(M_PI / 2);
  const Eigen::Vector3d diff = x_cam - extr.translation;
  const Eigen::Vector3d expected(c * diff.x() + s * diff.y(), -s * diff.x() + c * diff.y(),
                                 diff.z());
  CHECK((cam_to_ego(x_cam, extr) - expected).norm() < 1e-15);
  CHECK(cam_to_ego(x_cam, extr).norm() < 1e-15);  // maps to the origin
}

TEST_CASE("ego_to_cam round trips cam_to_ego") {
  const CameraExtrinsics extr = rot_z_90();
  std::uint64_t state = 11;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d x(test::random_unit(state) * 10 - 5, test::random_unit(state) * 10 - 5,
                            test::random_unit(state) * 10 - 5);
    CHECK((ego_to_cam(cam_to_ego(x, extr), extr) - x).norm() < 1e-12);
  }
}

TEST_CASE("cam_to_ego preserves pairwise distances") {
  const CameraExtrinsics extr = rot_z_90();
  std::uint64_t state = 13;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d a(test::random_unit(state) * 4, test::random_unit(state) * 4,
                            test::random_unit(state) * 4);
    const Eigen::Vector3d b(test::random_unit(state) * 4, test::random_unit(state) * 4,
                            test::random_unit(state) * 4);
    CHECK(std::abs((cam_to_ego(a, extr) - cam_to_ego(b, extr)).norm() - (a - b).norm()) < 1e-12);
  }
}

TEST_CASE("ego_to_cam_and_project principal point and behind-camera") {
  const CameraIntrinsics intr = simple_intr();
  CameraExtrinsics ident;

  const PixelProjection proj = ego_to_cam_and_project({0, 0, 2}, intr, ident);
  CHECK(proj.in_front);
  CHECK(proj.pixel.isApprox(Eigen::Vector2d(50, 50), 1e-12));
  CHECK(proj.depth == 2.0);

  CHECK_FALSE(ego_to_cam_and_project({0, 0, -1}, intr, ident).in_front);
  CHECK_FALSE(ego_to_cam_and_project({0, 0, 1e-9}, intr, ident).in_front);
}

TEST_CASE("project / backproject round trip on random in-frustum points") {
  const CameraIntrinsics intr = simple_intr();
  const CameraExtrinsics extr = rot_z_90();
  std::uint64_t state = 17;
  int tested = 0;
  while (tested < 1000) {
    const Eigen::Vector3d cam(test::random_unit(state) * 2 - 1, test::random_unit(state) * 2 - 1,
                              0.5 + test::random_unit(state) * 20);
    const Eigen::Vector3d ego = cam_to_ego(cam, extr);
    const PixelProjection proj = ego_to_cam_and_project(ego, intr, extr);
    REQUIRE(proj.in_front);
    const Eigen::Vector3d back =
        cam_to_ego(backproject_pixel(proj.pixel, proj.depth, intr), extr);
    CHECK((back - ego).norm() < 1e-9);
    ++tested;
  }
}

TEST_CASE("depth_map_to_points skips sentinels and keeps row-major order") {
  CameraIntrinsics intr;
  intr.fx = intr.fy = 1.0;
  intr.cx = intr.cy = 0.0;
  intr.width = intr.height = 2;
  CameraExtrinsics ident;

  DepthMap all_sentinel(2, 2);
  CHECK(depth_map_to_points(all_sentinel, intr, ident).size() == 0);

  DepthMap depth(2, 2);
  depth.at(0, 0) = 1.0;
  depth.at(1, 0) = 2.0;
  depth.at(0, 1) = 3.0;
  depth.at(1, 1) = 4.0;
  const PointCloud cloud = depth_map_to_points(depth, intr, ident, 1, 5);
  REQUIRE(cloud.size() == 4);
  CHECK(cloud.points[0].z() == 1.0);
  CHECK(cloud.points[1].z() == 2.0);
  CHECK(cloud.points[2].z() == 3.0);
  CHECK(cloud.points[3].z() == 4.0);
  CHECK(cloud.camera_index == std::vector<std::int32_t>{5, 5, 5, 5});

  depth.at(1, 0) = DepthMap::kNoReturn;
  CHECK(depth_map_to_points(depth, intr, ident).size() == 3);
  CHECK(depth_map_to_points(depth, intr, ident, 2).size() == 1);  // stride lattice: only (0,0)
}

TEST_CASE("extrinsics validation catches non-rotations") {
  CameraExtrinsics bad;
  bad.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  CameraExtrinsics reflect;
  reflect.rotation = Eigen::Matrix3d::Identity();
  reflect.rotation(2, 2) = -1.0;  // orthonormal but det -1
  CHECK_THROWS_AS(reflect.validate(), std::invalid_argument);
}

TEST_CASE("calibration file round trip") {
  CameraRig rig;
  Camera cam;
  cam.intrinsics = simple_intr();
  cam.extrinsics = rot_z_90();
  rig.cameras = {cam, cam};

  const auto path = std::filesystem::temp_directory_path() / "occforge_test_rig.json";
  save_rig(rig, path.string());
  const CameraRig loaded = load_rig(path.string());
  REQUIRE(loaded.count() == 2);
  CHECK(loaded.cameras[0].intrinsics.fx == rig.cameras[0].intrinsics.fx);
  CHECK(loaded.cameras[0].extrinsics.rotation.isApprox(rig.cameras[0].extrinsics.rotation,
                                                       1e-15));
  CHECK(loaded.cameras[0].extrinsics.translation ==
        rig.cameras[0].extrinsics.translation);
  std::filesystem::remove(path);

  CHECK_THROWS(load_rig("/nonexistent/rig.json"));
}
