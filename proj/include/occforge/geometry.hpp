// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace occforge {

/// Pinhole intrinsics. Pixel (u, v) addresses the continuous image point
/// (u, v) directly; there is no half-pixel offset anywhere in the project.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  Eigen::Matrix3d matrix() const;
  void validate() const;  // throws std::invalid_argument
};

/// Rigid ego -> camera transform: x_cam = R * p_ego + t.
/// With that convention, p_ego = R^T (x_cam - t) inverts it exactly.
struct CameraExtrinsics {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  /// Camera center expressed in the ego frame.
  Eigen::Vector3d center() const { return rotation.transpose() * (-translation); }
  void validate() const;  // orthonormal within 1e-9, det +1 within 1e-9
};

struct Camera {
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
};

struct CameraRig {
  std::vector<Camera> cameras;

  int count() const { return static_cast<int>(cameras.size()); }
  void validate() const;
};

/// Per-pixel metric depth (camera-frame z). NaN marks "no return"; on disk the
/// sentinel is encoded as 0.0, which is unambiguous because depth is strictly
/// positive.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major, values[v * width + u]

  static constexpr double kNoReturn = std::numeric_limits<double>::quiet_NaN();

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, kNoReturn) {}

  double at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
  double& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }
  bool has_return(int u, int v) const { return std::isfinite(at(u, v)); }
};

struct PointCloud {
  std::vector<Eigen::Vector3d> points;  // ego frame, meters
  std::vector<std::int32_t> camera_index;  // optional; empty or one entry per point

  std::int64_t size() const { return static_cast<std::int64_t>(points.size()); }
};

struct PixelProjection {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double depth = 0.0;
  bool in_front = false;
};

/// Points closer than this to the image plane count as "behind" to avoid
/// division blow-up at grazing rays.
inline constexpr double kMinFrontDepth = 1e-6;

/// depth * K^{-1} [u v 1]^T. The z component equals depth exactly.
/// Throws std::invalid_argument on non-positive depth.
Eigen::Vector3d backproject_pixel(const Eigen::Vector2d& pixel, double depth,
                                  const CameraIntrinsics& intr);

/// R^T (x_cam - t).
Eigen::Vector3d cam_to_ego(const Eigen::Vector3d& point_cam, const CameraExtrinsics& extr);

/// R * p_ego + t (forward convention; exact inverse of cam_to_ego).
Eigen::Vector3d ego_to_cam(const Eigen::Vector3d& point_ego, const CameraExtrinsics& extr);

/// Projects an ego point into the image. When the camera-frame z is below
/// kMinFrontDepth the flag is false and the pixel is meaningless.
PixelProjection ego_to_cam_and_project(const Eigen::Vector3d& point_ego,
                                       const CameraIntrinsics& intr,
                                       const CameraExtrinsics& extr);

/// Back-projects every stride-lattice pixel with a depth return into the ego
/// frame, in row-major pixel order. `camera_index >= 0` tags the emitted
/// points with their source camera.
PointCloud depth_map_to_points(const DepthMap& depth, const CameraIntrinsics& intr,
                               const CameraExtrinsics& extr, int stride = 1,
                               int camera_index = -1);

/// Calibration file round trip, schema:
/// { "cameras": [ { "fx", "fy", "cx", "cy", "width", "height",
///                  "R": [9 row-major], "t": [3] } ] }
CameraRig load_rig(const std::string& path);
void save_rig(const CameraRig& rig, const std::string& path);

nlohmann::ordered_json rig_to_json(const CameraRig& rig);
CameraRig rig_from_json(const nlohmann::json& j);

}  // namespace occforge
