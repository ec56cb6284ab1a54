// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "occforge/geometry.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "occforge/errors.hpp"

namespace occforge {

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("focal lengths must be positive");
  if (width < 1 || height < 1) throw std::invalid_argument("image size must be at least 1x1");
  if (!std::isfinite(cx) || !std::isfinite(cy))
    throw std::invalid_argument("principal point must be finite");
}

void CameraExtrinsics::validate() const {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw std::invalid_argument("rotation determinant is not +1");
  if (!translation.allFinite()) throw std::invalid_argument("translation must be finite");
}

void CameraRig::validate() const {
  if (cameras.empty()) throw std::invalid_argument("rig needs at least one camera");
  for (const Camera& cam : cameras) {
    cam.intrinsics.validate();
    cam.extrinsics.validate();
  }
}

Eigen::Vector3d backproject_pixel(const Eigen::Vector2d& pixel, double depth,
                                  const CameraIntrinsics& intr) {
  if (!(depth > 0.0)) throw std::invalid_argument("backproject_pixel: depth must be positive");
  // Closed-form K^{-1} for an upper-triangular pinhole K keeps z == depth exact.
  return {(pixel.x() - intr.cx) / intr.fx * depth, (pixel.y() - intr.cy) / intr.fy * depth,
          depth};
}

Eigen::Vector3d cam_to_ego(const Eigen::Vector3d& point_cam, const CameraExtrinsics& extr) {
  return extr.rotation.transpose() * (point_cam - extr.translation);
}

Eigen::Vector3d ego_to_cam(const Eigen::Vector3d& point_ego, const CameraExtrinsics& extr) {
  return extr.rotation * point_ego + extr.translation;
}

PixelProjection ego_to_cam_and_project(const Eigen::Vector3d& point_ego,
                                       const CameraIntrinsics& intr,
                                       const CameraExtrinsics& extr) {
  PixelProjection out;
  const Eigen::Vector3d cam = ego_to_cam(point_ego, extr);
  out.depth = cam.z();
  if (cam.z() <= kMinFrontDepth) return out;
  out.in_front = true;
  out.pixel = {intr.fx * cam.x() / cam.z() + intr.cx, intr.fy * cam.y() / cam.z() + intr.cy};
  return out;
}

PointCloud depth_map_to_points(const DepthMap& depth, const CameraIntrinsics& intr,
                               const CameraExtrinsics& extr, int stride, int camera_index) {
  if (stride < 1) throw std::invalid_argument("depth_map_to_points: stride must be >= 1");
  PointCloud cloud;
  for (int v = 0; v < depth.height; v += stride) {
    for (int u = 0; u < depth.width; u += stride) {
      if (!depth.has_return(u, v)) continue;
      const Eigen::Vector3d cam =
          backproject_pixel({static_cast<double>(u), static_cast<double>(v)}, depth.at(u, v), intr);
      cloud.points.push_back(cam_to_ego(cam, extr));
      if (camera_index >= 0) cloud.camera_index.push_back(camera_index);
    }
  }
  return cloud;
}

namespace {

nlohmann::ordered_json camera_to_json(const Camera& cam) {
  nlohmann::ordered_json j;
  j["fx"] = cam.intrinsics.fx;
  j["fy"] = cam.intrinsics.fy;
  j["cx"] = cam.intrinsics.cx;
  j["cy"] = cam.intrinsics.cy;
  j["width"] = cam.intrinsics.width;
  j["height"] = cam.intrinsics.height;
  std::vector<double> r(9);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) r[static_cast<std::size_t>(i * 3 + k)] = cam.extrinsics.rotation(i, k);
  j["R"] = r;
  j["t"] = {cam.extrinsics.translation.x(), cam.extrinsics.translation.y(),
            cam.extrinsics.translation.z()};
  return j;
}

Camera camera_from_json(const nlohmann::json& j) {
  Camera cam;
  try {
    cam.intrinsics.fx = j.at("fx").get<double>();
    cam.intrinsics.fy = j.at("fy").get<double>();
    cam.intrinsics.cx = j.at("cx").get<double>();
    cam.intrinsics.cy = j.at("cy").get<double>();
    cam.intrinsics.width = j.at("width").get<int>();
    cam.intrinsics.height = j.at("height").get<int>();
    const auto r = j.at("R").get<std::vector<double>>();
    const auto t = j.at("t").get<std::vector<double>>();
    if (r.size() != 9 || t.size() != 3) throw ConfigError("camera R/t must have 9/3 entries");
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) cam.extrinsics.rotation(i, k) = r[static_cast<std::size_t>(i * 3 + k)];
    cam.extrinsics.translation = {t[0], t[1], t[2]};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad camera entry: ") + e.what());
  }
  cam.intrinsics.validate();
  cam.extrinsics.validate();
  return cam;
}

}  // namespace

nlohmann::ordered_json rig_to_json(const CameraRig& rig) {
  nlohmann::ordered_json j;
  j["cameras"] = nlohmann::ordered_json::array();
  for (const Camera& cam : rig.cameras) j["cameras"].push_back(camera_to_json(cam));
  return j;
}

CameraRig rig_from_json(const nlohmann::json& j) {
  if (!j.contains("cameras") || !j["cameras"].is_array())
    throw ConfigError("calibration needs a \"cameras\" array");
  CameraRig rig;
  for (const auto& cj : j["cameras"]) rig.cameras.push_back(camera_from_json(cj));
  rig.validate();
  return rig;
}

CameraRig load_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open calibration file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("calibration parse error: ") + e.what());
  }
  return rig_from_json(j);
}

void save_rig(const CameraRig& rig, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write calibration file: " + path);
  out << rig_to_json(rig).dump(2) << "\n";
}

}  // namespace occforge
