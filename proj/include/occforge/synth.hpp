// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "occforge/feature.hpp"
#include "occforge/geometry.hpp"
#include "occforge/grid.hpp"

namespace occforge {

struct BoxSpec {
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d hi = Eigen::Vector3d::Zero();
  std::uint16_t cls = 0;
};

/// Vertical capped cylinder standing on the ground plane (base at the scene's
/// ground height, or z = 0 when the scene has no ground).
struct PoleSpec {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.1;
  double height = 1.0;
  std::uint16_t cls = 0;
};

/// Procedural scene with analytic ground truth. Solid order for overlap
/// resolution: ground plane, boxes in listed order, poles in listed order;
/// the later solid wins.
struct SceneSpec {
  bool has_ground = true;
  double ground_z = 0.0;
  std::uint16_t ground_cls = 0;
  std::vector<BoxSpec> boxes;
  std::vector<PoleSpec> poles;
  CameraRig rig;
  std::uint64_t seed = 0;

  int solid_count() const {
    return (has_ground ? 1 : 0) + static_cast<int>(boxes.size() + poles.size());
  }
};

enum class SceneDifficulty { Plain, Occluded, Cluttered };

SceneDifficulty difficulty_from_string(const std::string& name);
std::string difficulty_to_string(SceneDifficulty difficulty);

/// Desk-scale lattice: origin (-10, -10, -1), 0.4 m cells, 50 x 50 x 8.
GridSpec desk_grid();

/// Two 64 x 64 cameras at (0, 0, 1.5): one looking along +x, one along -x.
CameraRig default_rig(int width = 64, int height = 64);

/// Labels a voxel with a solid's class iff its center lies inside the solid
/// (plane: |z_center - z0| < cell_z / 2; box and pole membership inclusive).
SemanticGrid rasterize_gt(const SceneSpec& scene, const GridSpec& spec);

/// First hit along each pixel ray; `depth` is the camera-frame z of the hit
/// (NaN when nothing is hit), `solid` the index in scene solid order.
struct RaycastResult {
  DepthMap depth;
  std::vector<std::int32_t> solid;     // -1 = no hit
  std::vector<std::uint16_t> cls;      // kEmptyLabel = no hit
  Eigen::Vector3d ray_origin;          // camera center, ego frame
};

RaycastResult raycast_scene(const SceneSpec& scene, const Camera& camera, int threads = 1);
DepthMap raycast_depth(const SceneSpec& scene, const Camera& camera, int threads = 1);

/// Image features: per-class seeded embedding of the hit solid plus two
/// normalized pixel-coordinate channels (zeros at no-hit pixels). Depth
/// features: (d, 1/d, hit-flag) pushed through a seeded 3 x D projection.
struct SynthFeatures {
  FeatureMap image;
  FeatureMap depth;
};

SynthFeatures synth_features(const SceneSpec& scene, const Camera& camera, int camera_index,
                             int channels, int threads = 1);

/// Deterministic scene generation. Box extents snap to the voxel-center
/// lattice of `spec` so that every visible box surface voxelizes into a
/// ground-truth-occupied cell. The occluded preset guarantees at least one
/// box that no camera can see (verified by ray casting against the generated
/// scene); poles appear only in cluttered scenes.
SceneSpec gen_scene(std::uint64_t seed, SceneDifficulty difficulty,
                    const GridSpec& spec = desk_grid());

/// True when some box is invisible from every camera: no pixel ray and no
/// ray toward a surface sample of the box hits it first.
bool has_fully_hidden_box(const SceneSpec& scene);

nlohmann::ordered_json scene_to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const nlohmann::json& j);
void save_scene(const SceneSpec& scene, const std::string& path);
SceneSpec load_scene(const std::string& path);

}  // namespace occforge
