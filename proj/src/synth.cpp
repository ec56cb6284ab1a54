// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "occforge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "occforge/errors.hpp"
#include "occforge/params.hpp"
#include "occforge/threads.hpp"

namespace occforge {

namespace {

constexpr double kRayEps = 1e-9;

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int solid = -1;
  std::uint16_t cls = kEmptyLabel;
};

/// Entry parameter of the ray into an axis-aligned box, or infinity.
double ray_box_entry(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                     const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    const double inv = 1.0 / dir[a];
    double ta = (lo[a] - origin[a]) * inv;
    double tb = (hi[a] - origin[a]) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::numeric_limits<double>::infinity();
  }
  if (t0 > kRayEps) return t0;
  if (t1 > kRayEps) return t1;  // ray starts inside: exit crossing
  return std::numeric_limits<double>::infinity();
}

/// Entry parameter into a vertical capped cylinder with base z0 and top
/// z0 + height.
double ray_pole_entry(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                      const PoleSpec& pole, double base_z) {
  const double inf = std::numeric_limits<double>::infinity();
  double c0 = -inf, c1 = inf;

  const double ox = origin.x() - pole.x;
  const double oy = origin.y() - pole.y;
  const double a = dir.x() * dir.x() + dir.y() * dir.y();
  const double r2 = pole.radius * pole.radius;
  if (a == 0.0) {
    if (ox * ox + oy * oy > r2) return inf;
  } else {
    const double b = 2.0 * (ox * dir.x() + oy * dir.y());
    const double c = ox * ox + oy * oy - r2;
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return inf;
    const double sq = std::sqrt(disc);
    c0 = (-b - sq) / (2.0 * a);
    c1 = (-b + sq) / (2.0 * a);
  }

  double z0 = -inf, z1 = inf;
  if (dir.z() == 0.0) {
    if (origin.z() < base_z || origin.z() > base_z + pole.height) return inf;
  } else {
    z0 = (base_z - origin.z()) / dir.z();
    z1 = (base_z + pole.height - origin.z()) / dir.z();
    if (z0 > z1) std::swap(z0, z1);
  }

  const double t0 = std::max(c0, z0);
  const double t1 = std::min(c1, z1);
  if (t0 > t1) return inf;
  if (t0 > kRayEps) return t0;
  if (t1 > kRayEps) return t1;
  return inf;
}

Hit closest_hit(const SceneSpec& scene, const Eigen::Vector3d& origin,
                const Eigen::Vector3d& dir) {
  Hit best;
  int solid = 0;
  if (scene.has_ground) {
    if (dir.z() != 0.0) {
      const double t = (scene.ground_z - origin.z()) / dir.z();
      if (t > kRayEps && t < best.t) best = {t, solid, scene.ground_cls};
    }
    ++solid;
  }
  for (const BoxSpec& box : scene.boxes) {
    const double t = ray_box_entry(origin, dir, box.lo, box.hi);
    if (t < best.t) best = {t, solid, box.cls};
    ++solid;
  }
  const double base_z = scene.has_ground ? scene.ground_z : 0.0;
  for (const PoleSpec& pole : scene.poles) {
    const double t = ray_pole_entry(origin, dir, pole, base_z);
    if (t < best.t) best = {t, solid, pole.cls};
    ++solid;
  }
  return best;
}

bool point_in_box(const Eigen::Vector3d& p, const BoxSpec& box) {
  return (p.array() >= box.lo.array()).all() && (p.array() <= box.hi.array()).all();
}

bool point_in_pole(const Eigen::Vector3d& p, const PoleSpec& pole, double base_z) {
  const double dx = p.x() - pole.x;
  const double dy = p.y() - pole.y;
  return dx * dx + dy * dy <= pole.radius * pole.radius && p.z() >= base_z &&
         p.z() <= base_z + pole.height;
}

}  // namespace

SceneDifficulty difficulty_from_string(const std::string& name) {
  if (name == "plain") return SceneDifficulty::Plain;
  if (name == "occluded") return SceneDifficulty::Occluded;
  if (name == "cluttered") return SceneDifficulty::Cluttered;
  throw ConfigError("unknown difficulty: " + name + " (want plain|occluded|cluttered)");
}

std::string difficulty_to_string(SceneDifficulty difficulty) {
  switch (difficulty) {
    case SceneDifficulty::Plain: return "plain";
    case SceneDifficulty::Occluded: return "occluded";
    case SceneDifficulty::Cluttered: return "cluttered";
  }
  return "occluded";
}

GridSpec desk_grid() {
  return GridSpec::uniform({-10.0, -10.0, -1.0}, 0.4, {50, 50, 8});
}

CameraRig default_rig(int width, int height) {
  CameraRig rig;
  const double f = 40.0 * width / 64.0;
  const Eigen::Vector3d eye(0.0, 0.0, 1.5);

  Camera front;
  front.intrinsics = {f, f, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
  front.extrinsics.rotation << 0, -1, 0,  // camera x = -ego y
      0, 0, -1,                           // camera y = -ego z
      1, 0, 0;                            // camera z = +ego x
  front.extrinsics.translation = -front.extrinsics.rotation * eye;

  Camera back = front;
  back.extrinsics.rotation << 0, 1, 0, 0, 0, -1, -1, 0, 0;
  back.extrinsics.translation = -back.extrinsics.rotation * eye;

  rig.cameras = {front, back};
  rig.validate();
  return rig;
}

SemanticGrid rasterize_gt(const SceneSpec& scene, const GridSpec& spec) {
  SemanticGrid grid(spec);
  const double base_z = scene.has_ground ? scene.ground_z : 0.0;
  const double half_cell_z = spec.cell.z() / 2.0;
  for (int x = 0; x < spec.dims.x(); ++x) {
    for (int y = 0; y < spec.dims.y(); ++y) {
      for (int z = 0; z < spec.dims.z(); ++z) {
        const Eigen::Vector3i idx{x, y, z};
        const Eigen::Vector3d center = voxel_center(idx, spec);
        std::uint16_t label = kEmptyLabel;
        if (scene.has_ground && std::abs(center.z() - scene.ground_z) < half_cell_z)
          label = scene.ground_cls;
        for (const BoxSpec& box : scene.boxes)
          if (point_in_box(center, box)) label = box.cls;
        for (const PoleSpec& pole : scene.poles)
          if (point_in_pole(center, pole, base_z)) label = pole.cls;
        grid.labels[static_cast<std::size_t>(spec.linear_index(idx))] = label;
      }
    }
  }
  return grid;
}

RaycastResult raycast_scene(const SceneSpec& scene, const Camera& camera, int threads) {
  const int w = camera.intrinsics.width;
  const int h = camera.intrinsics.height;
  RaycastResult result;
  result.depth = DepthMap(w, h);
  result.solid.assign(static_cast<std::size_t>(w) * h, -1);
  result.cls.assign(static_cast<std::size_t>(w) * h, kEmptyLabel);
  result.ray_origin = camera.extrinsics.center();

  const Eigen::Matrix3d r_t = camera.extrinsics.rotation.transpose();
  parallel_for(h, threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t v = lo; v < hi; ++v) {
      for (int u = 0; u < w; ++u) {
        // Camera-frame direction with unit z, so the ray parameter is the
        // camera-frame depth directly.
        const Eigen::Vector3d dir_cam((u - camera.intrinsics.cx) / camera.intrinsics.fx,
                                      (v - camera.intrinsics.cy) / camera.intrinsics.fy, 1.0);
        const Hit hit = closest_hit(scene, result.ray_origin, r_t * dir_cam);
        const std::size_t px = static_cast<std::size_t>(v) * w + u;
        if (std::isfinite(hit.t)) {
          result.depth.values[px] = hit.t;
          result.solid[px] = hit.solid;
          result.cls[px] = hit.cls;
        }
      }
    }
  });
  return result;
}

DepthMap raycast_depth(const SceneSpec& scene, const Camera& camera, int threads) {
  return raycast_scene(scene, camera, threads).depth;
}

SynthFeatures synth_features(const SceneSpec& scene, const Camera& camera, int camera_index,
                             int channels, int threads) {
  if (channels < 3) throw std::invalid_argument("synth_features: need at least 3 channels");
  const RaycastResult cast = raycast_scene(scene, camera, threads);
  const int w = camera.intrinsics.width;
  const int h = camera.intrinsics.height;
  const int embed_dims = channels - 2;

  std::unordered_map<std::uint16_t, Tensor> embeds;
  const auto embed_of = [&](std::uint16_t cls) -> const Tensor& {
    auto it = embeds.find(cls);
    if (it == embeds.end())
      it = embeds
               .emplace(cls, seeded_init(scene.seed, "synth.embed." + std::to_string(cls),
                                         {embed_dims}))
               .first;
    return it->second;
  };
  const Tensor depth_proj = seeded_init(scene.seed, "synth.depth_proj", {3, channels});

  SynthFeatures out;
  out.image = FeatureMap(h, w, channels, camera_index);
  out.depth = FeatureMap(h, w, channels, camera_index);

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const std::size_t px = static_cast<std::size_t>(v) * w + u;
      if (cast.solid[px] < 0) continue;  // no hit: both maps stay zero
      float* img = out.image.pixel(u, v);
      const Tensor& emb = embed_of(cast.cls[px]);
      for (int c = 0; c < embed_dims; ++c) img[c] = emb[c];
      img[embed_dims] = static_cast<float>(u) / (w > 1 ? w - 1 : 1);
      img[embed_dims + 1] = static_cast<float>(v) / (h > 1 ? h - 1 : 1);

      const double d = cast.depth.values[px];
      const double base[3] = {d, 1.0 / d, 1.0};
      float* dep = out.depth.pixel(u, v);
      for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j)
          acc += base[j] * static_cast<double>(depth_proj[j * channels + c]);
        dep[c] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

namespace {

/// Center of lattice cell i along one axis, same expression as voxel_center.
double axis_center(const GridSpec& spec, int axis, int i) {
  return spec.origin[axis] + (static_cast<double>(i) + 0.5) * spec.cell[axis];
}

int axis_cell_of(const GridSpec& spec, int axis, double value) {
  const int i = static_cast<int>(std::lround((value - spec.origin[axis]) / spec.cell[axis] - 0.5));
  return std::clamp(i, 0, spec.dims[axis] - 1);
}

/// Box spanning lattice-center planes [lo_cell, hi_cell] per axis: every
/// surface point then voxelizes into a cell whose center is inside the box.
BoxSpec lattice_box(const GridSpec& spec, const Eigen::Vector3i& lo_cell,
                    const Eigen::Vector3i& hi_cell, std::uint16_t cls) {
  BoxSpec box;
  for (int a = 0; a < 3; ++a) {
    box.lo[a] = axis_center(spec, a, lo_cell[a]);
    box.hi[a] = axis_center(spec, a, hi_cell[a]);
  }
  box.cls = cls;
  return box;
}

int ground_cell_z(const GridSpec& spec) { return axis_cell_of(spec, 2, 0.0); }

}  // namespace

bool has_fully_hidden_box(const SceneSpec& scene) {
  const int first_box_solid = scene.has_ground ? 1 : 0;
  for (std::size_t b = 0; b < scene.boxes.size(); ++b) {
    const int solid = first_box_solid + static_cast<int>(b);
    const BoxSpec& box = scene.boxes[b];
    bool visible = false;

    for (const Camera& camera : scene.rig.cameras) {
      const RaycastResult cast = raycast_scene(scene, camera);
      for (std::int32_t s : cast.solid) {
        if (s == solid) {
          visible = true;
          break;
        }
      }
      if (visible) break;

      // Rays toward boundary samples of the box (corners, edge midpoints,
      // face centers).
      const Eigen::Vector3d origin = camera.extrinsics.center();
      for (int ix = 0; ix <= 2 && !visible; ++ix) {
        for (int iy = 0; iy <= 2 && !visible; ++iy) {
          for (int iz = 0; iz <= 2 && !visible; ++iz) {
            if (ix == 1 && iy == 1 && iz == 1) continue;
            const Eigen::Vector3d sample(box.lo.x() + 0.5 * ix * (box.hi.x() - box.lo.x()),
                                         box.lo.y() + 0.5 * iy * (box.hi.y() - box.lo.y()),
                                         box.lo.z() + 0.5 * iz * (box.hi.z() - box.lo.z()));
            const Hit hit = closest_hit(scene, origin, sample - origin);
            if (hit.solid == solid) visible = true;
          }
        }
      }
      if (visible) break;
    }
    if (!visible) return true;
  }
  return false;
}

SceneSpec gen_scene(std::uint64_t seed, SceneDifficulty difficulty, const GridSpec& spec) {
  SceneSpec scene;
  scene.seed = seed;
  scene.rig = default_rig();
  scene.has_ground = true;
  scene.ground_cls = 0;
  const int gz = ground_cell_z(spec);
  scene.ground_z = axis_center(spec, 2, gz);

  if (difficulty == SceneDifficulty::Plain) return scene;

  SplitMix64 rng{seed ^ fnv1a64("synth.scene")};
  const auto rand_int = [&](int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng.next_unit() * (hi - lo + 1));
  };
  const int zmax = spec.dims.z() - 1;

  if (difficulty == SceneDifficulty::Occluded) {
    // Occluder in front of the forward camera, then a smaller box fully
    // inside its shadow. Placed proportionally to the grid so every solid
    // stays inside the extent; the ray-cast verifier confirms the hidden box
    // and the construction shrinks it if needed.
    const int cx = axis_cell_of(spec, 0, 0.0);
    const int cy = axis_cell_of(spec, 1, 0.0);
    const int xmax = spec.dims.x() - 1;
    const int room = xmax - cx;

    const int occ_front = std::min(cx + std::max(2, room * 3 / 10) + rand_int(0, 1), xmax - 5);
    const Eigen::Vector3i occ_lo{occ_front, cy - rand_int(5, 6), gz};
    const Eigen::Vector3i occ_hi{std::min(occ_front + rand_int(2, 3), xmax - 3),
                                 cy + rand_int(5, 6), std::min(gz + 4, zmax)};
    scene.boxes.push_back(lattice_box(spec, occ_lo, occ_hi, 1));

    int half_w = 1;
    int height = 2;
    for (int attempt = 0; attempt < 4; ++attempt) {
      const int hid_front = std::min(occ_hi.x() + std::max(2, (xmax - occ_hi.x()) / 3),
                                     xmax - 1);
      const Eigen::Vector3i hid_lo{hid_front, cy - half_w, gz};
      const Eigen::Vector3i hid_hi{std::min(hid_front + 2, xmax), cy + half_w,
                                   std::min(gz + height, zmax)};
      scene.boxes.push_back(lattice_box(spec, hid_lo, hid_hi, 2));
      if (has_fully_hidden_box(scene)) break;
      scene.boxes.pop_back();
      half_w = std::max(0, half_w - 1);
      height = std::max(1, height - 1);
    }
    require(has_fully_hidden_box(scene), "occluded preset failed to hide a box");

    // A box behind the ego, visible only to the rear camera.
    const int rear_hi_x = std::max(1, cx - std::max(2, cx * 3 / 10));
    const Eigen::Vector3i rear_lo{std::max(0, rear_hi_x - rand_int(2, 3)),
                                  std::min(cy + rand_int(2, 6), spec.dims.y() - 4), gz};
    const Eigen::Vector3i rear_hi{rear_hi_x,
                                  std::min(rear_lo.y() + rand_int(2, 3), spec.dims.y() - 1),
                                  std::min(gz + rand_int(2, 3), zmax)};
    scene.boxes.push_back(lattice_box(spec, rear_lo, rear_hi, 3));
    return scene;
  }

  // Cluttered: seeded boxes and poles, no occlusion guarantee.
  const Eigen::Vector3d lo_corner = spec.origin;
  const Eigen::Vector3d hi_corner = spec.max_corner();
  const int nboxes = rand_int(3, 5);
  for (int i = 0; i < nboxes; ++i) {
    const int sign = (i % 2 == 0) ? 1 : -1;
    const double span_x = (hi_corner.x() - lo_corner.x()) / 2.0;
    const int cx = axis_cell_of(spec, 0, sign * span_x * (0.25 + 0.5 * rng.next_unit()));
    const int cy = axis_cell_of(
        spec, 1, lo_corner.y() + (hi_corner.y() - lo_corner.y()) * (0.2 + 0.6 * rng.next_unit()));
    const Eigen::Vector3i lo{std::max(0, cx - rand_int(1, 3)), std::max(0, cy - rand_int(1, 3)),
                             gz};
    const Eigen::Vector3i hi{std::min(spec.dims.x() - 1, cx + rand_int(1, 3)),
                             std::min(spec.dims.y() - 1, cy + rand_int(1, 3)),
                             std::min(gz + rand_int(1, 4), zmax)};
    scene.boxes.push_back(lattice_box(spec, lo, hi, static_cast<std::uint16_t>(1 + i % 3)));
  }
  const int npoles = rand_int(1, 2);
  for (int i = 0; i < npoles; ++i) {
    PoleSpec pole;
    const int sign = (i % 2 == 0) ? 1 : -1;
    const double span = (hi_corner.x() - lo_corner.x()) / 2.0;
    const int px = std::clamp(
        axis_cell_of(spec, 0, sign * span * (0.3 + 0.4 * rng.next_unit())), 1,
        spec.dims.x() - 2);
    const int py = std::clamp(
        axis_cell_of(spec, 1,
                     lo_corner.y() + (hi_corner.y() - lo_corner.y()) * (0.25 + 0.5 * rng.next_unit())),
        1, spec.dims.y() - 2);
    pole.x = axis_center(spec, 0, px);
    pole.y = axis_center(spec, 1, py);
    pole.radius = 0.15 + 0.2 * rng.next_unit();
    pole.height = 1.0 + rng.next_unit();
    pole.cls = 4;
    scene.poles.push_back(pole);
  }
  return scene;
}

nlohmann::ordered_json scene_to_json(const SceneSpec& scene) {
  nlohmann::ordered_json j;
  j["seed"] = scene.seed;
  if (scene.has_ground) {
    j["ground"] = {{"z", scene.ground_z}, {"class", scene.ground_cls}};
  } else {
    j["ground"] = nullptr;
  }
  j["boxes"] = nlohmann::ordered_json::array();
  for (const BoxSpec& box : scene.boxes) {
    j["boxes"].push_back({{"lo", {box.lo.x(), box.lo.y(), box.lo.z()}},
                          {"hi", {box.hi.x(), box.hi.y(), box.hi.z()}},
                          {"class", box.cls}});
  }
  j["poles"] = nlohmann::ordered_json::array();
  for (const PoleSpec& pole : scene.poles) {
    j["poles"].push_back({{"x", pole.x},
                          {"y", pole.y},
                          {"radius", pole.radius},
                          {"height", pole.height},
                          {"class", pole.cls}});
  }
  j["calibration"] = rig_to_json(scene.rig);
  return j;
}

SceneSpec scene_from_json(const nlohmann::json& j) {
  SceneSpec scene;
  try {
    scene.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("ground") && !j["ground"].is_null()) {
      scene.has_ground = true;
      scene.ground_z = j["ground"].at("z").get<double>();
      scene.ground_cls = j["ground"].at("class").get<std::uint16_t>();
    } else {
      scene.has_ground = false;
    }
    for (const auto& bj : j.value("boxes", nlohmann::json::array())) {
      BoxSpec box;
      const auto lo = bj.at("lo").get<std::vector<double>>();
      const auto hi = bj.at("hi").get<std::vector<double>>();
      if (lo.size() != 3 || hi.size() != 3) throw ConfigError("box lo/hi must have 3 entries");
      box.lo = {lo[0], lo[1], lo[2]};
      box.hi = {hi[0], hi[1], hi[2]};
      if (!((box.hi - box.lo).array() > 0.0).all())
        throw ConfigError("box extent must be positive");
      box.cls = bj.at("class").get<std::uint16_t>();
      scene.boxes.push_back(box);
    }
    for (const auto& pj : j.value("poles", nlohmann::json::array())) {
      PoleSpec pole;
      pole.x = pj.at("x").get<double>();
      pole.y = pj.at("y").get<double>();
      pole.radius = pj.at("radius").get<double>();
      pole.height = pj.at("height").get<double>();
      if (pole.radius <= 0.0 || pole.height <= 0.0)
        throw ConfigError("pole radius/height must be positive");
      pole.cls = pj.at("class").get<std::uint16_t>();
      scene.poles.push_back(pole);
    }
    scene.rig = rig_from_json(j.at("calibration"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad scene JSON: ") + e.what());
  }
  return scene;
}

void save_scene(const SceneSpec& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write scene file: " + path);
  out << scene_to_json(scene).dump(2) << "\n";
}

SceneSpec load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene parse error: ") + e.what());
  }
  return scene_from_json(j);
}

}  // namespace occforge
