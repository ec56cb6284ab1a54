// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "occforge/dca.hpp"
#include "occforge/losses.hpp"
#include "occforge/metrics.hpp"
#include "occforge/nn.hpp"
#include "occforge/pipeline.hpp"
#include "occforge/region_experts.hpp"
#include "occforge/synth.hpp"
#include "occforge/view_transformer.hpp"
#include "support/oracles.hpp"

using namespace occforge;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void run_criterion(int index, const char* name, const std::function<bool(std::string&)>& fn) {
  std::string detail;
  bool pass = false;
  try {
    pass = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  std::printf("[%s] criterion %2d: %s%s%s\n", pass ? "PASS" : "FAIL", index, name,
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<unreadable>";
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 1. Projection round trip and voxel recovery under one second.
bool criterion_roundtrip(std::string& detail) {
  const GridSpec spec = GridSpec::uniform({-40.0, -40.0, -1.0}, 0.4, {200, 200, 16});
  const CameraRig rig = default_rig();
  const Camera& cam = rig.cameras[0];

  const auto start = std::chrono::steady_clock::now();
  std::uint64_t state = 2026;
  double worst = 0.0;
  int voxel_mismatches = 0;
  int tested = 0;
  while (tested < 1000) {
    // In-frustum camera point with the recovered ego position inside the grid.
    const double z = 0.5 + 30.0 * test::random_unit(state);
    const double u = test::random_unit(state) * (cam.intrinsics.width - 1);
    const double v = test::random_unit(state) * (cam.intrinsics.height - 1);
    const Eigen::Vector3d point_cam =
        backproject_pixel({u, v}, z, cam.intrinsics);  // construction only
    const Eigen::Vector3d ego = cam_to_ego(point_cam, cam.extrinsics);
    Eigen::Vector3i idx;
    if (!spec.locate(ego, idx)) continue;
    ++tested;

    const PixelProjection proj = ego_to_cam_and_project(ego, cam.intrinsics, cam.extrinsics);
    if (!proj.in_front) return false;
    const Eigen::Vector3d back =
        cam_to_ego(backproject_pixel(proj.pixel, proj.depth, cam.intrinsics), cam.extrinsics);
    worst = std::max(worst, (back - ego).norm());

    PointCloud one;
    one.points.push_back(back);
    const OccupancyMask mask = voxelize_points(one, spec);
    if (!(mask.popcount() == 1 && mask.test(spec.linear_index(idx)))) ++voxel_mismatches;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::ostringstream oss;
  oss << "worst residual " << worst << " m, " << voxel_mismatches << " voxel mismatches, "
      << seconds << " s";
  detail = oss.str();
  return worst < 1e-9 && voxel_mismatches == 0 && seconds < 1.0;
}

// 2. Voxelization equals the brute-force floor loop on the production grid.
bool criterion_voxelize(std::string& detail) {
  const GridSpec spec = GridSpec::uniform({-40.0, -40.0, -1.0}, 0.4, {200, 200, 16});
  PointCloud cloud;
  std::uint64_t state = 77;
  for (int i = 0; i < 10000; ++i)
    cloud.points.emplace_back(-45.0 + 90.0 * test::random_unit(state),
                              -45.0 + 90.0 * test::random_unit(state),
                              -2.0 + 10.0 * test::random_unit(state));
  const OccupancyMask got = voxelize_points(cloud, spec);
  const OccupancyMask expected = test::o_voxelize(cloud, spec);
  detail = "set bits " + std::to_string(got.popcount());
  return got.bits == expected.bits;
}

// 3. Full DCA module against the unrolled reference; weight normalization;
//    linearity in the context values.
bool criterion_dca(std::string& detail) {
  DcaConfig config;
  config.channels = 8;
  config.heads = 2;
  config.ref_points = 4;
  ParameterStore store(31);
  const DcaParams params = DcaParams::init(store, "dca", config);

  const GridSpec spec = GridSpec::uniform({2.0, -1.0, 0.0}, 0.5, {4, 4, 4});
  FeatureVolume f_in(spec, config.channels);
  f_in.tensor = test::random_tensor(32, f_in.tensor.dims(), 1.0);
  const CameraRig rig = default_rig();
  std::vector<FeatureMap> ctx;
  for (int cam = 0; cam < 2; ++cam) {
    FeatureMap map(64, 64, config.channels, cam);
    map.tensor = test::random_tensor(33 + static_cast<std::uint64_t>(cam),
                                     map.tensor.dims(), 1.0);
    ctx.push_back(std::move(map));
  }

  const FeatureVolume got = dca_module(f_in, ctx, rig, nullptr, params, config);
  const FeatureVolume ref = test::o_dca_module(f_in, ctx, rig, nullptr, params, config);
  const double module_diff = test::max_abs_diff(got.tensor, ref.tensor);

  // Attention weights: recompute the exact logits the module uses and check
  // the softmax normalization.
  const VoxelQuerySet q = make_query_set(f_in, rig, nullptr);
  const Tensor f_self = self_attention_block(q.features, params, config);
  double worst_sum_err = 0.0;
  {
    const Tensor qt = linear(f_self, params.self_q_w, &params.self_q_b);
    const Tensor kt = linear(f_self, params.self_k_w, &params.self_k_b);
    const int dh = config.head_dim();
    const std::int64_t n = q.count();
    for (std::int64_t i = 0; i < n; ++i)
      for (int h = 0; h < config.heads; ++h) {
        std::vector<double> logits(static_cast<std::size_t>(n));
        for (std::int64_t j = 0; j < n; ++j) {
          double dot = 0.0;
          for (int d = 0; d < dh; ++d)
            dot += static_cast<double>(qt[i * config.channels + h * dh + d]) *
                   static_cast<double>(kt[j * config.channels + h * dh + d]);
          logits[static_cast<std::size_t>(j)] = dot / std::sqrt(static_cast<double>(dh));
        }
        const std::vector<double> w = test::o_softmax(logits);
        double sum = 0.0;
        for (double x : w) {
          if (x < 0.0) return false;
          sum += x;
        }
        worst_sum_err = std::max(worst_sum_err, std::abs(sum - 1.0));
      }
    const Tensor att = linear(f_self, params.att_w, &params.att_b);
    for (std::int64_t i = 0; i < n; ++i)
      for (int h = 0; h < config.heads; ++h) {
        std::vector<double> logits(static_cast<std::size_t>(config.ref_points));
        for (int p = 0; p < config.ref_points; ++p)
          logits[static_cast<std::size_t>(p)] =
              att[i * config.heads * config.ref_points + h * config.ref_points + p];
        const std::vector<double> w = test::o_softmax(logits);
        double sum = 0.0;
        for (double x : w) {
          if (x < 0.0) return false;
          sum += x;
        }
        worst_sum_err = std::max(worst_sum_err, std::abs(sum - 1.0));
      }
  }

  // Linearity of the cross term in the context values.
  VoxelQuerySet qs = q;
  qs.features = f_self;
  std::vector<FeatureMap> ctx_b;
  for (int cam = 0; cam < 2; ++cam) {
    FeatureMap map(64, 64, config.channels, cam);
    map.tensor = test::random_tensor(40 + static_cast<std::uint64_t>(cam),
                                     map.tensor.dims(), 1.0);
    ctx_b.push_back(std::move(map));
  }
  std::vector<FeatureMap> combo;
  for (int cam = 0; cam < 2; ++cam) {
    FeatureMap map(64, 64, config.channels, cam);
    for (std::int64_t i = 0; i < map.tensor.size(); ++i)
      map.tensor[i] = 1.5f * ctx[static_cast<std::size_t>(cam)].tensor[i] -
                      0.75f * ctx_b[static_cast<std::size_t>(cam)].tensor[i];
    combo.push_back(std::move(map));
  }
  const Tensor fa = deformable_cross_attention(qs, ctx, params, config);
  const Tensor fb = deformable_cross_attention(qs, ctx_b, params, config);
  const Tensor fc = deformable_cross_attention(qs, combo, params, config);
  double linearity = 0.0;
  for (std::int64_t i = 0; i < fc.size(); ++i) {
    const double want = 1.5 * fa[i] - 0.75 * fb[i];
    linearity = std::max(linearity, std::abs(fc[i] - want) / (std::abs(want) + 1.0));
  }

  std::ostringstream oss;
  oss << "module diff " << module_diff << ", weight-sum err " << worst_sum_err
      << ", linearity " << linearity;
  detail = oss.str();
  return module_diff < 1e-4 && worst_sum_err < 1e-5 && linearity < 1e-4;
}

// 4. Stage-3 geometric case equation on a random mask.
bool criterion_stage3(std::string& detail) {
  DcaConfig config;
  config.channels = 8;
  config.heads = 2;
  config.ref_points = 4;
  ParameterStore store(51);
  const DcaParams params = DcaParams::init(store, "d2v.stage3_geo", config);
  const Tensor e_empty = store.uniform("d2v.e_empty", {config.channels});

  const GridSpec spec = GridSpec::uniform({2.0, -1.0, 0.0}, 0.5, {4, 4, 4});
  FeatureVolume f_dense(spec, config.channels);
  f_dense.tensor = test::random_tensor(52, f_dense.tensor.dims(), 1.0);
  const CameraRig rig = default_rig();
  std::vector<FeatureMap> depth_feats;
  for (int cam = 0; cam < 2; ++cam) {
    FeatureMap map(64, 64, config.channels, cam);
    map.tensor = test::random_tensor(53 + static_cast<std::uint64_t>(cam),
                                     map.tensor.dims(), 1.0);
    depth_feats.push_back(std::move(map));
  }

  OccupancyMask mask(spec);
  std::uint64_t state = 54;
  for (std::int64_t v = 0; v < spec.voxel_count(); ++v)
    if (test::random_unit(state) < 0.5) mask.set(v);
  if (mask.popcount() == 0 || mask.popcount() == spec.voxel_count()) return false;

  const FeatureVolume f_geo =
      stage3_geometric(f_dense, depth_feats, mask, e_empty, rig, params, config);
  const FeatureVolume oracle =
      test::o_dca_module(f_dense, depth_feats, rig, &mask, params, config);

  double occupied_diff = 0.0;
  for (std::int64_t v = 0; v < spec.voxel_count(); ++v) {
    if (!mask.test(v)) {
      if (std::memcmp(f_geo.voxel(v), e_empty.data(),
                      sizeof(float) * static_cast<std::size_t>(config.channels)) != 0) {
        detail = "empty voxel deviates from e_empty";
        return false;
      }
    } else {
      for (int c = 0; c < config.channels; ++c)
        occupied_diff = std::max(
            occupied_diff,
            std::abs(static_cast<double>(f_geo.voxel(v)[c]) - oracle.voxel(v)[c]));
    }
  }
  std::ostringstream oss;
  oss << "occupied-voxel diff " << occupied_diff << ", " << mask.popcount() << "/"
      << spec.voxel_count() << " occupied";
  detail = oss.str();
  return occupied_diff < 1e-4;
}

// 5. Router and top-K contract.
bool criterion_router(std::string& detail) {
  DcaConfig config;
  config.channels = 8;
  config.heads = 2;
  config.ref_points = 2;
  const GridSpec spec = GridSpec::uniform({-3.0, -3.0, -1.0}, 1.0, {6, 6, 4});
  const RegionPartition partition = default_region_partition(spec);
  FeatureVolume vol(spec, config.channels);
  vol.tensor = test::random_tensor(61, vol.tensor.dims(), 1.0);
  const CameraRig rig = default_rig();
  std::vector<FeatureMap> ctx;
  for (int cam = 0; cam < 2; ++cam) {
    FeatureMap map(64, 64, config.channels, cam);
    map.tensor = test::random_tensor(62 + static_cast<std::uint64_t>(cam),
                                     map.tensor.dims(), 1.0);
    ctx.push_back(std::move(map));
  }

  const int top_k = 3;
  ParameterStore store(63);
  RoutingReport report;
  region_expert_refine(vol, ctx, rig, partition, top_k, store, config, &report);

  // Exactly K experts executed: the report lists K runs and only the selected
  // expert namespaces were ever instantiated.
  if (static_cast<int>(report.executed.size()) != top_k) {
    detail = "executed " + std::to_string(report.executed.size()) + " experts";
    return false;
  }
  for (int m = 0; m < partition.region_count(); ++m) {
    const bool selected =
        std::find(report.selected.begin(), report.selected.end(), m) != report.selected.end();
    if (store.contains("expert." + std::to_string(m) + ".self_q.w") != selected) {
      detail = "expert namespace mismatch for region " + std::to_string(m);
      return false;
    }
  }

  double weight_sum = 0.0;
  for (double w : report.weights) weight_sum += w;
  if (std::abs(weight_sum - 1.0) > 1e-6) {
    detail = "weights sum to " + std::to_string(weight_sum);
    return false;
  }

  // Shift invariance of the selection.
  std::vector<double> shifted = report.scores;
  for (double& s : shifted)
    if (std::isfinite(s)) s += 123.5;
  const RouteDecision again = topk_select(shifted, top_k);
  if (again.selected != report.selected) {
    detail = "selection changed under a constant score shift";
    return false;
  }

  // Deterministic tie-breaking toward lower indices.
  const RouteDecision tie = topk_select({0.5, 0.5, 0.5, 0.5, 0.5}, 2);
  if (tie.selected != std::vector<int>{0, 1}) {
    detail = "tie-break selected different regions";
    return false;
  }
  detail = "selected regions " + std::to_string(report.selected[0]) + "," +
           std::to_string(report.selected[1]) + "," + std::to_string(report.selected[2]);
  return true;
}

// 6. Recursive schedule: exact sizes and strict nesting over 100 random volumes.
bool criterion_schedule(std::string& detail) {
  const std::vector<std::int64_t> ks = k_schedule(100, {1.0, 0.75, 0.5});
  if (ks != std::vector<std::int64_t>{100, 75, 50}) {
    detail = "k schedule mismatch";
    return false;
  }

  const GridSpec spec = GridSpec::uniform({0, 0, 0}, 1.0, {5, 5, 4});  // 100 voxels
  const int channels = 8;
  ParameterStore store(71);
  const Tensor& w2 = store.uniform("r2.router.2.w", {channels + 1});
  const Tensor& b2 = store.uniform("r2.router.2.b", {1});
  const Tensor& w3 = store.uniform("r2.router.3.w", {channels + 1});
  const Tensor& b3 = store.uniform("r2.router.3.b", {1});

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    FeatureVolume vol(spec, channels);
    vol.tensor = test::random_tensor(1000 + seed, vol.tensor.dims(), 1.0);
    OccupancyMask m1(spec);
    std::fill(m1.bits.begin(), m1.bits.end(), 1);

    const OccupancyMask m2 = recursion_mask(vol, m1, ks[1], w2, b2);
    const OccupancyMask m3 = recursion_mask(vol, m2, ks[2], w3, b3);
    if (m2.popcount() != 75 || m3.popcount() != 50) {
      detail = "cardinality mismatch at seed " + std::to_string(seed);
      return false;
    }
    for (std::int64_t v = 0; v < spec.voxel_count(); ++v) {
      if (m2.test(v) && !m1.test(v)) return false;
      if (m3.test(v) && !m2.test(v)) {
        detail = "nesting violated at seed " + std::to_string(seed);
        return false;
      }
    }
  }
  detail = "k = (100, 75, 50), 100 volumes";
  return true;
}

// 7. Metrics against counting oracles plus the closed-form constants.
bool criterion_metrics(std::string& detail) {
  const GridSpec spec = GridSpec::uniform({0, 0, 0}, 1.0, {20, 20, 20});
  std::uint64_t state = 81;
  for (int trial = 0; trial < 100; ++trial) {
    OccupancyMask a(spec), b(spec);
    SemanticGrid pa(spec), pb(spec);
    for (std::int64_t v = 0; v < spec.voxel_count(); ++v) {
      if (test::random_unit(state) < 0.3) a.set(v);
      if (test::random_unit(state) < 0.3) b.set(v);
      pa.labels[static_cast<std::size_t>(v)] =
          test::random_unit(state) < 0.4 ? kEmptyLabel
                                         : static_cast<std::uint16_t>(test::random_unit(state) * 5);
      pb.labels[static_cast<std::size_t>(v)] =
          test::random_unit(state) < 0.4 ? kEmptyLabel
                                         : static_cast<std::uint16_t>(test::random_unit(state) * 5);
    }
    if (iou_binary(a, b) != test::o_iou(a, b, nullptr)) {
      detail = "binary IoU mismatch at trial " + std::to_string(trial);
      return false;
    }
    const MiouResult got = miou(pa, pb, nullptr, 5);
    const auto [per_class, mean] = test::o_miou(pa, pb, nullptr, 5);
    if (got.mean != mean) {
      detail = "mIoU mismatch at trial " + std::to_string(trial);
      return false;
    }
    for (int c = 0; c < 5; ++c) {
      const double x = got.per_class[static_cast<std::size_t>(c)];
      const double y = per_class[static_cast<std::size_t>(c)];
      if (!((std::isnan(x) && std::isnan(y)) || x == y)) {
        detail = "per-class IoU mismatch at trial " + std::to_string(trial);
        return false;
      }
    }
  }

  if (total_loss({1.0, 1.0, 1.0, 1.0}, {}) != 13.0) {
    detail = "unit-term total loss is not 13";
    return false;
  }
  const double w100 = spatial_weight({100.0, 0.0, 7.0}, 0.01);
  if (std::abs(w100 - std::exp(-1.0)) > 1e-9) {
    detail = "spatial weight at 100 m deviates from e^-1";
    return false;
  }
  detail = "100 grid pairs exact, loss 13, w(100 m) = e^-1";
  return true;
}

// 8. Visibility-occupancy gap on the synthetic presets.
bool criterion_gap(std::string& detail) {
  const GridSpec spec = desk_grid();
  const auto depth_grid_of = [&](const SceneSpec& scene) {
    PointCloud points;
    for (const Camera& cam : scene.rig.cameras) {
      const PointCloud pts =
          depth_map_to_points(raycast_depth(scene, cam), cam.intrinsics, cam.extrinsics);
      points.points.insert(points.points.end(), pts.points.begin(), pts.points.end());
    }
    return voxelize_points(points, spec);
  };

  const SceneSpec occluded = gen_scene(42, SceneDifficulty::Occluded, spec);
  const OccupancyMask occ_depth = depth_grid_of(occluded);
  const OccupancyMask occ_gt = rasterize_gt(occluded, spec).occupied();
  const GapReport gap = gap_report(occ_depth, occ_gt);

  const SceneSpec plain = gen_scene(42, SceneDifficulty::Plain, spec);
  const OccupancyMask plain_depth = depth_grid_of(plain);
  const OccupancyMask plain_gt = rasterize_gt(plain, spec).occupied();
  // Ground truth restricted to visible voxels: cells holding at least one
  // surface hit.
  const double plain_iou = iou_binary(plain_depth, plain_gt, &plain_depth);

  std::ostringstream oss;
  oss << "occluded iou " << gap.iou << ", occlusion_miss " << gap.occlusion_miss
      << "; plain visible iou " << plain_iou;
  detail = oss.str();
  return gap.occlusion_miss > 0.0 && gap.iou < 0.9 && plain_iou >= 0.99;
}

// 9. Byte-identical pipeline artifacts across runs and thread counts 1 and 4.
bool criterion_determinism(std::string& detail) {
  RunConfig cfg;
  cfg.grid = GridSpec::uniform({-4.0, -4.0, -1.0}, 0.4, {20, 20, 8});
  cfg.channels = 8;
  cfg.heads = 2;
  cfg.ref_points = 2;
  cfg.bins = {1.0, 9.0, 8, 0.0};
  cfg.experts.variant = "mor";
  cfg.experts.iterations = 3;
  cfg.seed = 2026;

  const fs::path base = fs::temp_directory_path() / "occforge_acceptance_det";
  fs::remove_all(base);
  const std::string dirs[3] = {(base / "t1a").string(), (base / "t1b").string(),
                               (base / "t4").string()};
  cfg.out_dir = dirs[0];
  cfg.threads = 1;
  run_pipeline(cfg);
  cfg.out_dir = dirs[1];
  run_pipeline(cfg);
  cfg.out_dir = dirs[2];
  cfg.threads = 4;
  run_pipeline(cfg);

  bool ok = true;
  for (const char* name : {"f_out.ovg", "m_down.ovg", "pred.ovg", "gt.ovg", "depth_grid.ovg",
                           "routing.json", "metrics.json"}) {
    const std::string ref = slurp(dirs[0] + "/" + name);
    if (ref != slurp(dirs[1] + "/" + name) || ref != slurp(dirs[2] + "/" + name)) {
      detail = std::string("artifact differs: ") + name;
      ok = false;
      break;
    }
  }
  fs::remove_all(base);
  if (ok) detail = "7 artifacts identical across {run, run, 4 threads}";
  return ok;
}

// 10. Desk-scale runtime budget and the production-scale shape check.
bool criterion_performance(std::string& detail) {
  RunConfig cfg;  // desk defaults: 50x50x8 grid, 2 cameras at 64x64, C = 16
  cfg.experts.variant = "mor";
  cfg.experts.iterations = 3;
  cfg.threads = 1;
  cfg.seed = 7;
  cfg.out_dir = (fs::temp_directory_path() / "occforge_acceptance_perf").string();
  fs::remove_all(cfg.out_dir);

  const auto start = std::chrono::steady_clock::now();
  run_pipeline(cfg);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  fs::remove_all(cfg.out_dir);

  RunConfig paper = cfg;
  paper.threads = 4;
  const ShapeCheckResult check = run_paper_scale_check(paper);

  std::ostringstream oss;
  oss << "desk pipeline " << seconds << " s single-threaded; paper-scale grid "
      << check.down_dims.x() << "x" << check.down_dims.y() << "x" << check.down_dims.z()
      << " with " << check.active_voxels << " active voxels in " << check.dca_ms / 1000.0
      << " s";
  detail = oss.str();
  return seconds < 10.0 && check.down_dims == Eigen::Vector3i(100, 100, 16) &&
         check.active_voxels > 0;
}

}  // namespace

int main() {
  run_criterion(1, "projection round trip and voxel recovery", criterion_roundtrip);
  run_criterion(2, "voxelization vs brute-force oracle", criterion_voxelize);
  run_criterion(3, "DCA module vs unrolled reference", criterion_dca);
  run_criterion(4, "stage-3 empty/occupied case equation", criterion_stage3);
  run_criterion(5, "router and top-K contract", criterion_router);
  run_criterion(6, "recursive mask schedule", criterion_schedule);
  run_criterion(7, "metrics vs counting oracles", criterion_metrics);
  run_criterion(8, "visibility-occupancy gap presets", criterion_gap);
  run_criterion(9, "pipeline determinism across thread counts", criterion_determinism);
  run_criterion(10, "runtime budget and paper-scale shapes", criterion_performance);

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
