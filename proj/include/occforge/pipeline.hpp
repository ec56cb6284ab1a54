// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "occforge/dca.hpp"
#include "occforge/feature.hpp"
#include "occforge/grid.hpp"
#include "occforge/metrics.hpp"
#include "occforge/region_experts.hpp"
#include "occforge/synth.hpp"
#include "occforge/view_transformer.hpp"

namespace occforge {

struct ExpertSettings {
  std::string variant = "mor";  // moe | mor | none
  int top_k = 3;
  std::vector<double> ratios = {1.0, 0.75, 0.5};
  int iterations = 3;
};

/// Full run configuration. The JSON loader rejects unknown keys.
struct RunConfig {
  std::string scene_path;  // empty: generate from (seed, difficulty)
  std::string calib_path;  // empty: use the scene's rig
  std::string out_dir = "occforge_out";
  std::string difficulty = "occluded";
  GridSpec grid = desk_grid();
  Eigen::Vector3i lambda = Eigen::Vector3i::Constant(2);
  DepthBins bins;
  int channels = 16;
  int classes = 5;
  int heads = 8;
  int ref_points = 4;
  int ffn_hidden = 0;
  ExpertSettings experts;
  std::uint64_t seed = 42;
  int threads = 1;
  /// Seeded Gaussian noise on the rendered depth maps, meters; off by
  /// default. Applies to the pipeline inputs only (distributions and the
  /// pseudo point cloud), not to ground truth.
  double depth_noise_sigma = 0.0;
  bool paper_scale = false;
  bool dump_ply = false;

  DcaConfig dca_config() const;
  void validate() const;

  /// Production-scale constants: 200 x 200 x 16 grid at 0.4 m over
  /// [-40, 40] x [-40, 40] x [-1, 5.4] m, horizontal-only downsampling
  /// (2, 2, 1) and 32 channels. Shape checks only; no numeric claims.
  void apply_paper_scale();

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_json_file(const std::string& path);
  nlohmann::ordered_json to_json() const;
};

struct StageTimings {
  double stage1_ms = 0.0;
  double d2v_ms = 0.0;
  double experts_ms = 0.0;
};

struct PipelineResult {
  SceneSpec scene;
  SemanticGrid gt;
  SemanticGrid pred;
  OccupancyMask depth_grid;  // full-resolution voxelized depth points
  OccupancyMask m_down;
  FeatureVolume f_final;
  RoutingReport routing;
  double iou = 0.0;
  MiouResult miou_result;
  GapReport gap;
  StageTimings timings;
  double m_down_occupancy = 0.0;
  std::vector<std::string> artifacts;  // paths written under out_dir
};

/// Runs scene synthesis, the view transformer, the configured expert variant,
/// the occupancy decoder and metrics, then writes f_out.ovg, m_down.ovg,
/// pred.ovg, gt.ovg, depth_grid.ovg, routing.json and metrics.json to
/// config.out_dir. Deterministic in output bytes for fixed (config, seed)
/// and any thread count.
PipelineResult run_pipeline(const RunConfig& config);

nlohmann::ordered_json metrics_to_json(const PipelineResult& result);
nlohmann::ordered_json routing_to_json(const RoutingReport& report);

/// Trilinear upsampling onto a target lattice (clamped border sampling).
FeatureVolume upsample_trilinear(const FeatureVolume& src, const GridSpec& target,
                                 int threads = 1);

/// Occupancy decoder: trilinear upsampling followed by a seeded linear class
/// head (`decoder.head.*`, classes + 1 outputs, last = empty) and argmax with
/// lower-class tie-breaking.
SemanticGrid decode_occupancy(const FeatureVolume& f_final, const GridSpec& full_grid,
                              int classes, ParameterStore& store, int threads = 1);

struct ShapeCheckResult {
  Eigen::Vector3i down_dims = Eigen::Vector3i::Zero();
  std::int64_t active_voxels = 0;
  double dca_ms = 0.0;
};

/// Paper-scale shape check: builds the production-scale grid, runs stage 1,
/// and drives one masked DCA step on the downsampled lattice. Throws on any
/// shape or finiteness violation.
ShapeCheckResult run_paper_scale_check(const RunConfig& config);

/// Wall-clock per component over `repeats` runs; stage labels are
/// stage1, D2V and RE or R2E depending on the configured variant.
nlohmann::ordered_json run_bench(const RunConfig& config, int repeats);

}  // namespace occforge
