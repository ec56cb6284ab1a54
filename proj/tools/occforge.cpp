// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "occforge/errors.hpp"
#include "occforge/metrics.hpp"
#include "occforge/ovg.hpp"
#include "occforge/pipeline.hpp"
#include "occforge/synth.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitInvariant = 3;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> expert;
  std::optional<std::string> out;
  bool paper_scale = false;
  bool dump_ply = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "run configuration JSON");
  cmd->add_option("--seed", flags.seed, "override the run seed");
  cmd->add_option("--threads", flags.threads, "worker threads (env OCCFORGE_THREADS as fallback)");
  cmd->add_option("--expert", flags.expert, "expert variant: moe, mor or none")
      ->check(CLI::IsMember({"moe", "mor", "none"}));
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_flag("--paper-scale", flags.paper_scale,
                "production-scale grid shape check (no numeric claims)");
  cmd->add_flag("--dump-ply", flags.dump_ply, "export predicted occupied voxel centers as PLY");
}

occforge::RunConfig resolve_config(const CommonFlags& flags) {
  occforge::RunConfig cfg;
  if (!flags.config_path.empty()) cfg = occforge::RunConfig::from_json_file(flags.config_path);
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.expert) cfg.experts.variant = *flags.expert;
  if (flags.out) cfg.out_dir = *flags.out;
  if (flags.paper_scale) cfg.paper_scale = true;
  if (flags.dump_ply) cfg.dump_ply = true;
  if (flags.threads) {
    cfg.threads = *flags.threads;
  } else if (const char* env = std::getenv("OCCFORGE_THREADS")) {
    cfg.threads = std::max(1, std::atoi(env));
  }
  cfg.validate();
  return cfg;
}

void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw occforge::ConfigError("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

int cmd_gen_scene(std::uint64_t seed, const std::string& difficulty, const std::string& out) {
  const occforge::SceneSpec scene =
      occforge::gen_scene(seed, occforge::difficulty_from_string(difficulty));
  occforge::save_scene(scene, out);
  std::cout << "wrote " << out << " (" << scene.solid_count() << " solids)\n";
  return 0;
}

int cmd_pipeline(const CommonFlags& flags) {
  const occforge::RunConfig cfg = resolve_config(flags);
  if (cfg.paper_scale) {
    const occforge::ShapeCheckResult check = occforge::run_paper_scale_check(cfg);
    nlohmann::ordered_json j;
    j["down_dims"] = {check.down_dims.x(), check.down_dims.y(), check.down_dims.z()};
    j["active_voxels"] = check.active_voxels;
    j["dca_ms"] = check.dca_ms;
    std::filesystem::create_directories(cfg.out_dir);
    write_json_file((std::filesystem::path(cfg.out_dir) / "shape_check.json").string(), j);
    std::cout << "paper-scale shape check ok: grid " << check.down_dims.x() << "x"
              << check.down_dims.y() << "x" << check.down_dims.z() << ", "
              << check.active_voxels << " active voxels\n";
    return 0;
  }
  const occforge::PipelineResult result = occforge::run_pipeline(cfg);
  std::cout << "stage1 mask occupancy: " << result.m_down_occupancy << "\n";
  std::cout << "iou " << result.iou << "  miou " << result.miou_result.mean << "  gap.iou "
            << result.gap.iou << "\n";
  for (const std::string& artifact : result.artifacts) std::cout << "wrote " << artifact << "\n";
  return 0;
}

// Accepts either a mask OVG or a label OVG (labels reduce to occupancy).
occforge::OccupancyMask load_occupancy(const std::string& path) {
  if (occforge::peek_ovg_kind(path) == occforge::OvgKind::Labels)
    return occforge::read_ovg_labels(path).occupied();
  return occforge::read_ovg_mask(path);
}

int cmd_gap_report(const std::string& depth_path, const std::string& scene_path,
                   const std::string& gt_path, const std::string& out) {
  const occforge::OccupancyMask gt = load_occupancy(gt_path);

  occforge::OccupancyMask depth_grid;
  if (!depth_path.empty()) {
    depth_grid = load_occupancy(depth_path);
    if (depth_grid.spec.dims != gt.spec.dims)
      throw occforge::ConfigError("depth grid and ground truth dims differ");
  } else {
    const occforge::SceneSpec scene = occforge::load_scene(scene_path);
    occforge::PointCloud points;
    for (int cam = 0; cam < scene.rig.count(); ++cam) {
      const occforge::Camera& camera = scene.rig.cameras[static_cast<std::size_t>(cam)];
      const occforge::DepthMap depth = occforge::raycast_depth(scene, camera);
      const occforge::PointCloud pts =
          occforge::depth_map_to_points(depth, camera.intrinsics, camera.extrinsics, 1, cam);
      points.points.insert(points.points.end(), pts.points.begin(), pts.points.end());
    }
    depth_grid = occforge::voxelize_points(points, gt.spec);
  }

  const occforge::GapReport report = occforge::gap_report(depth_grid, gt);
  nlohmann::ordered_json j;
  j["iou"] = report.iou;
  j["over_densification"] = report.over_densification;
  j["occlusion_miss"] = report.occlusion_miss;
  write_json_file(out, j);
  std::cout << "iou " << report.iou << "  over_densification " << report.over_densification
            << "  occlusion_miss " << report.occlusion_miss << "\n";
  return 0;
}

int cmd_bench(const CommonFlags& flags, int repeats, const std::string& out) {
  const occforge::RunConfig cfg = resolve_config(flags);
  const nlohmann::ordered_json j = occforge::run_bench(cfg, repeats);
  write_json_file(out, j);
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic 3D semantic occupancy pipeline on synthetic scenes"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-scene", "generate a synthetic scene JSON");
  std::uint64_t gen_seed = 0;
  std::string gen_difficulty = "occluded";
  std::string gen_out = "scene.json";
  gen->add_option("--seed", gen_seed, "scene seed");
  gen->add_option("--difficulty", gen_difficulty, "plain, occluded or cluttered")
      ->check(CLI::IsMember({"plain", "occluded", "cluttered"}));
  gen->add_option("--out", gen_out, "output scene file");

  auto* pipe = app.add_subcommand("pipeline", "run the full pipeline and write artifacts");
  CommonFlags pipe_flags;
  add_common(pipe, pipe_flags);

  auto* gap = app.add_subcommand("gap-report", "visibility-occupancy gap between grids");
  std::string gap_depth, gap_scene, gap_gt, gap_out = "gap.json";
  auto* gap_depth_opt = gap->add_option("--depth", gap_depth, "depth-derived occupancy OVG");
  auto* gap_scene_opt = gap->add_option("--scene", gap_scene, "scene JSON to ray cast");
  gap->add_option("--gt", gap_gt, "ground-truth occupancy OVG")->required();
  gap->add_option("--out", gap_out, "output report JSON");
  gap_depth_opt->excludes(gap_scene_opt);

  auto* bench = app.add_subcommand("bench", "per-stage wall times");
  CommonFlags bench_flags;
  int bench_repeats = 3;
  std::string bench_out = "bench.json";
  add_common(bench, bench_flags);
  bench->add_option("--repeats", bench_repeats, "samples per stage");
  bench->add_option("--bench-out", bench_out, "output timing JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_scene(gen_seed, gen_difficulty, gen_out);
    if (pipe->parsed()) return cmd_pipeline(pipe_flags);
    if (gap->parsed()) {
      if (gap_depth.empty() && gap_scene.empty())
        throw occforge::ConfigError("gap-report needs --depth or --scene");
      return cmd_gap_report(gap_depth, gap_scene, gap_gt, gap_out);
    }
    if (bench->parsed()) return cmd_bench(bench_flags, bench_repeats, bench_out);
  } catch (const occforge::InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const occforge::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
  return 0;
}
