// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "occforge/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "occforge/errors.hpp"
#include "occforge/nn.hpp"
#include "occforge/ovg.hpp"
#include "occforge/params.hpp"
#include "occforge/threads.hpp"

namespace occforge {

namespace {

using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point start) {
  return std::chrono::duration<double, std::milli>(clock_type::now() - start).count();
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown key \"" + item.key() + "\" in " + where);
  }
}

Eigen::Vector3i parse_vec3i(const nlohmann::json& j, const std::string& where) {
  if (j.is_number_integer()) return Eigen::Vector3i::Constant(j.get<int>());
  const auto v = j.get<std::vector<int>>();
  if (v.size() != 3) throw ConfigError(where + " must be an int or a 3-element array");
  return {v[0], v[1], v[2]};
}

}  // namespace

DcaConfig RunConfig::dca_config() const {
  DcaConfig c;
  c.channels = channels;
  c.heads = heads;
  c.ref_points = ref_points;
  c.ffn_hidden = ffn_hidden;
  c.threads = threads;
  return c;
}

void RunConfig::validate() const {
  try {
    grid.validate();
    bins.validate();
    dca_config().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(lambda.array() >= 1).all()) throw ConfigError("lambda entries must be >= 1");
  if (depth_noise_sigma < 0.0) throw ConfigError("depth_noise_sigma must be nonnegative");
  if (channels < 3) throw ConfigError("channels must be >= 3");
  if (classes < 1) throw ConfigError("classes must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (experts.variant != "moe" && experts.variant != "mor" && experts.variant != "none")
    throw ConfigError("expert variant must be moe, mor or none");
  if (experts.variant == "moe" && experts.top_k < 1)
    throw ConfigError("experts.top_k must be >= 1");
  if (experts.variant == "mor") {
    if (experts.iterations < 1) throw ConfigError("experts.iterations must be >= 1");
    if (static_cast<std::size_t>(experts.iterations) > experts.ratios.size())
      throw ConfigError("experts.iterations exceeds the ratio list");
  }
  difficulty_from_string(difficulty);
}

void RunConfig::apply_paper_scale() {
  grid = GridSpec::uniform({-40.0, -40.0, -1.0}, 0.4, {200, 200, 16});
  lambda = {2, 2, 1};
  channels = 32;
  classes = 5;
  paper_scale = true;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  check_keys(j,
             {"scene", "calibration", "out_dir", "difficulty", "grid", "lambda", "depth_bins",
              "channels", "classes", "heads", "ref_points", "ffn_hidden", "experts", "seed",
              "threads", "depth_noise_sigma", "paper_scale", "dump_ply"},
             "config");
  RunConfig cfg;
  try {
    if (j.contains("scene")) cfg.scene_path = j["scene"].get<std::string>();
    if (j.contains("calibration")) cfg.calib_path = j["calibration"].get<std::string>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("difficulty")) cfg.difficulty = j["difficulty"].get<std::string>();
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      check_keys(g, {"origin", "resolution", "dims"}, "config.grid");
      const auto origin = g.at("origin").get<std::vector<double>>();
      const auto dims = g.at("dims").get<std::vector<int>>();
      if (origin.size() != 3 || dims.size() != 3)
        throw ConfigError("grid origin/dims must have 3 entries");
      cfg.grid = GridSpec::uniform({origin[0], origin[1], origin[2]},
                                   g.at("resolution").get<double>(), {dims[0], dims[1], dims[2]});
    }
    if (j.contains("lambda")) cfg.lambda = parse_vec3i(j["lambda"], "config.lambda");
    if (j.contains("depth_bins")) {
      const auto& b = j["depth_bins"];
      check_keys(b, {"min", "max", "count", "sigma"}, "config.depth_bins");
      if (b.contains("min")) cfg.bins.d_min = b["min"].get<double>();
      if (b.contains("max")) cfg.bins.d_max = b["max"].get<double>();
      if (b.contains("count")) cfg.bins.count = b["count"].get<int>();
      if (b.contains("sigma")) cfg.bins.sigma = b["sigma"].get<double>();
    }
    if (j.contains("channels")) cfg.channels = j["channels"].get<int>();
    if (j.contains("classes")) cfg.classes = j["classes"].get<int>();
    if (j.contains("heads")) cfg.heads = j["heads"].get<int>();
    if (j.contains("ref_points")) cfg.ref_points = j["ref_points"].get<int>();
    if (j.contains("ffn_hidden")) cfg.ffn_hidden = j["ffn_hidden"].get<int>();
    if (j.contains("experts")) {
      const auto& e = j["experts"];
      check_keys(e, {"variant", "top_k", "ratios", "iterations"}, "config.experts");
      if (e.contains("variant")) cfg.experts.variant = e["variant"].get<std::string>();
      if (e.contains("top_k")) cfg.experts.top_k = e["top_k"].get<int>();
      if (e.contains("ratios")) cfg.experts.ratios = e["ratios"].get<std::vector<double>>();
      if (e.contains("iterations")) cfg.experts.iterations = e["iterations"].get<int>();
    }
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
    if (j.contains("depth_noise_sigma"))
      cfg.depth_noise_sigma = j["depth_noise_sigma"].get<double>();
    if (j.contains("paper_scale")) cfg.paper_scale = j["paper_scale"].get<bool>();
    if (j.contains("dump_ply")) cfg.dump_ply = j["dump_ply"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return from_json(j);
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["scene"] = scene_path;
  j["calibration"] = calib_path;
  j["out_dir"] = out_dir;
  j["difficulty"] = difficulty;
  j["grid"] = {{"origin", {grid.origin.x(), grid.origin.y(), grid.origin.z()}},
               {"resolution", grid.cell.x()},
               {"dims", {grid.dims.x(), grid.dims.y(), grid.dims.z()}}};
  j["lambda"] = {lambda.x(), lambda.y(), lambda.z()};
  j["depth_bins"] = {{"min", bins.d_min}, {"max", bins.d_max}, {"count", bins.count},
                     {"sigma", bins.sigma}};
  j["channels"] = channels;
  j["classes"] = classes;
  j["heads"] = heads;
  j["ref_points"] = ref_points;
  j["ffn_hidden"] = ffn_hidden;
  j["experts"] = {{"variant", experts.variant},
                  {"top_k", experts.top_k},
                  {"ratios", experts.ratios},
                  {"iterations", experts.iterations}};
  j["seed"] = seed;
  j["threads"] = threads;
  j["depth_noise_sigma"] = depth_noise_sigma;
  j["paper_scale"] = paper_scale;
  j["dump_ply"] = dump_ply;
  return j;
}

FeatureVolume upsample_trilinear(const FeatureVolume& src, const GridSpec& target, int threads) {
  src.validate();
  const int channels = src.channels();
  FeatureVolume out(target, channels);
  const Eigen::Vector3i sdims = src.spec.dims;
  const std::int64_t voxels = target.voxel_count();

  parallel_for(voxels, threads, [&](std::int64_t lo, std::int64_t hi) {
    std::vector<double> acc(static_cast<std::size_t>(channels));
    for (std::int64_t v = lo; v < hi; ++v) {
      const Eigen::Vector3d p = voxel_center(target.index_of_linear(v), target);
      double frac[3];
      int lo_idx[3];
      for (int a = 0; a < 3; ++a) {
        // Continuous index into the source lattice, clamped to its borders.
        double t = (p[a] - src.spec.origin[a]) / src.spec.cell[a] - 0.5;
        t = std::clamp(t, 0.0, static_cast<double>(sdims[a] - 1));
        lo_idx[a] = std::min(static_cast<int>(std::floor(t)), sdims[a] - 1);
        frac[a] = t - lo_idx[a];
      }
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int dx = 0; dx < 2; ++dx) {
        const int ix = std::min(lo_idx[0] + dx, sdims.x() - 1);
        const double wx = dx == 0 ? 1.0 - frac[0] : frac[0];
        if (wx == 0.0) continue;
        for (int dy = 0; dy < 2; ++dy) {
          const int iy = std::min(lo_idx[1] + dy, sdims.y() - 1);
          const double wy = dy == 0 ? 1.0 - frac[1] : frac[1];
          if (wy == 0.0) continue;
          for (int dz = 0; dz < 2; ++dz) {
            const int iz = std::min(lo_idx[2] + dz, sdims.z() - 1);
            const double wz = dz == 0 ? 1.0 - frac[2] : frac[2];
            if (wz == 0.0) continue;
            const double w = wx * wy * wz;
            const float* f = src.voxel(src.spec.linear_index({ix, iy, iz}));
            for (int c = 0; c < channels; ++c)
              acc[static_cast<std::size_t>(c)] += w * static_cast<double>(f[c]);
          }
        }
      }
      float* dst = out.voxel(v);
      for (int c = 0; c < channels; ++c)
        dst[c] = static_cast<float>(acc[static_cast<std::size_t>(c)]);
    }
  });
  return out;
}

SemanticGrid decode_occupancy(const FeatureVolume& f_final, const GridSpec& full_grid,
                              int classes, ParameterStore& store, int threads) {
  const int c = f_final.channels();
  const Tensor& head_w = store.uniform("decoder.head.w", {c, classes + 1});
  const Tensor& head_b = store.uniform("decoder.head.b", {classes + 1});

  const FeatureVolume up = upsample_trilinear(f_final, full_grid, threads);
  const Tensor logits = linear(up.tensor, head_w, &head_b, threads);

  SemanticGrid pred(full_grid);
  const std::int64_t voxels = full_grid.voxel_count();
  const int n_out = classes + 1;
  for (std::int64_t v = 0; v < voxels; ++v) {
    const float* row = logits.data() + v * n_out;
    int best = 0;
    for (int i = 1; i < n_out; ++i)
      if (row[i] > row[best]) best = i;  // ties keep the lower index
    pred.labels[static_cast<std::size_t>(v)] =
        best == classes ? kEmptyLabel : static_cast<std::uint16_t>(best);
  }
  return pred;
}

namespace {

struct CoreInputs {
  SceneSpec scene;
  CameraRig rig;
  ViewTransformerInputs vt;
  OccupancyMask depth_grid;
};

/// Seeded Gaussian perturbation of a depth map, clamped to stay positive.
void add_depth_noise(DepthMap& depth, double sigma, std::uint64_t seed, int camera) {
  SplitMix64 rng{seed ^ fnv1a64("depth_noise." + std::to_string(camera))};
  for (double& d : depth.values) {
    if (!std::isfinite(d)) continue;
    const double u1 = std::max(rng.next_unit(), 1e-300);
    const double u2 = rng.next_unit();
    const double gauss = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    d = std::max(d + sigma * gauss, 1e-3);
  }
}

CoreInputs prepare_inputs(const RunConfig& cfg) {
  CoreInputs in;
  in.scene = cfg.scene_path.empty()
                 ? gen_scene(cfg.seed, difficulty_from_string(cfg.difficulty), cfg.grid)
                 : load_scene(cfg.scene_path);
  in.rig = cfg.calib_path.empty() ? in.scene.rig : load_rig(cfg.calib_path);
  in.rig.validate();

  in.vt.rig = in.rig;
  in.vt.grid = cfg.grid;
  in.vt.lambda = cfg.lambda;
  for (int cam = 0; cam < in.rig.count(); ++cam) {
    const Camera& camera = in.rig.cameras[static_cast<std::size_t>(cam)];
    DepthMap depth = raycast_depth(in.scene, camera, cfg.threads);
    if (cfg.depth_noise_sigma > 0.0)
      add_depth_noise(depth, cfg.depth_noise_sigma, cfg.seed, cam);
    SynthFeatures feats = synth_features(in.scene, camera, cam, cfg.channels, cfg.threads);
    in.vt.image_features.push_back(std::move(feats.image));
    in.vt.depth_features.push_back(std::move(feats.depth));
    in.vt.depth_dists.push_back(depth_to_distribution(depth, cfg.bins));
    const PointCloud pts =
        depth_map_to_points(depth, camera.intrinsics, camera.extrinsics, 1, cam);
    in.vt.depth_points.points.insert(in.vt.depth_points.points.end(), pts.points.begin(),
                                     pts.points.end());
    in.vt.depth_points.camera_index.insert(in.vt.depth_points.camera_index.end(),
                                           pts.camera_index.begin(), pts.camera_index.end());
  }
  in.depth_grid = voxelize_points(in.vt.depth_points, cfg.grid);
  return in;
}

PipelineResult run_core(const RunConfig& cfg) {
  cfg.validate();
  PipelineResult result;
  CoreInputs in = prepare_inputs(cfg);
  result.scene = in.scene;
  result.depth_grid = std::move(in.depth_grid);

  ParameterStore store(cfg.seed);
  const DcaConfig dcfg = cfg.dca_config();
  const ViewTransformerParams vt_params = ViewTransformerParams::init(store, dcfg);
  ViewTransformerTimings vt_times;
  ViewTransformerOutput vt = run_view_transformer(in.vt, vt_params, dcfg, &vt_times);
  result.timings.stage1_ms = vt_times.stage1_ms;
  result.timings.d2v_ms = vt_times.refine_ms;
  result.m_down = vt.m_down;
  result.m_down_occupancy = occupancy_ratio(vt.m_down);

  const auto t_experts = clock_type::now();
  if (cfg.experts.variant == "moe") {
    const RegionPartition partition = default_region_partition(vt.f_out.spec);
    result.f_final =
        region_expert_refine(vt.f_out, in.vt.image_features, in.rig, partition,
                             cfg.experts.top_k, store, dcfg, &result.routing);
  } else if (cfg.experts.variant == "mor") {
    result.f_final =
        recursive_expert_refine(vt.f_out, in.vt.image_features, in.rig, cfg.experts.ratios,
                                cfg.experts.iterations, store, dcfg, &result.routing);
  } else {
    result.f_final = vt.f_out;
    result.routing.variant = "none";
  }
  result.timings.experts_ms = ms_since(t_experts);
  require(result.f_final.tensor.all_finite(), "expert refinement produced non-finite features");
  require(result.m_down.bits == vt.m_down.bits, "M_down was mutated after stage 1");

  result.pred = decode_occupancy(result.f_final, cfg.grid, cfg.classes, store, cfg.threads);
  result.gt = rasterize_gt(in.scene, cfg.grid);

  const OccupancyMask pred_occ = result.pred.occupied();
  const OccupancyMask gt_occ = result.gt.occupied();
  result.iou = iou_binary(pred_occ, gt_occ);
  result.miou_result = miou(result.pred, result.gt, nullptr, cfg.classes);
  result.gap = gap_report(result.depth_grid, gt_occ);
  return result;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << text;
}

void write_ply(const std::string& path, const SemanticGrid& pred) {
  std::string body;
  std::int64_t count = 0;
  char line[96];
  for (std::int64_t v = 0; v < pred.spec.voxel_count(); ++v) {
    if (pred.labels[static_cast<std::size_t>(v)] == kEmptyLabel) continue;
    const Eigen::Vector3d p = voxel_center(pred.spec.index_of_linear(v), pred.spec);
    std::snprintf(line, sizeof(line), "%.6f %.6f %.6f\n", p.x(), p.y(), p.z());
    body += line;
    ++count;
  }
  std::string header = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(count) +
                       "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  write_text(path, header + body);
}

}  // namespace

nlohmann::ordered_json metrics_to_json(const PipelineResult& result) {
  nlohmann::ordered_json j;
  j["iou"] = result.iou;
  j["per_class"] = result.miou_result.per_class;  // NaN serializes as null
  j["miou"] = result.miou_result.mean;
  j["gap"] = {{"iou", result.gap.iou},
              {"over_densification", result.gap.over_densification},
              {"occlusion_miss", result.gap.occlusion_miss}};
  return j;
}

nlohmann::ordered_json routing_to_json(const RoutingReport& report) {
  nlohmann::ordered_json j;
  j["variant"] = report.variant;
  j["scores"] = report.scores;
  j["selected"] = report.selected;
  j["weights"] = report.weights;
  j["executed"] = report.executed;
  j["mask_sizes"] = report.mask_sizes;
  return j;
}

PipelineResult run_pipeline(const RunConfig& config) {
  PipelineResult result = run_core(config);

  namespace fs = std::filesystem;
  fs::create_directories(config.out_dir);
  const auto path = [&](const char* name) { return (fs::path(config.out_dir) / name).string(); };

  write_ovg(path("f_out.ovg"), result.f_final);
  write_ovg(path("m_down.ovg"), result.m_down);
  write_ovg(path("pred.ovg"), result.pred);
  write_ovg(path("gt.ovg"), result.gt);
  write_ovg(path("depth_grid.ovg"), result.depth_grid);
  write_text(path("routing.json"), routing_to_json(result.routing).dump(2) + "\n");
  write_text(path("metrics.json"), metrics_to_json(result).dump(2) + "\n");
  result.artifacts = {path("f_out.ovg"), path("m_down.ovg"),     path("pred.ovg"),
                      path("gt.ovg"),    path("depth_grid.ovg"), path("routing.json"),
                      path("metrics.json")};
  if (config.dump_ply) {
    write_ply(path("pred_points.ply"), result.pred);
    result.artifacts.push_back(path("pred_points.ply"));
  }
  return result;
}

ShapeCheckResult run_paper_scale_check(const RunConfig& config) {
  RunConfig cfg = config;
  cfg.apply_paper_scale();
  cfg.validate();

  CoreInputs in = prepare_inputs(cfg);
  const DcaConfig dcfg = cfg.dca_config();
  Stage1Output s1 = stage1(in.vt.image_features, in.vt.depth_dists, in.vt.depth_points, in.rig,
                           cfg.grid, cfg.lambda, cfg.threads);

  ShapeCheckResult check;
  check.down_dims = s1.f_down.spec.dims;
  check.active_voxels = s1.m_down.popcount();
  require(check.down_dims == Eigen::Vector3i(100, 100, 16),
          "paper-scale downsampled grid must be 100x100x16");
  require(check.active_voxels > 0, "paper-scale mask is empty");

  ParameterStore store(cfg.seed);
  const DcaParams params = DcaParams::init(store, "d2v.stage2", dcfg);
  const auto t0 = clock_type::now();
  const FeatureVolume out = dca_module(s1.f_down, in.vt.image_features, in.rig, &s1.m_down,
                                       params, dcfg);
  check.dca_ms = ms_since(t0);
  require(out.spec.dims == check.down_dims, "paper-scale DCA changed the lattice");
  require(out.channels() == cfg.channels, "paper-scale DCA changed the channel count");
  require(out.tensor.all_finite(), "paper-scale DCA produced non-finite values");
  return check;
}

nlohmann::ordered_json run_bench(const RunConfig& config, int repeats) {
  if (repeats < 1) throw ConfigError("bench repeats must be >= 1");
  std::vector<double> stage1_ms, d2v_ms, experts_ms;
  for (int r = 0; r < repeats; ++r) {
    const PipelineResult result = run_core(config);
    stage1_ms.push_back(result.timings.stage1_ms);
    d2v_ms.push_back(result.timings.d2v_ms);
    experts_ms.push_back(result.timings.experts_ms);
  }
  nlohmann::ordered_json stages;
  stages["stage1"] = stage1_ms;
  stages["D2V"] = d2v_ms;
  if (config.experts.variant == "moe") stages["RE"] = experts_ms;
  if (config.experts.variant == "mor") stages["R2E"] = experts_ms;

  nlohmann::ordered_json j;
  j["repeats"] = repeats;
  j["variant"] = config.experts.variant;
  j["stages"] = stages;
  return j;
}

}  // namespace occforge
