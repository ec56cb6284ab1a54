// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "occforge/view_transformer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "occforge/errors.hpp"
#include "occforge/threads.hpp"

namespace occforge {

void DepthBins::validate() const {
  if (!(d_min < d_max)) throw std::invalid_argument("depth bins: d_min must be below d_max");
  if (count < 1) throw std::invalid_argument("depth bins: need at least one bin");
  if (sigma < 0.0) throw std::invalid_argument("depth bins: sigma must be nonnegative");
}

int DepthBins::bin_of(double depth) const {
  const int b = static_cast<int>(std::floor((depth - d_min) / width()));
  return std::clamp(b, 0, count - 1);
}

DepthDistribution depth_to_distribution(const DepthMap& depth, const DepthBins& bins) {
  bins.validate();
  DepthDistribution dist;
  dist.width = depth.width;
  dist.height = depth.height;
  dist.bins = bins;
  dist.probs = Tensor({depth.height, depth.width, bins.count});
  dist.valid.assign(static_cast<std::size_t>(depth.width) * depth.height, 0);

  const int n = bins.count;
  const float uniform = 1.0f / static_cast<float>(n);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      float* p = dist.probs.data() + (static_cast<std::int64_t>(v) * depth.width + u) * n;
      if (!depth.has_return(u, v)) {
        for (int b = 0; b < n; ++b) p[b] = uniform;
        continue;
      }
      dist.valid[static_cast<std::size_t>(v) * depth.width + u] = 1;
      const int hot = bins.bin_of(depth.at(u, v));
      if (bins.sigma == 0.0) {
        p[hot] = 1.0f;
        continue;
      }
      double sum = 0.0;
      for (int b = 0; b < n; ++b) {
        const double d = (b - hot) / bins.sigma;
        const double w = std::exp(-0.5 * d * d);
        p[b] = static_cast<float>(w);
        sum += w;
      }
      for (int b = 0; b < n; ++b) p[b] = static_cast<float>(p[b] / sum);
    }
  }
  return dist;
}

FeatureVolume forward_projection(const std::vector<FeatureMap>& features,
                                 const std::vector<DepthDistribution>& dists,
                                 const CameraRig& rig, const GridSpec& spec, int threads) {
  if (features.size() != dists.size() ||
      features.size() != static_cast<std::size_t>(rig.count()))
    throw std::invalid_argument("forward_projection: need one feature map and distribution per camera");
  if (features.empty()) throw std::invalid_argument("forward_projection: empty rig");
  const int channels = features.front().channels();
  for (const FeatureMap& map : features)
    if (map.channels() != channels)
      throw std::invalid_argument("forward_projection: channel mismatch across cameras");

  struct Splat {
    std::int64_t voxel;
    float weight;
    std::int32_t cam;
    std::int32_t pixel;
  };
  std::vector<Splat> splats;

  for (int cam = 0; cam < rig.count(); ++cam) {
    const DepthDistribution& dist = dists[static_cast<std::size_t>(cam)];
    const FeatureMap& map = features[static_cast<std::size_t>(cam)];
    if (dist.width != map.width() || dist.height != map.height())
      throw std::invalid_argument("forward_projection: distribution/feature size mismatch");
    const Camera& camera = rig.cameras[static_cast<std::size_t>(cam)];
    const int nbins = dist.bins.count;
    for (int v = 0; v < dist.height; ++v) {
      for (int u = 0; u < dist.width; ++u) {
        if (!dist.is_valid(u, v)) continue;
        const float* p =
            dist.probs.data() + (static_cast<std::int64_t>(v) * dist.width + u) * nbins;
        for (int b = 0; b < nbins; ++b) {
          if (p[b] == 0.0f) continue;
          const Eigen::Vector3d point_cam =
              backproject_pixel({static_cast<double>(u), static_cast<double>(v)},
                                dist.bins.center(b), camera.intrinsics);
          const Eigen::Vector3d ego = cam_to_ego(point_cam, camera.extrinsics);
          Eigen::Vector3i idx;
          if (!spec.locate(ego, idx)) continue;
          splats.push_back({spec.linear_index(idx), p[b], cam,
                            static_cast<std::int32_t>(v * dist.width + u)});
        }
      }
    }
  }

  // Group contributions per voxel (stable counting sort keeps the original
  // camera/pixel/bin order) and reduce each voxel independently, so the sum
  // order never depends on the thread count.
  const std::int64_t voxels = spec.voxel_count();
  std::vector<std::int64_t> counts(static_cast<std::size_t>(voxels) + 1, 0);
  for (const Splat& s : splats) ++counts[static_cast<std::size_t>(s.voxel) + 1];
  for (std::int64_t v = 0; v < voxels; ++v)
    counts[static_cast<std::size_t>(v) + 1] += counts[static_cast<std::size_t>(v)];
  std::vector<std::int64_t> order(splats.size());
  {
    std::vector<std::int64_t> cursor(counts.begin(), counts.end() - 1);
    for (std::size_t i = 0; i < splats.size(); ++i)
      order[static_cast<std::size_t>(cursor[static_cast<std::size_t>(splats[i].voxel)]++)] =
          static_cast<std::int64_t>(i);
  }

  FeatureVolume out(spec, channels);
  parallel_for(voxels, threads, [&](std::int64_t lo, std::int64_t hi) {
    std::vector<double> acc(static_cast<std::size_t>(channels));
    for (std::int64_t v = lo; v < hi; ++v) {
      const std::int64_t begin = counts[static_cast<std::size_t>(v)];
      const std::int64_t end = counts[static_cast<std::size_t>(v) + 1];
      if (begin == end) continue;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::int64_t k = begin; k < end; ++k) {
        const Splat& s = splats[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
        const FeatureMap& map = features[static_cast<std::size_t>(s.cam)];
        const float* feat = map.tensor.data() + static_cast<std::int64_t>(s.pixel) * channels;
        const double w = static_cast<double>(s.weight);
        for (int c = 0; c < channels; ++c)
          acc[static_cast<std::size_t>(c)] += w * static_cast<double>(feat[c]);
      }
      float* dst = out.voxel(v);
      for (int c = 0; c < channels; ++c)
        dst[c] = static_cast<float>(acc[static_cast<std::size_t>(c)]);
    }
  });
  return out;
}

Stage1Output stage1(const std::vector<FeatureMap>& features,
                    const std::vector<DepthDistribution>& dists, const PointCloud& depth_points,
                    const CameraRig& rig, const GridSpec& spec, const Eigen::Vector3i& lambda,
                    int threads) {
  Stage1Output out;
  const FeatureVolume full = forward_projection(features, dists, rig, spec, threads);
  out.f_down = downsample_features(full, lambda);
  out.m_down = downsample_mask(voxelize_points(depth_points, spec), lambda);
  return out;
}

FeatureVolume stage2_densify(const FeatureVolume& f_down, const std::vector<FeatureMap>& f_img,
                             const CameraRig& rig, const DcaParams& params,
                             const DcaConfig& config) {
  return dca_module(f_down, f_img, rig, nullptr, params, config);
}

FeatureVolume stage3_geometric(const FeatureVolume& f_dense,
                               const std::vector<FeatureMap>& f_depth,
                               const OccupancyMask& m_down, const Tensor& e_empty,
                               const CameraRig& rig, const DcaParams& params,
                               const DcaConfig& config) {
  if (e_empty.size() != f_dense.channels())
    throw std::invalid_argument("stage3_geometric: e_empty extent must match channels");
  FeatureVolume out = dca_module(f_dense, f_depth, rig, &m_down, params, config);
  const int c = out.channels();
  const std::int64_t voxels = out.spec.voxel_count();
  for (std::int64_t v = 0; v < voxels; ++v) {
    if (!m_down.test(v))
      std::memcpy(out.voxel(v), e_empty.data(), sizeof(float) * static_cast<std::size_t>(c));
  }
  return out;
}

FeatureVolume stage3_semantic(const FeatureVolume& f_geo, const std::vector<FeatureMap>& f_img,
                              const OccupancyMask& m_down, const CameraRig& rig,
                              const DcaParams& params, const DcaConfig& config) {
  return dca_module(f_geo, f_img, rig, &m_down, params, config);
}

ViewTransformerParams ViewTransformerParams::init(ParameterStore& store,
                                                  const DcaConfig& config) {
  ViewTransformerParams p;
  p.stage2 = DcaParams::init(store, "d2v.stage2", config);
  p.stage3_geo = DcaParams::init(store, "d2v.stage3_geo", config);
  p.stage3_sem = DcaParams::init(store, "d2v.stage3_sem", config);
  p.e_empty = store.uniform("d2v.e_empty", {config.channels});
  return p;
}

ViewTransformerOutput run_view_transformer(const ViewTransformerInputs& inputs,
                                           const ViewTransformerParams& params,
                                           const DcaConfig& config,
                                           ViewTransformerTimings* timings) {
  using clock = std::chrono::steady_clock;
  const auto ms_since = [](clock::time_point start) {
    return std::chrono::duration<double, std::milli>(clock::now() - start).count();
  };

  ViewTransformerOutput out;
  const auto t0 = clock::now();
  Stage1Output s1 = stage1(inputs.image_features, inputs.depth_dists, inputs.depth_points,
                           inputs.rig, inputs.grid, inputs.lambda, config.threads);
  if (timings) timings->stage1_ms = ms_since(t0);

  const auto t1 = clock::now();
  out.f_down = s1.f_down;
  out.m_down = std::move(s1.m_down);
  out.f_dense = stage2_densify(out.f_down, inputs.image_features, inputs.rig, params.stage2,
                               config);
  out.f_geo = stage3_geometric(out.f_dense, inputs.depth_features, out.m_down, params.e_empty,
                               inputs.rig, params.stage3_geo, config);
  out.f_out = stage3_semantic(out.f_geo, inputs.image_features, out.m_down, inputs.rig,
                              params.stage3_sem, config);
  if (timings) timings->refine_ms = ms_since(t1);
  require(out.f_out.tensor.all_finite(), "view transformer produced non-finite features");
  return out;
}

}  // namespace occforge
