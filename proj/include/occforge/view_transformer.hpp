// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "occforge/dca.hpp"
#include "occforge/feature.hpp"
#include "occforge/geometry.hpp"
#include "occforge/grid.hpp"
#include "occforge/params.hpp"

namespace occforge {

/// Uniform depth bins on [d_min, d_max), half-open per bin.
struct DepthBins {
  double d_min = 1.0;
  double d_max = 41.0;
  int count = 16;
  double sigma = 0.0;  // Gaussian blur over bin index; 0 = one-hot

  double width() const { return (d_max - d_min) / count; }
  double center(int bin) const { return d_min + (bin + 0.5) * width(); }
  /// Bin containing a depth value; out-of-range depths clamp to the nearest bin.
  int bin_of(double depth) const;
  void validate() const;
};

/// Per-pixel categorical distribution over depth bins. Pixels without a depth
/// return carry a uniform distribution and are flagged invalid; invalid
/// pixels never splat.
struct DepthDistribution {
  int width = 0;
  int height = 0;
  DepthBins bins;
  Tensor probs;                      // (H, W, count)
  std::vector<std::uint8_t> valid;   // per pixel

  bool is_valid(int u, int v) const { return valid[static_cast<std::size_t>(v) * width + u] != 0; }
};

DepthDistribution depth_to_distribution(const DepthMap& depth, const DepthBins& bins);

/// Lift-splat forward projection: each (pixel, bin) back-projects to the bin
/// center, lands in a voxel, and adds probability * feature there (sum
/// accumulation; out-of-grid contributions drop). Bit-stable for any thread
/// count: contributions are grouped per voxel and summed in fixed
/// (camera, pixel, bin) order.
FeatureVolume forward_projection(const std::vector<FeatureMap>& features,
                                 const std::vector<DepthDistribution>& dists,
                                 const CameraRig& rig, const GridSpec& spec, int threads = 1);

struct Stage1Output {
  FeatureVolume f_down;
  OccupancyMask m_down;
};

/// Forward projection + feature mean-pooling; depth-point voxelization +
/// mask OR-pooling, both by `lambda`.
Stage1Output stage1(const std::vector<FeatureMap>& features,
                    const std::vector<DepthDistribution>& dists, const PointCloud& depth_points,
                    const CameraRig& rig, const GridSpec& spec, const Eigen::Vector3i& lambda,
                    int threads = 1);

/// Unmasked DCA against the image features: every voxel is a query.
FeatureVolume stage2_densify(const FeatureVolume& f_down, const std::vector<FeatureMap>& f_img,
                             const CameraRig& rig, const DcaParams& params,
                             const DcaConfig& config);

/// Masked DCA against the depth features; voxels outside the mask are
/// overwritten with e_empty exactly.
FeatureVolume stage3_geometric(const FeatureVolume& f_dense,
                               const std::vector<FeatureMap>& f_depth,
                               const OccupancyMask& m_down, const Tensor& e_empty,
                               const CameraRig& rig, const DcaParams& params,
                               const DcaConfig& config);

/// Masked DCA against the image features.
FeatureVolume stage3_semantic(const FeatureVolume& f_geo, const std::vector<FeatureMap>& f_img,
                              const OccupancyMask& m_down, const CameraRig& rig,
                              const DcaParams& params, const DcaConfig& config);

struct ViewTransformerInputs {
  std::vector<FeatureMap> image_features;
  std::vector<FeatureMap> depth_features;
  std::vector<DepthDistribution> depth_dists;
  PointCloud depth_points;
  CameraRig rig;
  GridSpec grid;
  Eigen::Vector3i lambda = Eigen::Vector3i::Constant(2);
};

struct ViewTransformerParams {
  DcaParams stage2;
  DcaParams stage3_geo;
  DcaParams stage3_sem;
  Tensor e_empty;

  /// Registers d2v.stage2.*, d2v.stage3_geo.*, d2v.stage3_sem.*, d2v.e_empty.
  static ViewTransformerParams init(ParameterStore& store, const DcaConfig& config);
};

struct ViewTransformerOutput {
  FeatureVolume f_down;
  FeatureVolume f_dense;
  FeatureVolume f_geo;
  FeatureVolume f_out;
  OccupancyMask m_down;
};

struct ViewTransformerTimings {
  double stage1_ms = 0.0;
  double refine_ms = 0.0;  // stages 2-3
};

/// stage1 -> stage2 -> stage3 geometric -> stage3 semantic, intermediates
/// retained. M_down is produced once and never mutated afterwards.
ViewTransformerOutput run_view_transformer(const ViewTransformerInputs& inputs,
                                           const ViewTransformerParams& params,
                                           const DcaConfig& config,
                                           ViewTransformerTimings* timings = nullptr);

}  // namespace occforge
