// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "occforge/grid.hpp"

namespace occforge {

/// |pred AND gt| / |pred OR gt|, optionally restricted to eval_mask.
/// An empty union counts as perfect agreement (1).
double iou_binary(const OccupancyMask& pred, const OccupancyMask& gt,
                  const OccupancyMask* eval_mask = nullptr);

struct MiouResult {
  std::vector<double> per_class;  // NaN for classes absent from both grids
  double mean = 0.0;              // over the present classes only
};

/// Per-class IoU over non-empty labels. Classes absent from both prediction
/// and ground truth are excluded from the mean.
MiouResult miou(const SemanticGrid& pred, const SemanticGrid& gt,
                const OccupancyMask* eval_mask, int num_classes);

/// Visibility-occupancy mismatch between a depth-derived grid and ground
/// truth: over-densification counts depth voxels absent from GT, occlusion
/// incompleteness counts GT voxels the depth grid misses.
struct GapReport {
  double iou = 0.0;
  double over_densification = 0.0;
  double occlusion_miss = 0.0;
};

GapReport gap_report(const OccupancyMask& depth_grid, const OccupancyMask& gt,
                     const OccupancyMask* eval_mask = nullptr);

}  // namespace occforge
