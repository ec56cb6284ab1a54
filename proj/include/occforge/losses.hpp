// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "occforge/feature.hpp"
#include "occforge/grid.hpp"
#include "occforge/tensor.hpp"
#include "occforge/view_transformer.hpp"

namespace occforge {

struct LossWeights {
  double seg = 10.0;
  double depth = 1.0;
  double sem = 1.0;
  double geo = 1.0;
};

/// Spatially weighted cross-entropy over the voxel logits:
/// sum_v w(v) * CE(softmax(logits_v), label_v) / sum_v w(v).
/// Voxels labeled kEmptyLabel are skipped in both sums; the weight total over
/// the remaining voxels must be positive.
double weighted_ce(const FeatureVolume& logits, const SemanticGrid& labels,
                   const std::vector<double>& weights);

/// Per-voxel confidence p(v) = sigmoid(linear(C -> 1)); used directly as
/// voxel weights for the adaptive cross-entropy variant.
std::vector<double> confidence_decoder(const FeatureVolume& volume, const Tensor& w,
                                       const Tensor& b);

/// Mean cross-entropy of the predicted depth distribution against per-pixel
/// ground-truth bin indices; pixels with a negative bin or an invalid
/// distribution are skipped.
double depth_loss(const DepthDistribution& pred, const std::vector<std::int32_t>& gt_bins);

struct LossTerms {
  double seg = 0.0;
  double depth = 0.0;
  double sem = 0.0;  // opaque affinity term supplied by the caller
  double geo = 0.0;  // opaque affinity term supplied by the caller
};

double total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace occforge
