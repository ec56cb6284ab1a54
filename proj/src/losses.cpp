// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "occforge/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace occforge {

double weighted_ce(const FeatureVolume& logits, const SemanticGrid& labels,
                   const std::vector<double>& weights) {
  logits.validate();
  if (logits.spec.dims != labels.spec.dims)
    throw std::invalid_argument("weighted_ce: dim mismatch");
  const std::int64_t voxels = logits.spec.voxel_count();
  if (static_cast<std::int64_t>(weights.size()) != voxels)
    throw std::invalid_argument("weighted_ce: one weight per voxel required");
  const int c = logits.channels();

  double num = 0.0, denom = 0.0;
  for (std::int64_t v = 0; v < voxels; ++v) {
    const std::uint16_t label = labels.labels[static_cast<std::size_t>(v)];
    if (label == kEmptyLabel) continue;
    if (label >= c) throw std::invalid_argument("weighted_ce: label exceeds logit channels");
    const double w = weights[static_cast<std::size_t>(v)];
    if (w < 0.0) throw std::invalid_argument("weighted_ce: weights must be nonnegative");
    const float* row = logits.voxel(v);
    double mx = row[0];
    for (int i = 1; i < c; ++i) mx = std::max(mx, static_cast<double>(row[i]));
    double sum = 0.0;
    for (int i = 0; i < c; ++i) sum += std::exp(static_cast<double>(row[i]) - mx);
    const double log_prob = (static_cast<double>(row[label]) - mx) - std::log(sum);
    num += w * (-log_prob);
    denom += w;
  }
  if (denom <= 0.0) throw std::invalid_argument("weighted_ce: weight total must be positive");
  return num / denom;
}

std::vector<double> confidence_decoder(const FeatureVolume& volume, const Tensor& w,
                                       const Tensor& b) {
  volume.validate();
  const int c = volume.channels();
  if (w.size() != c || b.size() != 1)
    throw std::invalid_argument("confidence_decoder: projection extents must be (C) and (1)");
  const std::int64_t voxels = volume.spec.voxel_count();
  std::vector<double> p(static_cast<std::size_t>(voxels));
  for (std::int64_t v = 0; v < voxels; ++v) {
    const float* f = volume.voxel(v);
    double z = static_cast<double>(b[0]);
    for (int i = 0; i < c; ++i) z += static_cast<double>(f[i]) * static_cast<double>(w[i]);
    p[static_cast<std::size_t>(v)] = 1.0 / (1.0 + std::exp(-z));
  }
  return p;
}

double depth_loss(const DepthDistribution& pred, const std::vector<std::int32_t>& gt_bins) {
  const std::int64_t pixels = static_cast<std::int64_t>(pred.width) * pred.height;
  if (static_cast<std::int64_t>(gt_bins.size()) != pixels)
    throw std::invalid_argument("depth_loss: one ground-truth bin per pixel required");
  const int n = pred.bins.count;

  double sum = 0.0;
  std::int64_t used = 0;
  for (std::int64_t px = 0; px < pixels; ++px) {
    const std::int32_t bin = gt_bins[static_cast<std::size_t>(px)];
    if (bin < 0 || !pred.valid[static_cast<std::size_t>(px)]) continue;
    if (bin >= n) throw std::invalid_argument("depth_loss: bin index out of range");
    const float p = pred.probs[px * n + bin];
    sum += -std::log(static_cast<double>(p));
    ++used;
  }
  return used > 0 ? sum / static_cast<double>(used) : 0.0;
}

double total_loss(const LossTerms& terms, const LossWeights& weights) {
  if (weights.seg < 0.0 || weights.depth < 0.0 || weights.sem < 0.0 || weights.geo < 0.0)
    throw std::invalid_argument("total_loss: weights must be nonnegative");
  return weights.seg * terms.seg + weights.depth * terms.depth + weights.sem * terms.sem +
         weights.geo * terms.geo;
}

}  // namespace occforge
