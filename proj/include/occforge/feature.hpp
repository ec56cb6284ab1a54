// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "occforge/grid.hpp"
#include "occforge/tensor.hpp"

namespace occforge {

/// Per-camera image feature plane, dims (H, W, C).
struct FeatureMap {
  Tensor tensor;
  int camera_index = -1;

  FeatureMap() = default;
  FeatureMap(int height, int width, int channels, int camera = -1)
      : tensor({height, width, channels}), camera_index(camera) {}

  int height() const { return static_cast<int>(tensor.dim(0)); }
  int width() const { return static_cast<int>(tensor.dim(1)); }
  int channels() const { return static_cast<int>(tensor.dim(2)); }

  float* pixel(int u, int v) {
    return tensor.data() + (static_cast<std::int64_t>(v) * width() + u) * channels();
  }
  const float* pixel(int u, int v) const {
    return tensor.data() + (static_cast<std::int64_t>(v) * width() + u) * channels();
  }
};

/// Channel-last dense voxel features, dims (X, Y, Z, C). The linear voxel
/// index ((x*Y + y)*Z + z) matches GridSpec and the OVG payload order.
struct FeatureVolume {
  Tensor tensor;
  GridSpec spec;

  FeatureVolume() = default;
  FeatureVolume(const GridSpec& s, int channels)
      : tensor({s.dims.x(), s.dims.y(), s.dims.z(), channels}), spec(s) {}

  int channels() const { return tensor.rank() == 4 ? static_cast<int>(tensor.dim(3)) : 0; }

  float* voxel(std::int64_t linear) { return tensor.data() + linear * channels(); }
  const float* voxel(std::int64_t linear) const { return tensor.data() + linear * channels(); }

  void validate() const;
};

/// Channel-wise mean pooling over factor-sized blocks; trailing partial
/// blocks behave as if padded with zeros (the divisor stays the full block
/// size).
FeatureVolume downsample_features(const FeatureVolume& vol, const Eigen::Vector3i& factor);
FeatureVolume downsample_features(const FeatureVolume& vol, int factor);

}  // namespace occforge
