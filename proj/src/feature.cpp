// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "occforge/feature.hpp"

#include <stdexcept>

namespace occforge {

void FeatureVolume::validate() const {
  if (tensor.rank() != 4) throw std::invalid_argument("feature volume must have rank 4");
  if (tensor.dim(0) != spec.dims.x() || tensor.dim(1) != spec.dims.y() ||
      tensor.dim(2) != spec.dims.z())
    throw std::invalid_argument("feature volume dims do not match grid spec");
}

FeatureVolume downsample_features(const FeatureVolume& vol, const Eigen::Vector3i& factor) {
  vol.validate();
  const GridSpec coarse = downsampled_spec(vol.spec, factor);
  const int channels = vol.channels();
  FeatureVolume out(coarse, channels);

  const double block = static_cast<double>(factor.x()) * factor.y() * factor.z();
  std::vector<double> acc(static_cast<std::size_t>(channels));
  for (int cx = 0; cx < coarse.dims.x(); ++cx) {
    for (int cy = 0; cy < coarse.dims.y(); ++cy) {
      for (int cz = 0; cz < coarse.dims.z(); ++cz) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int dx = 0; dx < factor.x(); ++dx) {
          const int x = cx * factor.x() + dx;
          if (x >= vol.spec.dims.x()) continue;
          for (int dy = 0; dy < factor.y(); ++dy) {
            const int y = cy * factor.y() + dy;
            if (y >= vol.spec.dims.y()) continue;
            for (int dz = 0; dz < factor.z(); ++dz) {
              const int z = cz * factor.z() + dz;
              if (z >= vol.spec.dims.z()) continue;
              const float* src = vol.voxel(vol.spec.linear_index({x, y, z}));
              for (int c = 0; c < channels; ++c) acc[static_cast<std::size_t>(c)] += src[c];
            }
          }
        }
        float* dst = out.voxel(coarse.linear_index({cx, cy, cz}));
        for (int c = 0; c < channels; ++c)
          dst[c] = static_cast<float>(acc[static_cast<std::size_t>(c)] / block);
      }
    }
  }
  return out;
}

FeatureVolume downsample_features(const FeatureVolume& vol, int factor) {
  return downsample_features(vol, Eigen::Vector3i::Constant(factor));
}

}  // namespace occforge
