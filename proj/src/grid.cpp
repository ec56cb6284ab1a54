// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "occforge/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace occforge {

GridSpec GridSpec::uniform(const Eigen::Vector3d& origin, double resolution,
                           const Eigen::Vector3i& dims) {
  GridSpec spec;
  spec.origin = origin;
  spec.cell = Eigen::Vector3d::Constant(resolution);
  spec.dims = dims;
  spec.validate();
  return spec;
}

void GridSpec::validate() const {
  if (!(cell.array() > 0.0).all()) throw std::invalid_argument("grid cell size must be positive");
  if (!(dims.array() >= 1).all()) throw std::invalid_argument("grid dims must be at least 1");
  if (!origin.allFinite() || !max_corner().allFinite())
    throw std::invalid_argument("grid extent must be finite");
}

bool GridSpec::locate(const Eigen::Vector3d& p, Eigen::Vector3i& out) const {
  for (int a = 0; a < 3; ++a) {
    const double rel = (p[a] - origin[a]) / cell[a];
    const double idx = std::floor(rel);
    if (idx < 0.0 || idx >= static_cast<double>(dims[a])) return false;
    out[a] = static_cast<int>(idx);
  }
  return true;
}

Eigen::Vector3d voxel_center(const Eigen::Vector3i& index, const GridSpec& spec) {
  if (!spec.index_in_range(index)) throw std::invalid_argument("voxel index out of range");
  return spec.origin + (index.cast<double>() + Eigen::Vector3d::Constant(0.5)).cwiseProduct(spec.cell);
}

std::int64_t OccupancyMask::popcount() const {
  std::int64_t n = 0;
  for (std::uint8_t b : bits) n += (b != 0);
  return n;
}

OccupancyMask SemanticGrid::occupied() const {
  OccupancyMask mask(spec);
  for (std::size_t i = 0; i < labels.size(); ++i) mask.bits[i] = (labels[i] != kEmptyLabel);
  return mask;
}

OccupancyMask voxelize_points(const PointCloud& points, const GridSpec& spec) {
  OccupancyMask mask(spec);
  Eigen::Vector3i idx;
  for (const Eigen::Vector3d& p : points.points) {
    if (!p.allFinite()) continue;
    if (spec.locate(p, idx)) mask.set(spec.linear_index(idx));
  }
  return mask;
}

GridSpec downsampled_spec(const GridSpec& spec, const Eigen::Vector3i& factor) {
  if (!(factor.array() >= 1).all())
    throw std::invalid_argument("downsample factor must be at least 1");
  GridSpec out;
  out.origin = spec.origin;
  out.cell = spec.cell.cwiseProduct(factor.cast<double>());
  for (int a = 0; a < 3; ++a) out.dims[a] = (spec.dims[a] + factor[a] - 1) / factor[a];
  return out;
}

OccupancyMask downsample_mask(const OccupancyMask& mask, const Eigen::Vector3i& factor) {
  OccupancyMask out(downsampled_spec(mask.spec, factor));
  const Eigen::Vector3i& dims = mask.spec.dims;
  for (int x = 0; x < dims.x(); ++x) {
    for (int y = 0; y < dims.y(); ++y) {
      for (int z = 0; z < dims.z(); ++z) {
        if (!mask.test(mask.spec.linear_index({x, y, z}))) continue;
        const Eigen::Vector3i coarse{x / factor.x(), y / factor.y(), z / factor.z()};
        out.set(out.spec.linear_index(coarse));
      }
    }
  }
  return out;
}

OccupancyMask downsample_mask(const OccupancyMask& mask, int factor) {
  return downsample_mask(mask, Eigen::Vector3i::Constant(factor));
}

double occupancy_ratio(const OccupancyMask& mask) {
  if (mask.bits.empty()) return 0.0;
  return static_cast<double>(mask.popcount()) / static_cast<double>(mask.bits.size());
}

double spatial_weight(const Eigen::Vector3d& coords, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("spatial_weight: alpha must be nonnegative");
  return std::exp(-alpha * std::hypot(coords.x(), coords.y()));
}

int RegionPartition::region_of(const Eigen::Vector3d& center) const {
  const double h = center.z();
  const double d = std::hypot(center.x(), center.y());

  // Height: edges with clamping of out-of-range centers to the nearest bin.
  int hb = height_bins() - 1;
  for (int b = 0; b < height_bins(); ++b) {
    if (h < height_bounds[static_cast<std::size_t>(b + 1)]) {
      hb = b;
      break;
    }
  }
  // Distance: lower edges, last bin unbounded.
  int db = 0;
  for (int b = distance_bins() - 1; b >= 0; --b) {
    if (d >= distance_bounds[static_cast<std::size_t>(b)]) {
      db = b;
      break;
    }
  }
  return hb * distance_bins() + db;
}

RegionPartition region_partition(const GridSpec& spec, std::vector<double> height_bounds,
                                 std::vector<double> distance_bounds) {
  if (height_bounds.size() < 2) throw std::invalid_argument("need at least one height bin");
  if (distance_bounds.empty()) throw std::invalid_argument("need at least one distance bin");
  for (std::size_t i = 1; i < height_bounds.size(); ++i)
    if (!(height_bounds[i] > height_bounds[i - 1]))
      throw std::invalid_argument("height bounds must be strictly increasing");
  for (std::size_t i = 1; i < distance_bounds.size(); ++i)
    if (!(distance_bounds[i] > distance_bounds[i - 1]))
      throw std::invalid_argument("distance bounds must be strictly increasing");

  RegionPartition part;
  part.spec = spec;
  part.height_bounds = std::move(height_bounds);
  part.distance_bounds = std::move(distance_bounds);
  part.region_masks.assign(static_cast<std::size_t>(part.region_count()), OccupancyMask(spec));

  for (int x = 0; x < spec.dims.x(); ++x) {
    for (int y = 0; y < spec.dims.y(); ++y) {
      for (int z = 0; z < spec.dims.z(); ++z) {
        const Eigen::Vector3i idx{x, y, z};
        const int region = part.region_of(voxel_center(idx, spec));
        part.region_masks[static_cast<std::size_t>(region)].set(spec.linear_index(idx));
      }
    }
  }
  return part;
}

RegionPartition default_region_partition(const GridSpec& spec) {
  return region_partition(spec, {-1.0, 0.2, 2.2, 5.4}, {0.0, 10.0, 30.0});
}

std::vector<std::uint8_t> dilate_flags(const std::vector<std::uint8_t>& flags,
                                       const GridSpec& spec) {
  const Eigen::Vector3i& dims = spec.dims;
  std::vector<std::uint8_t> out(flags.size(), 0);
  for (int x = 0; x < dims.x(); ++x) {
    for (int y = 0; y < dims.y(); ++y) {
      for (int z = 0; z < dims.z(); ++z) {
        bool any = false;
        for (int dx = -1; dx <= 1 && !any; ++dx) {
          const int nx = x + dx;
          if (nx < 0 || nx >= dims.x()) continue;
          for (int dy = -1; dy <= 1 && !any; ++dy) {
            const int ny = y + dy;
            if (ny < 0 || ny >= dims.y()) continue;
            for (int dz = -1; dz <= 1; ++dz) {
              const int nz = z + dz;
              if (nz < 0 || nz >= dims.z()) continue;
              if (flags[static_cast<std::size_t>(spec.linear_index({nx, ny, nz}))]) {
                any = true;
                break;
              }
            }
          }
        }
        if (any) out[static_cast<std::size_t>(spec.linear_index({x, y, z}))] = 1;
      }
    }
  }
  return out;
}

}  // namespace occforge
