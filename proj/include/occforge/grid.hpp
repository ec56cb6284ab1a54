// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "occforge/geometry.hpp"

namespace occforge {

/// Axis-aligned voxel lattice. `origin` is the minimum corner; cells are
/// half-open boxes [origin + i*cell, origin + (i+1)*cell) per axis.
///
/// The cell size is stored per axis so that grids downsampled by per-axis
/// factors keep correct voxel centers; every user-facing default is uniform.
struct GridSpec {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d cell = Eigen::Vector3d::Ones();  // meters per voxel
  Eigen::Vector3i dims = Eigen::Vector3i::Ones();  // (X, Y, Z) voxel counts

  static GridSpec uniform(const Eigen::Vector3d& origin, double resolution,
                          const Eigen::Vector3i& dims);

  std::int64_t voxel_count() const {
    return static_cast<std::int64_t>(dims.x()) * dims.y() * dims.z();
  }
  bool is_uniform() const { return cell.x() == cell.y() && cell.y() == cell.z(); }
  Eigen::Vector3d max_corner() const { return origin + cell.cwiseProduct(dims.cast<double>()); }

  bool index_in_range(const Eigen::Vector3i& index) const {
    return (index.array() >= 0).all() && (index.array() < dims.array()).all();
  }

  /// Linear index order: ((x * Y + y) * Z + z); matches the OVG container.
  std::int64_t linear_index(const Eigen::Vector3i& index) const {
    return (static_cast<std::int64_t>(index.x()) * dims.y() + index.y()) * dims.z() + index.z();
  }
  Eigen::Vector3i index_of_linear(std::int64_t linear) const {
    const std::int64_t z = linear % dims.z();
    const std::int64_t y = (linear / dims.z()) % dims.y();
    const std::int64_t x = linear / (static_cast<std::int64_t>(dims.z()) * dims.y());
    return {static_cast<int>(x), static_cast<int>(y), static_cast<int>(z)};
  }

  /// Floor lookup of the cell containing p; false when p is outside the
  /// extent (points exactly on the max corner are outside).
  bool locate(const Eigen::Vector3d& p, Eigen::Vector3i& out) const;

  bool same_lattice(const GridSpec& other) const {
    return origin == other.origin && cell == other.cell && dims == other.dims;
  }

  void validate() const;
};

/// Cell center: origin + (index + 0.5) * cell. Throws on out-of-range index.
Eigen::Vector3d voxel_center(const Eigen::Vector3i& index, const GridSpec& spec);

struct OccupancyMask {
  GridSpec spec;
  std::vector<std::uint8_t> bits;  // one 0/1 byte per voxel, linear index order

  OccupancyMask() = default;
  explicit OccupancyMask(const GridSpec& s)
      : spec(s), bits(static_cast<std::size_t>(s.voxel_count()), 0) {}

  bool test(std::int64_t linear) const { return bits[static_cast<std::size_t>(linear)] != 0; }
  void set(std::int64_t linear, bool value = true) {
    bits[static_cast<std::size_t>(linear)] = value ? 1 : 0;
  }
  std::int64_t popcount() const;
};

/// Reserved label for free space in a SemanticGrid.
inline constexpr std::uint16_t kEmptyLabel = 0xFFFF;

struct SemanticGrid {
  GridSpec spec;
  std::vector<std::uint16_t> labels;  // class id per voxel, kEmptyLabel = free

  SemanticGrid() = default;
  explicit SemanticGrid(const GridSpec& s)
      : spec(s), labels(static_cast<std::size_t>(s.voxel_count()), kEmptyLabel) {}

  OccupancyMask occupied() const;
};

/// Sets a voxel iff at least one point falls inside its half-open cell.
/// Points outside the extent are dropped; output is independent of point
/// order and of duplicates.
OccupancyMask voxelize_points(const PointCloud& points, const GridSpec& spec);

/// OR-pooling over factor-sized blocks. Output dims are ceil(dims/factor);
/// trailing partial blocks behave as if padded with false.
OccupancyMask downsample_mask(const OccupancyMask& mask, const Eigen::Vector3i& factor);
OccupancyMask downsample_mask(const OccupancyMask& mask, int factor);

/// Lattice of a downsampled grid: same origin, cell scaled per axis.
GridSpec downsampled_spec(const GridSpec& spec, const Eigen::Vector3i& factor);

double occupancy_ratio(const OccupancyMask& mask);

/// exp(-alpha * sqrt(x^2 + y^2)); depends on planar distance only.
double spatial_weight(const Eigen::Vector3d& coords, double alpha);

/// 3x3 height/distance partition of the grid. Region masks are disjoint and
/// cover every voxel; assignment is by voxel center with clamping to the
/// nearest height bin for centers outside the listed range.
struct RegionPartition {
  GridSpec spec;
  std::vector<OccupancyMask> region_masks;  // index = height_bin * n_distance + distance_bin
  std::vector<double> height_bounds;    // bin edges, ascending (n_height + 1 values)
  std::vector<double> distance_bounds;  // lower edges, ascending; last bin unbounded

  int height_bins() const { return static_cast<int>(height_bounds.size()) - 1; }
  int distance_bins() const { return static_cast<int>(distance_bounds.size()); }
  int region_count() const { return height_bins() * distance_bins(); }
  int region_of(const Eigen::Vector3d& center) const;
};

RegionPartition region_partition(const GridSpec& spec, std::vector<double> height_bounds,
                                 std::vector<double> distance_bounds);

/// Heights {[-1.0, 0.2), [0.2, 2.2), [2.2, 5.4]} m, distances
/// {[0, 10), [10, 30), [30, inf)} m.
RegionPartition default_region_partition(const GridSpec& spec);

/// Flags OR-ed over the 3^3 neighborhood of every voxel (one dilation step).
std::vector<std::uint8_t> dilate_flags(const std::vector<std::uint8_t>& flags,
                                       const GridSpec& spec);

}  // namespace occforge
