// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "occforge/feature.hpp"
#include "occforge/geometry.hpp"
#include "occforge/grid.hpp"

namespace occforge {

/// OVG binary container, little-endian throughout:
///   magic "OVG1" | u8 kind | u32 X, Y, Z | u32 channels |
///   f64 origin[3] | f64 resolution | payload
/// Payload order: idx = ((x*Y + y)*Z + z)*C + c.
///   kind 0: mask, one 0/1 byte per voxel (C = 1)
///   kind 1: u16 labels (C = 1)
///   kind 2: f32 features
/// 2D image-plane data uses kind 2 with X = H, Y = W, Z = 1; depth maps store
/// the no-return sentinel as 0.0.
enum class OvgKind : std::uint8_t { Mask = 0, Labels = 1, Features = 2 };

void write_ovg(const std::string& path, const OccupancyMask& mask);
void write_ovg(const std::string& path, const SemanticGrid& grid);
void write_ovg(const std::string& path, const FeatureVolume& volume);
void write_ovg(const std::string& path, const FeatureMap& map);
void write_ovg(const std::string& path, const DepthMap& depth);

/// Kind probe without reading the payload. Throws ConfigError on bad files.
OvgKind peek_ovg_kind(const std::string& path);

OccupancyMask read_ovg_mask(const std::string& path);
SemanticGrid read_ovg_labels(const std::string& path);
FeatureVolume read_ovg_features(const std::string& path);
FeatureMap read_ovg_map(const std::string& path);
DepthMap read_ovg_depth(const std::string& path);

}  // namespace occforge
