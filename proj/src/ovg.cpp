// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "occforge/ovg.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "occforge/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "OVG serialization assumes a little-endian host");

namespace occforge {

namespace {

constexpr char kMagic[4] = {'O', 'V', 'G', '1'};

struct Header {
  OvgKind kind;
  std::uint32_t x, y, z, channels;
  double origin[3];
  double resolution;
};

template <typename T>
void put(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ConfigError("truncated OVG file: " + path);
  return value;
}

void write_header(std::ofstream& out, const Header& h) {
  out.write(kMagic, 4);
  put(out, static_cast<std::uint8_t>(h.kind));
  put(out, h.x);
  put(out, h.y);
  put(out, h.z);
  put(out, h.channels);
  put(out, h.origin[0]);
  put(out, h.origin[1]);
  put(out, h.origin[2]);
  put(out, h.resolution);
}

Header read_header(std::ifstream& in, const std::string& path) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ConfigError("not an OVG file: " + path);
  Header h;
  const auto kind = take<std::uint8_t>(in, path);
  if (kind > 2) throw ConfigError("unknown OVG payload kind in " + path);
  h.kind = static_cast<OvgKind>(kind);
  h.x = take<std::uint32_t>(in, path);
  h.y = take<std::uint32_t>(in, path);
  h.z = take<std::uint32_t>(in, path);
  h.channels = take<std::uint32_t>(in, path);
  h.origin[0] = take<double>(in, path);
  h.origin[1] = take<double>(in, path);
  h.origin[2] = take<double>(in, path);
  h.resolution = take<double>(in, path);
  if (h.x == 0 || h.y == 0 || h.z == 0 || h.channels == 0)
    throw ConfigError("degenerate OVG dims in " + path);
  return h;
}

Header grid_header(OvgKind kind, const GridSpec& spec, std::uint32_t channels) {
  Header h;
  h.kind = kind;
  h.x = static_cast<std::uint32_t>(spec.dims.x());
  h.y = static_cast<std::uint32_t>(spec.dims.y());
  h.z = static_cast<std::uint32_t>(spec.dims.z());
  h.channels = channels;
  h.origin[0] = spec.origin.x();
  h.origin[1] = spec.origin.y();
  h.origin[2] = spec.origin.z();
  // The container carries a single resolution; grids written to disk are
  // uniform (the x cell size is recorded for anisotropic lattices).
  h.resolution = spec.cell.x();
  return h;
}

GridSpec header_spec(const Header& h) {
  return GridSpec::uniform({h.origin[0], h.origin[1], h.origin[2]}, h.resolution,
                           {static_cast<int>(h.x), static_cast<int>(h.y), static_cast<int>(h.z)});
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write OVG file: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open OVG file: " + path);
  return in;
}

}  // namespace

void write_ovg(const std::string& path, const OccupancyMask& mask) {
  auto out = open_out(path);
  write_header(out, grid_header(OvgKind::Mask, mask.spec, 1));
  out.write(reinterpret_cast<const char*>(mask.bits.data()),
            static_cast<std::streamsize>(mask.bits.size()));
}

void write_ovg(const std::string& path, const SemanticGrid& grid) {
  auto out = open_out(path);
  write_header(out, grid_header(OvgKind::Labels, grid.spec, 1));
  out.write(reinterpret_cast<const char*>(grid.labels.data()),
            static_cast<std::streamsize>(grid.labels.size() * sizeof(std::uint16_t)));
}

void write_ovg(const std::string& path, const FeatureVolume& volume) {
  volume.validate();
  auto out = open_out(path);
  write_header(out, grid_header(OvgKind::Features, volume.spec,
                                static_cast<std::uint32_t>(volume.channels())));
  out.write(reinterpret_cast<const char*>(volume.tensor.data()),
            static_cast<std::streamsize>(volume.tensor.size() * sizeof(float)));
}

void write_ovg(const std::string& path, const FeatureMap& map) {
  auto out = open_out(path);
  Header h;
  h.kind = OvgKind::Features;
  h.x = static_cast<std::uint32_t>(map.height());
  h.y = static_cast<std::uint32_t>(map.width());
  h.z = 1;
  h.channels = static_cast<std::uint32_t>(map.channels());
  h.origin[0] = h.origin[1] = h.origin[2] = 0.0;
  h.resolution = 1.0;
  write_header(out, h);
  out.write(reinterpret_cast<const char*>(map.tensor.data()),
            static_cast<std::streamsize>(map.tensor.size() * sizeof(float)));
}

void write_ovg(const std::string& path, const DepthMap& depth) {
  auto out = open_out(path);
  Header h;
  h.kind = OvgKind::Features;
  h.x = static_cast<std::uint32_t>(depth.height);
  h.y = static_cast<std::uint32_t>(depth.width);
  h.z = 1;
  h.channels = 1;
  h.origin[0] = h.origin[1] = h.origin[2] = 0.0;
  h.resolution = 1.0;
  write_header(out, h);
  for (double d : depth.values) {
    const float f = std::isfinite(d) ? static_cast<float>(d) : 0.0f;
    put(out, f);
  }
}

OvgKind peek_ovg_kind(const std::string& path) {
  auto in = open_in(path);
  return read_header(in, path).kind;
}

OccupancyMask read_ovg_mask(const std::string& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path);
  if (h.kind != OvgKind::Mask) throw ConfigError("OVG file is not a mask: " + path);
  if (h.channels != 1) throw ConfigError("mask OVG must have one channel: " + path);
  OccupancyMask mask(header_spec(h));
  in.read(reinterpret_cast<char*>(mask.bits.data()),
          static_cast<std::streamsize>(mask.bits.size()));
  if (!in) throw ConfigError("truncated OVG payload: " + path);
  for (std::uint8_t& b : mask.bits) b = (b != 0);
  return mask;
}

SemanticGrid read_ovg_labels(const std::string& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path);
  if (h.kind != OvgKind::Labels) throw ConfigError("OVG file is not a label grid: " + path);
  if (h.channels != 1) throw ConfigError("label OVG must have one channel: " + path);
  SemanticGrid grid(header_spec(h));
  in.read(reinterpret_cast<char*>(grid.labels.data()),
          static_cast<std::streamsize>(grid.labels.size() * sizeof(std::uint16_t)));
  if (!in) throw ConfigError("truncated OVG payload: " + path);
  return grid;
}

FeatureVolume read_ovg_features(const std::string& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path);
  if (h.kind != OvgKind::Features) throw ConfigError("OVG file is not a feature grid: " + path);
  FeatureVolume vol(header_spec(h), static_cast<int>(h.channels));
  in.read(reinterpret_cast<char*>(vol.tensor.data()),
          static_cast<std::streamsize>(vol.tensor.size() * sizeof(float)));
  if (!in) throw ConfigError("truncated OVG payload: " + path);
  return vol;
}

FeatureMap read_ovg_map(const std::string& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path);
  if (h.kind != OvgKind::Features || h.z != 1)
    throw ConfigError("OVG file is not a 2D feature map: " + path);
  FeatureMap map(static_cast<int>(h.x), static_cast<int>(h.y), static_cast<int>(h.channels));
  in.read(reinterpret_cast<char*>(map.tensor.data()),
          static_cast<std::streamsize>(map.tensor.size() * sizeof(float)));
  if (!in) throw ConfigError("truncated OVG payload: " + path);
  return map;
}

DepthMap read_ovg_depth(const std::string& path) {
  auto in = open_in(path);
  const Header h = read_header(in, path);
  if (h.kind != OvgKind::Features || h.z != 1 || h.channels != 1)
    throw ConfigError("OVG file is not a depth map: " + path);
  DepthMap depth(static_cast<int>(h.y), static_cast<int>(h.x));
  for (double& d : depth.values) {
    const auto f = take<float>(in, path);
    d = (f == 0.0f) ? DepthMap::kNoReturn : static_cast<double>(f);
  }
  return depth;
}

}  // namespace occforge
