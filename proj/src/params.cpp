// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "occforge/params.hpp"

#include <bit>
#include <cmath>
#include <fstream>

#include "occforge/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "OPRM serialization assumes a little-endian host");

namespace occforge {

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

Tensor seeded_init(std::uint64_t seed, std::string_view name,
                   const std::vector<std::int64_t>& dims) {
  Tensor t(dims);
  const std::int64_t fan_in = dims.size() >= 2 ? dims[dims.size() - 2] : dims.front();
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  SplitMix64 rng{seed ^ fnv1a64(name)};
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>((2.0 * rng.next_unit() - 1.0) * bound);
  return t;
}

const Tensor& ParameterStore::insert(const std::string& name, Tensor tensor) {
  order_.push_back(name);
  return tensors_.emplace(name, std::move(tensor)).first->second;
}

const Tensor& ParameterStore::uniform(const std::string& name,
                                      const std::vector<std::int64_t>& dims) {
  auto it = tensors_.find(name);
  if (it != tensors_.end()) {
    if (it->second.dims() != dims)
      throw InvariantError("parameter re-requested with different dims: " + name);
    return it->second;
  }
  return insert(name, seeded_init(seed_, name, dims));
}

const Tensor& ParameterStore::constant(const std::string& name,
                                       const std::vector<std::int64_t>& dims, float value) {
  auto it = tensors_.find(name);
  if (it != tensors_.end()) {
    if (it->second.dims() != dims)
      throw InvariantError("parameter re-requested with different dims: " + name);
    return it->second;
  }
  return insert(name, Tensor::full(dims, value));
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw InvariantError("unknown parameter: " + name);
  return it->second;
}

Tensor& ParameterStore::mutable_ref(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw InvariantError("unknown parameter: " + name);
  return it->second;
}

void ParameterStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write parameter file: " + path);
  out.write("OPRM", 4);
  for (const std::string& name : order_) {
    const Tensor& t = tensors_.at(name);
    const auto name_len = static_cast<std::uint16_t>(name.size());
    out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const auto rank = static_cast<std::uint8_t>(t.rank());
    out.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
    for (int a = 0; a < t.rank(); ++a) {
      const auto d = static_cast<std::uint32_t>(t.dim(a));
      out.write(reinterpret_cast<const char*>(&d), sizeof(d));
    }
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(float)));
  }
}

ParameterStore ParameterStore::load(const std::string& path, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open parameter file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != "OPRM")
    throw ConfigError("not an OPRM file: " + path);

  ParameterStore store(seed);
  while (true) {
    std::uint16_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    if (in.eof()) break;
    if (!in) throw ConfigError("truncated OPRM file: " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    std::uint8_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), sizeof(rank));
    std::vector<std::int64_t> dims(rank);
    for (std::uint8_t a = 0; a < rank; ++a) {
      std::uint32_t d = 0;
      in.read(reinterpret_cast<char*>(&d), sizeof(d));
      dims[a] = d;
    }
    if (!in) throw ConfigError("truncated OPRM file: " + path);
    Tensor t(dims);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!in) throw ConfigError("truncated OPRM file: " + path);
    store.insert(name, std::move(t));
  }
  return store;
}

}  // namespace occforge
