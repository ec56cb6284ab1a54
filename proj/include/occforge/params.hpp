// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "occforge/tensor.hpp"

namespace occforge {

/// 64-bit FNV-1a hash of a name.
std::uint64_t fnv1a64(std::string_view text);

/// SplitMix64 stream; next_unit() maps a draw to [0, 1) via (x >> 11) * 2^-53.
struct SplitMix64 {
  std::uint64_t state = 0;

  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

/// Deterministic parameter initialization: i.i.d. uniform on [-a, a) with
/// a = 1/sqrt(fan_in), fan_in being the last input extent (second-to-last dim
/// for rank >= 2, the single extent otherwise). The generator is SplitMix64
/// keyed by seed XOR FNV-1a(name) and consumed in row-major order; values are
/// formed at f64 precision and then rounded to f32, so re-creation is
/// bit-identical across processes and implementations of the same recipe.
Tensor seeded_init(std::uint64_t seed, std::string_view name,
                   const std::vector<std::int64_t>& dims);

/// Named parameter tensors keyed by a u64 seed. Values depend only on
/// (seed, name, dims), never on creation order; the insertion-ordered
/// registry fixes the record order of the OPRM file.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed) : seed_(seed) {}

  /// Get-or-create a seeded tensor. Re-requesting with different dims throws.
  const Tensor& uniform(const std::string& name, const std::vector<std::int64_t>& dims);

  /// Get-or-create a constant-filled tensor (used for inference-neutral norm
  /// statistics).
  const Tensor& constant(const std::string& name, const std::vector<std::int64_t>& dims,
                         float value);

  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& mutable_ref(const std::string& name);

  std::uint64_t seed() const { return seed_; }
  const std::vector<std::string>& registry() const { return order_; }

  /// OPRM parameter file: magic "OPRM", then per registered tensor
  /// u16 name length, UTF-8 name, u8 rank, u32 dims, f32 data (little-endian).
  void save(const std::string& path) const;
  static ParameterStore load(const std::string& path, std::uint64_t seed = 0);

 private:
  const Tensor& insert(const std::string& name, Tensor tensor);

  std::uint64_t seed_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> tensors_;
};

}  // namespace occforge
