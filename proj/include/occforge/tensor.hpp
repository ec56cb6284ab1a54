// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace occforge {

/// Dense row-major tensor: the innermost (last) axis is contiguous.
///
/// This is a plain data container; all numeric kernels live in nn.hpp as free
/// functions. Feature math runs in 32-bit floats with 64-bit accumulation
/// inside the kernels.
template <typename Scalar>
class TensorT {
 public:
  TensorT() = default;

  explicit TensorT(std::vector<std::int64_t> dims) : dims_(std::move(dims)) {
    std::int64_t n = 1;
    for (std::int64_t d : dims_) {
      if (d < 0) throw std::invalid_argument("tensor extent must be nonnegative");
      n *= d;
    }
    data_.assign(static_cast<std::size_t>(n), Scalar(0));
  }

  static TensorT zeros(std::vector<std::int64_t> dims) { return TensorT(std::move(dims)); }

  static TensorT full(std::vector<std::int64_t> dims, Scalar value) {
    TensorT t(std::move(dims));
    for (auto& v : t.data_) v = value;
    return t;
  }

  bool empty() const { return data_.empty(); }
  int rank() const { return static_cast<int>(dims_.size()); }
  const std::vector<std::int64_t>& dims() const { return dims_; }
  std::int64_t dim(int axis) const { return dims_.at(static_cast<std::size_t>(axis)); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  const Scalar& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  /// Elements spanned by one index step along `axis`.
  std::int64_t stride(int axis) const {
    std::int64_t s = 1;
    for (int a = rank() - 1; a > axis; --a) s *= dims_[static_cast<std::size_t>(a)];
    return s;
  }

  template <typename... Index>
  Scalar& at(Index... index) {
    return data_[static_cast<std::size_t>(offset(index...))];
  }
  template <typename... Index>
  const Scalar& at(Index... index) const {
    return data_[static_cast<std::size_t>(offset(index...))];
  }

  bool same_dims(const TensorT& other) const { return dims_ == other.dims_; }

  bool all_finite() const {
    for (const Scalar& v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

 private:
  template <typename... Index>
  std::int64_t offset(Index... index) const {
    const std::int64_t idx[] = {static_cast<std::int64_t>(index)...};
    const int n = static_cast<int>(sizeof...(index));
    if (n != rank()) throw std::invalid_argument("tensor index rank mismatch");
    std::int64_t off = 0;
    for (int a = 0; a < n; ++a) off = off * dims_[static_cast<std::size_t>(a)] + idx[a];
    return off;
  }

  std::vector<std::int64_t> dims_;
  std::vector<Scalar> data_;
};

using Tensor = TensorT<float>;

}  // namespace occforge
