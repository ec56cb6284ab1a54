// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "occforge/feature.hpp"
#include "occforge/tensor.hpp"

namespace occforge {

/// All kernels are pure, run in f32 with f64 accumulation inside reductions,
/// and keep a fixed (ascending-index) reduction order, so results are
/// bit-stable across thread counts.

/// y = x W + b over the trailing axis. x: (..., Din), w: (Din, Dout),
/// b: (Dout) or null.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor* b = nullptr, int threads = 1);

/// Max-subtracted exponential normalization along `axis`.
Tensor softmax(const Tensor& x, int axis);

/// Normalizes the trailing axis to zero mean / unit variance, then applies
/// the gamma/beta affine.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);

/// Per-channel (trailing axis) affine normalization with stored statistics.
Tensor batch_norm_inference(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                            const Tensor& running_mean, const Tensor& running_var,
                            float eps = 1e-5f);

/// 3x3x3 cross-correlation with zero padding 1, preserving spatial dims.
/// kernel: (3, 3, 3, Cin, Cout), bias: (Cout). When `compute` is non-null
/// only flagged voxels are evaluated (the rest stay zero); flagged outputs
/// are identical to the full convolution.
FeatureVolume conv3d(const FeatureVolume& x, const Tensor& kernel, const Tensor& bias,
                     const std::vector<std::uint8_t>* compute = nullptr, int threads = 1);

/// Bilinear interpolation of the four surrounding pixel centers at continuous
/// (u, v); corners outside [0, W-1] x [0, H-1] contribute zeros. Writes
/// map.channels() values to `out`.
void bilinear_sample(const FeatureMap& map, double u, double v, float* out);
std::vector<float> bilinear_sample(const FeatureMap& map, double u, double v);

Tensor relu(const Tensor& x);
void relu_inplace(Tensor& x);

}  // namespace occforge
