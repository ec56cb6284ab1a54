// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "occforge/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "occforge/threads.hpp"

namespace occforge {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor* b, int threads) {
  if (w.rank() != 2) throw std::invalid_argument("linear: weight must be rank 2");
  const std::int64_t din = w.dim(0);
  const std::int64_t dout = w.dim(1);
  if (x.rank() < 1 || x.dim(x.rank() - 1) != din)
    throw std::invalid_argument("linear: trailing extent of x must match weight rows");
  if (b && (b->rank() != 1 || b->dim(0) != dout))
    throw std::invalid_argument("linear: bias extent must match weight columns");

  std::vector<std::int64_t> out_dims = x.dims();
  out_dims.back() = dout;
  Tensor y(out_dims);

  const std::int64_t rows = x.size() / din;
  const float* xp = x.data();
  const float* wp = w.data();
  const float* bp = b ? b->data() : nullptr;
  float* yp = y.data();

  parallel_for(rows, threads, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t r = lo; r < hi; ++r) {
      const float* xr = xp + r * din;
      float* yr = yp + r * dout;
      for (std::int64_t o = 0; o < dout; ++o) {
        double acc = bp ? static_cast<double>(bp[o]) : 0.0;
        for (std::int64_t i = 0; i < din; ++i)
          acc += static_cast<double>(xr[i]) * static_cast<double>(wp[i * dout + o]);
        yr[o] = static_cast<float>(acc);
      }
    }
  });
  return y;
}

Tensor softmax(const Tensor& x, int axis) {
  if (axis < 0 || axis >= x.rank()) throw std::invalid_argument("softmax: bad axis");
  Tensor y = x;
  const std::int64_t extent = x.dim(axis);
  const std::int64_t inner = x.stride(axis);
  const std::int64_t outer = x.size() / (extent * inner);
  float* yp = y.data();

  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < inner; ++i) {
      float* base = yp + o * extent * inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::int64_t k = 0; k < extent; ++k)
        mx = std::max(mx, static_cast<double>(base[k * inner]));
      double sum = 0.0;
      for (std::int64_t k = 0; k < extent; ++k) {
        const double e = std::exp(static_cast<double>(base[k * inner]) - mx);
        base[k * inner] = static_cast<float>(e);
        sum += e;
      }
      for (std::int64_t k = 0; k < extent; ++k)
        base[k * inner] = static_cast<float>(static_cast<double>(base[k * inner]) / sum);
    }
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  const std::int64_t c = x.dim(x.rank() - 1);
  if (gamma.size() != c || beta.size() != c)
    throw std::invalid_argument("layer_norm: gamma/beta extent must match channels");
  Tensor y(x.dims());
  const std::int64_t rows = x.size() / c;
  const float* xp = x.data();
  float* yp = y.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* xr = xp + r * c;
    float* yr = yp + r * c;
    double mean = 0.0;
    for (std::int64_t i = 0; i < c; ++i) mean += xr[i];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::int64_t i = 0; i < c; ++i) {
      const double d = static_cast<double>(xr[i]) - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
    for (std::int64_t i = 0; i < c; ++i) {
      const double n = (static_cast<double>(xr[i]) - mean) * inv;
      yr[i] = static_cast<float>(n * gamma[i] + beta[i]);
    }
  }
  return y;
}

Tensor batch_norm_inference(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                            const Tensor& running_mean, const Tensor& running_var, float eps) {
  const std::int64_t c = x.dim(x.rank() - 1);
  if (gamma.size() != c || beta.size() != c || running_mean.size() != c ||
      running_var.size() != c)
    throw std::invalid_argument("batch_norm: parameter extents must match channels");
  Tensor y(x.dims());
  const std::int64_t rows = x.size() / c;
  std::vector<double> scale(static_cast<std::size_t>(c)), shift(static_cast<std::size_t>(c));
  for (std::int64_t i = 0; i < c; ++i) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(running_var[i]) + eps);
    scale[static_cast<std::size_t>(i)] = static_cast<double>(gamma[i]) * inv;
    shift[static_cast<std::size_t>(i)] =
        static_cast<double>(beta[i]) - static_cast<double>(running_mean[i]) *
                                           scale[static_cast<std::size_t>(i)];
  }
  const float* xp = x.data();
  float* yp = y.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t i = 0; i < c; ++i)
      yp[r * c + i] = static_cast<float>(xp[r * c + i] * scale[static_cast<std::size_t>(i)] +
                                         shift[static_cast<std::size_t>(i)]);
  }
  return y;
}

FeatureVolume conv3d(const FeatureVolume& x, const Tensor& kernel, const Tensor& bias,
                     const std::vector<std::uint8_t>* compute, int threads) {
  x.validate();
  if (kernel.rank() != 5 || kernel.dim(0) != 3 || kernel.dim(1) != 3 || kernel.dim(2) != 3)
    throw std::invalid_argument("conv3d: kernel must be (3,3,3,Cin,Cout)");
  const std::int64_t cin = kernel.dim(3);
  const std::int64_t cout = kernel.dim(4);
  if (x.channels() != cin) throw std::invalid_argument("conv3d: input channel mismatch");
  if (bias.size() != cout) throw std::invalid_argument("conv3d: bias extent mismatch");
  if (compute && static_cast<std::int64_t>(compute->size()) != x.spec.voxel_count())
    throw std::invalid_argument("conv3d: compute flag size mismatch");

  FeatureVolume out(x.spec, static_cast<int>(cout));
  const Eigen::Vector3i dims = x.spec.dims;
  const std::int64_t sy = static_cast<std::int64_t>(dims.z()) * cin;  // +1 step in y
  const std::int64_t sx = sy * dims.y();                              // +1 step in x
  const float* xp = x.tensor.data();
  const float* kp = kernel.data();
  float* op = out.tensor.data();
  const std::int64_t voxels = x.spec.voxel_count();

  parallel_for(voxels, threads, [&](std::int64_t lo, std::int64_t hi) {
    std::vector<double> acc(static_cast<std::size_t>(cout));
    for (std::int64_t v = lo; v < hi; ++v) {
      if (compute && !(*compute)[static_cast<std::size_t>(v)]) continue;
      const Eigen::Vector3i idx = x.spec.index_of_linear(v);
      for (std::int64_t o = 0; o < cout; ++o)
        acc[static_cast<std::size_t>(o)] = static_cast<double>(bias[o]);
      for (int dx = 0; dx < 3; ++dx) {
        const int ix = idx.x() + dx - 1;
        if (ix < 0 || ix >= dims.x()) continue;
        for (int dy = 0; dy < 3; ++dy) {
          const int iy = idx.y() + dy - 1;
          if (iy < 0 || iy >= dims.y()) continue;
          for (int dz = 0; dz < 3; ++dz) {
            const int iz = idx.z() + dz - 1;
            if (iz < 0 || iz >= dims.z()) continue;
            const float* src = xp + ix * sx + iy * sy + static_cast<std::int64_t>(iz) * cin;
            const float* kw = kp + ((static_cast<std::int64_t>(dx) * 3 + dy) * 3 + dz) * cin * cout;
            for (std::int64_t i = 0; i < cin; ++i) {
              const double xv = static_cast<double>(src[i]);
              if (xv == 0.0) continue;
              const float* krow = kw + i * cout;
              for (std::int64_t o = 0; o < cout; ++o)
                acc[static_cast<std::size_t>(o)] += xv * static_cast<double>(krow[o]);
            }
          }
        }
      }
      float* dst = op + v * cout;
      for (std::int64_t o = 0; o < cout; ++o)
        dst[o] = static_cast<float>(acc[static_cast<std::size_t>(o)]);
    }
  });
  return out;
}

void bilinear_sample(const FeatureMap& map, double u, double v, float* out) {
  const int w = map.width();
  const int h = map.height();
  const int c = map.channels();
  for (int i = 0; i < c; ++i) out[i] = 0.0f;

  const double x0d = std::floor(u);
  const double y0d = std::floor(v);
  const int x0 = static_cast<int>(x0d);
  const int y0 = static_cast<int>(y0d);
  const double fx = u - x0d;
  const double fy = v - y0d;

  const int xs[2] = {x0, x0 + 1};
  const int ys[2] = {y0, y0 + 1};
  const double wx[2] = {1.0 - fx, fx};
  const double wy[2] = {1.0 - fy, fy};

  std::vector<double> acc(static_cast<std::size_t>(c), 0.0);
  for (int a = 0; a < 2; ++a) {
    if (ys[a] < 0 || ys[a] > h - 1) continue;
    for (int b = 0; b < 2; ++b) {
      if (xs[b] < 0 || xs[b] > w - 1) continue;
      const double weight = wy[a] * wx[b];
      if (weight == 0.0) continue;
      const float* px = map.pixel(xs[b], ys[a]);
      for (int i = 0; i < c; ++i) acc[static_cast<std::size_t>(i)] += weight * px[i];
    }
  }
  for (int i = 0; i < c; ++i) out[i] = static_cast<float>(acc[static_cast<std::size_t>(i)]);
}

std::vector<float> bilinear_sample(const FeatureMap& map, double u, double v) {
  std::vector<float> out(static_cast<std::size_t>(map.channels()));
  bilinear_sample(map, u, v, out.data());
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  relu_inplace(y);
  return y;
}

void relu_inplace(Tensor& x) {
  float* p = x.data();
  for (std::int64_t i = 0; i < x.size(); ++i)
    if (p[i] < 0.0f) p[i] = 0.0f;
}

}  // namespace occforge
