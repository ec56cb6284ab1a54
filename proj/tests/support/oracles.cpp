// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "support/oracles.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace occforge::test {

double random_unit(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

Tensor random_tensor(std::uint64_t seed, const std::vector<std::int64_t>& dims, double scale) {
  Tensor t(dims);
  std::uint64_t state = seed * 0x9E3779B97F4A7C15ull + 0x1234;
  for (std::int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>((2.0 * random_unit(state) - 1.0) * scale);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) return std::numeric_limits<double>::infinity();
  double mx = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i)
    mx = std::max(mx, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return mx;
}

Eigen::Matrix3d invert3x3_adjugate(const Eigen::Matrix3d& m) {
  const double det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
                     m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                     m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
  Eigen::Matrix3d adj;
  adj(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  adj(0, 1) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
  adj(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
  adj(1, 0) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
  adj(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
  adj(1, 2) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
  adj(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
  adj(2, 1) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
  adj(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return adj / det;
}

Tensor o_linear(const Tensor& x, const Tensor& w, const Tensor* b) {
  const std::int64_t din = w.dim(0);
  const std::int64_t dout = w.dim(1);
  std::vector<std::int64_t> out_dims = x.dims();
  out_dims.back() = dout;
  Tensor y(out_dims);
  const std::int64_t rows = x.size() / din;
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t o = 0; o < dout; ++o) {
      double acc = b ? static_cast<double>((*b)[o]) : 0.0;
      for (std::int64_t i = 0; i < din; ++i)
        acc += static_cast<double>(x[r * din + i]) * static_cast<double>(w[i * dout + o]);
      y[r * dout + o] = static_cast<float>(acc);
    }
  }
  return y;
}

std::vector<double> o_softmax(const std::vector<double>& logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

Tensor o_layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::int64_t c = x.dim(x.rank() - 1);
  Tensor y(x.dims());
  const std::int64_t rows = x.size() / c;
  for (std::int64_t r = 0; r < rows; ++r) {
    double mean = 0.0;
    for (std::int64_t i = 0; i < c; ++i) mean += x[r * c + i];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::int64_t i = 0; i < c; ++i) {
      const double d = x[r * c + i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    for (std::int64_t i = 0; i < c; ++i)
      y[r * c + i] = static_cast<float>((x[r * c + i] - mean) / std::sqrt(var + eps) *
                                            gamma[i] +
                                        beta[i]);
  }
  return y;
}

Tensor o_batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                    const Tensor& var, double eps) {
  const std::int64_t c = x.dim(x.rank() - 1);
  Tensor y(x.dims());
  const std::int64_t rows = x.size() / c;
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t i = 0; i < c; ++i)
      y[r * c + i] = static_cast<float>(
          (static_cast<double>(x[r * c + i]) - mean[i]) / std::sqrt(var[i] + eps) * gamma[i] +
          beta[i]);
  return y;
}

FeatureVolume o_conv3d(const FeatureVolume& x, const Tensor& kernel, const Tensor& bias) {
  const std::int64_t cin = kernel.dim(3);
  const std::int64_t cout = kernel.dim(4);
  FeatureVolume out(x.spec, static_cast<int>(cout));
  const Eigen::Vector3i dims = x.spec.dims;
  for (int ox = 0; ox < dims.x(); ++ox)
    for (int oy = 0; oy < dims.y(); ++oy)
      for (int oz = 0; oz < dims.z(); ++oz)
        for (std::int64_t o = 0; o < cout; ++o) {
          double acc = bias[o];
          for (int kx = 0; kx < 3; ++kx)
            for (int ky = 0; ky < 3; ++ky)
              for (int kz = 0; kz < 3; ++kz) {
                const int ix = ox + kx - 1, iy = oy + ky - 1, iz = oz + kz - 1;
                if (ix < 0 || iy < 0 || iz < 0 || ix >= dims.x() || iy >= dims.y() ||
                    iz >= dims.z())
                  continue;
                const float* src = x.voxel(x.spec.linear_index({ix, iy, iz}));
                for (std::int64_t i = 0; i < cin; ++i)
                  acc += static_cast<double>(src[i]) *
                         static_cast<double>(
                             kernel[(((static_cast<std::int64_t>(kx) * 3 + ky) * 3 + kz) * cin +
                                     i) *
                                        cout +
                                    o]);
              }
          out.voxel(out.spec.linear_index({ox, oy, oz}))[o] = static_cast<float>(acc);
        }
  return out;
}

std::vector<float> o_bilinear(const FeatureMap& map, double u, double v) {
  const int w = map.width(), h = map.height(), c = map.channels();
  std::vector<double> acc(static_cast<std::size_t>(c), 0.0);
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  for (int dy = 0; dy < 2; ++dy)
    for (int dx = 0; dx < 2; ++dx) {
      const int x = x0 + dx, y = y0 + dy;
      if (x < 0 || x > w - 1 || y < 0 || y > h - 1) continue;
      const double weight = (dx == 0 ? 1.0 - (u - x0) : u - x0) *
                            (dy == 0 ? 1.0 - (v - y0) : v - y0);
      const float* px = map.pixel(x, y);
      for (int i = 0; i < c; ++i) acc[static_cast<std::size_t>(i)] += weight * px[i];
    }
  std::vector<float> out(static_cast<std::size_t>(c));
  for (int i = 0; i < c; ++i) out[static_cast<std::size_t>(i)] =
      static_cast<float>(acc[static_cast<std::size_t>(i)]);
  return out;
}

Tensor o_self_attention_block(const Tensor& f_in, const DcaParams& p, const DcaConfig& c) {
  const std::int64_t n = f_in.dim(0);
  const std::int64_t ch = c.channels;
  const Tensor q = o_linear(f_in, p.self_q_w, &p.self_q_b);
  const Tensor k = o_linear(f_in, p.self_k_w, &p.self_k_b);
  const Tensor v = o_linear(f_in, p.self_v_w, &p.self_v_b);
  const int dh = c.head_dim();

  Tensor attended({n, ch});
  for (std::int64_t i = 0; i < n; ++i) {
    for (int h = 0; h < c.heads; ++h) {
      std::vector<double> logits(static_cast<std::size_t>(n));
      for (std::int64_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (int d = 0; d < dh; ++d)
          dot += static_cast<double>(q[i * ch + h * dh + d]) *
                 static_cast<double>(k[j * ch + h * dh + d]);
        logits[static_cast<std::size_t>(j)] = dot / std::sqrt(static_cast<double>(dh));
      }
      const std::vector<double> weights = o_softmax(logits);
      for (int d = 0; d < dh; ++d) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < n; ++j)
          acc += weights[static_cast<std::size_t>(j)] *
                 static_cast<double>(v[j * ch + h * dh + d]);
        attended[i * ch + h * dh + d] = static_cast<float>(acc);
      }
    }
  }
  Tensor out = o_linear(attended, p.self_o_w, &p.self_o_b);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] += f_in[i];
  return o_layer_norm(out, p.ln1_g, p.ln1_b, 1e-5);
}

Tensor o_deformable_cross_attention(const VoxelQuerySet& q, const std::vector<FeatureMap>& ctx,
                                    const DcaParams& p, const DcaConfig& c) {
  const std::int64_t n = q.count();
  const std::int64_t ch = c.channels;
  const int dh = c.head_dim();

  std::vector<FeatureMap> values;
  for (const FeatureMap& map : ctx) {
    FeatureMap vm(map.height(), map.width(), static_cast<int>(ch), map.camera_index);
    vm.tensor = o_linear(map.tensor, p.val_w, nullptr);
    values.push_back(std::move(vm));
  }

  const Tensor offsets = o_linear(q.features, p.off_w, &p.off_b);
  const Tensor logits = o_linear(q.features, p.att_w, &p.att_b);

  Tensor gathered({n, ch});
  for (std::int64_t i = 0; i < n; ++i) {
    for (int h = 0; h < c.heads; ++h) {
      std::vector<double> raw(static_cast<std::size_t>(c.ref_points));
      for (int pt = 0; pt < c.ref_points; ++pt)
        raw[static_cast<std::size_t>(pt)] =
            logits[i * c.heads * c.ref_points + h * c.ref_points + pt];
      const std::vector<double> weights = o_softmax(raw);

      std::vector<double> head(static_cast<std::size_t>(dh), 0.0);
      int valid = 0;
      for (int cam = 0; cam < q.num_cameras; ++cam) {
        const RefPixel& ref = q.ref(i, cam);
        if (!ref.valid) continue;
        ++valid;
        std::vector<double> cam_acc(static_cast<std::size_t>(dh), 0.0);
        for (int pt = 0; pt < c.ref_points; ++pt) {
          const std::int64_t ob =
              (i * c.heads * c.ref_points + static_cast<std::int64_t>(h) * c.ref_points + pt) * 2;
          const std::vector<float> sample =
              o_bilinear(values[static_cast<std::size_t>(cam)], ref.u + offsets[ob],
                         ref.v + offsets[ob + 1]);
          for (int d = 0; d < dh; ++d)
            cam_acc[static_cast<std::size_t>(d)] +=
                weights[static_cast<std::size_t>(pt)] *
                static_cast<double>(sample[static_cast<std::size_t>(h * dh + d)]);
        }
        for (int d = 0; d < dh; ++d)
          head[static_cast<std::size_t>(d)] += cam_acc[static_cast<std::size_t>(d)];
      }
      for (int d = 0; d < dh; ++d)
        gathered[i * ch + h * dh + d] =
            valid == 0 ? 0.0f
                       : static_cast<float>(head[static_cast<std::size_t>(d)] / valid);
    }
  }
  return o_linear(gathered, p.out_w, nullptr);
}

Tensor o_ffn_block(const Tensor& x, const DcaParams& p, const DcaConfig&) {
  Tensor hidden = o_linear(x, p.ffn1_w, &p.ffn1_b);
  for (std::int64_t i = 0; i < hidden.size(); ++i)
    if (hidden[i] < 0.0f) hidden[i] = 0.0f;
  Tensor out = o_linear(hidden, p.ffn2_w, &p.ffn2_b);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] += x[i];
  return o_layer_norm(out, p.ln3_g, p.ln3_b, 1e-5);
}

FeatureVolume o_feature_deepening(const FeatureVolume& f_in, const FeatureVolume& f_trans,
                                  const DcaParams& p, const DcaConfig& c) {
  const int ch = c.channels;
  FeatureVolume cat(f_in.spec, 2 * ch);
  for (std::int64_t v = 0; v < f_in.spec.voxel_count(); ++v) {
    for (int i = 0; i < ch; ++i) {
      cat.voxel(v)[i] = f_in.voxel(v)[i];
      cat.voxel(v)[ch + i] = f_trans.voxel(v)[i];
    }
  }
  FeatureVolume h1 = o_conv3d(cat, p.conv1_k, p.conv1_b);
  h1.tensor = o_batch_norm(h1.tensor, p.bn1_g, p.bn1_b, p.bn1_m, p.bn1_v, 1e-5);
  for (std::int64_t i = 0; i < h1.tensor.size(); ++i)
    if (h1.tensor[i] < 0.0f) h1.tensor[i] = 0.0f;
  FeatureVolume h2 = o_conv3d(h1, p.conv2_k, p.conv2_b);
  h2.tensor = o_batch_norm(h2.tensor, p.bn2_g, p.bn2_b, p.bn2_m, p.bn2_v, 1e-5);
  for (std::int64_t i = 0; i < h2.tensor.size(); ++i)
    if (h2.tensor[i] < 0.0f) h2.tensor[i] = 0.0f;
  return o_conv3d(h2, p.conv3_k, p.conv3_b);
}

FeatureVolume o_dca_module(const FeatureVolume& f_in, const std::vector<FeatureMap>& ctx,
                           const CameraRig& rig, const OccupancyMask* mask, const DcaParams& p,
                           const DcaConfig& c) {
  const std::int64_t voxels = f_in.spec.voxel_count();
  const int ch = c.channels;

  // Token set with our own reference-point projection.
  VoxelQuerySet q;
  q.num_cameras = rig.count();
  for (std::int64_t v = 0; v < voxels; ++v)
    if (!mask || mask->test(v)) q.voxel_indices.push_back(v);
  const std::int64_t n = q.count();
  q.features = Tensor({n, ch});
  q.refs.resize(static_cast<std::size_t>(n * q.num_cameras));
  for (std::int64_t t = 0; t < n; ++t) {
    const std::int64_t v = q.voxel_indices[static_cast<std::size_t>(t)];
    for (int i = 0; i < ch; ++i) q.features[t * ch + i] = f_in.voxel(v)[i];
    const Eigen::Vector3d center = voxel_center(f_in.spec.index_of_linear(v), f_in.spec);
    for (int cam = 0; cam < q.num_cameras; ++cam) {
      const Camera& camera = rig.cameras[static_cast<std::size_t>(cam)];
      const Eigen::Vector3d pc = camera.extrinsics.rotation * center +
                                 camera.extrinsics.translation;
      RefPixel& ref = q.refs[static_cast<std::size_t>(t * q.num_cameras + cam)];
      if (pc.z() > 1e-6) {
        ref.u = camera.intrinsics.fx * pc.x() / pc.z() + camera.intrinsics.cx;
        ref.v = camera.intrinsics.fy * pc.y() / pc.z() + camera.intrinsics.cy;
        ref.valid = ref.u >= 0.0 && ref.u <= camera.intrinsics.width - 1 && ref.v >= 0.0 &&
                    ref.v <= camera.intrinsics.height - 1;
      }
    }
  }

  FeatureVolume f_trans = f_in;
  if (n > 0) {
    const Tensor f_self = o_self_attention_block(q.features, p, c);
    VoxelQuerySet q_self = q;
    q_self.features = f_self;
    Tensor cross = o_deformable_cross_attention(q_self, ctx, p, c);
    for (std::int64_t i = 0; i < cross.size(); ++i) cross[i] += f_self[i];
    const Tensor f_cross = o_layer_norm(cross, p.ln2_g, p.ln2_b, 1e-5);
    const Tensor f_tok = o_ffn_block(f_cross, p, c);
    for (std::int64_t t = 0; t < n; ++t)
      for (int i = 0; i < ch; ++i)
        f_trans.voxel(q.voxel_indices[static_cast<std::size_t>(t)])[i] = f_tok[t * ch + i];
  }

  const FeatureVolume deep = o_feature_deepening(f_in, f_trans, p, c);
  if (!mask) return deep;

  // Keep the deepened value only where the 3^3 neighborhood holds an active
  // voxel.
  FeatureVolume out = f_in;
  const Eigen::Vector3i dims = f_in.spec.dims;
  for (int x = 0; x < dims.x(); ++x)
    for (int y = 0; y < dims.y(); ++y)
      for (int z = 0; z < dims.z(); ++z) {
        bool near_active = false;
        for (int dx = -1; dx <= 1 && !near_active; ++dx)
          for (int dy = -1; dy <= 1 && !near_active; ++dy)
            for (int dz = -1; dz <= 1; ++dz) {
              const int nx = x + dx, ny = y + dy, nz = z + dz;
              if (nx < 0 || ny < 0 || nz < 0 || nx >= dims.x() || ny >= dims.y() ||
                  nz >= dims.z())
                continue;
              if (mask->test(f_in.spec.linear_index({nx, ny, nz}))) {
                near_active = true;
                break;
              }
            }
        if (near_active) {
          const std::int64_t v = f_in.spec.linear_index({x, y, z});
          for (int i = 0; i < ch; ++i) out.voxel(v)[i] = deep.voxel(v)[i];
        }
      }
  return out;
}

OccupancyMask o_voxelize(const PointCloud& points, const GridSpec& spec) {
  OccupancyMask mask(spec);
  for (const Eigen::Vector3d& p : points.points) {
    bool inside = true;
    Eigen::Vector3i idx;
    for (int a = 0; a < 3; ++a) {
      const double rel = std::floor((p[a] - spec.origin[a]) / spec.cell[a]);
      if (rel < 0.0 || rel >= spec.dims[a]) {
        inside = false;
        break;
      }
      idx[a] = static_cast<int>(rel);
    }
    if (inside)
      mask.bits[static_cast<std::size_t>((static_cast<std::int64_t>(idx.x()) * spec.dims.y() +
                                          idx.y()) *
                                             spec.dims.z() +
                                         idx.z())] = 1;
  }
  return mask;
}

OccupancyMask o_downsample_or(const OccupancyMask& mask, const Eigen::Vector3i& factor) {
  GridSpec coarse = mask.spec;
  coarse.cell = mask.spec.cell.cwiseProduct(factor.cast<double>());
  for (int a = 0; a < 3; ++a)
    coarse.dims[a] = (mask.spec.dims[a] + factor[a] - 1) / factor[a];
  OccupancyMask out(coarse);
  for (int x = 0; x < coarse.dims.x(); ++x)
    for (int y = 0; y < coarse.dims.y(); ++y)
      for (int z = 0; z < coarse.dims.z(); ++z) {
        bool any = false;
        for (int dx = 0; dx < factor.x() && !any; ++dx)
          for (int dy = 0; dy < factor.y() && !any; ++dy)
            for (int dz = 0; dz < factor.z(); ++dz) {
              const int ix = x * factor.x() + dx, iy = y * factor.y() + dy,
                        iz = z * factor.z() + dz;
              if (ix >= mask.spec.dims.x() || iy >= mask.spec.dims.y() ||
                  iz >= mask.spec.dims.z())
                continue;
              if (mask.test(mask.spec.linear_index({ix, iy, iz}))) {
                any = true;
                break;
              }
            }
        if (any) out.set(out.spec.linear_index({x, y, z}));
      }
  return out;
}

FeatureVolume o_downsample_mean(const FeatureVolume& vol, const Eigen::Vector3i& factor) {
  GridSpec coarse = vol.spec;
  coarse.cell = vol.spec.cell.cwiseProduct(factor.cast<double>());
  for (int a = 0; a < 3; ++a) coarse.dims[a] = (vol.spec.dims[a] + factor[a] - 1) / factor[a];
  const int c = vol.channels();
  FeatureVolume out(coarse, c);
  for (int x = 0; x < coarse.dims.x(); ++x)
    for (int y = 0; y < coarse.dims.y(); ++y)
      for (int z = 0; z < coarse.dims.z(); ++z)
        for (int i = 0; i < c; ++i) {
          double acc = 0.0;
          for (int dx = 0; dx < factor.x(); ++dx)
            for (int dy = 0; dy < factor.y(); ++dy)
              for (int dz = 0; dz < factor.z(); ++dz) {
                const int ix = x * factor.x() + dx, iy = y * factor.y() + dy,
                          iz = z * factor.z() + dz;
                if (ix >= vol.spec.dims.x() || iy >= vol.spec.dims.y() ||
                    iz >= vol.spec.dims.z())
                  continue;
                acc += vol.voxel(vol.spec.linear_index({ix, iy, iz}))[i];
              }
          out.voxel(out.spec.linear_index({x, y, z}))[i] = static_cast<float>(
              acc / (static_cast<double>(factor.x()) * factor.y() * factor.z()));
        }
  return out;
}

double o_iou(const OccupancyMask& pred, const OccupancyMask& gt, const OccupancyMask* eval) {
  std::int64_t inter = 0, uni = 0;
  for (std::size_t v = 0; v < pred.bits.size(); ++v) {
    if (eval && !eval->bits[v]) continue;
    inter += (pred.bits[v] && gt.bits[v]);
    uni += (pred.bits[v] || gt.bits[v]);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::pair<std::vector<double>, double> o_miou(const SemanticGrid& pred, const SemanticGrid& gt,
                                              const OccupancyMask* eval, int num_classes) {
  std::vector<double> per_class(static_cast<std::size_t>(num_classes),
                                std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    std::int64_t inter = 0, uni = 0;
    for (std::size_t v = 0; v < pred.labels.size(); ++v) {
      if (eval && !eval->bits[v]) continue;
      const bool pc = pred.labels[v] == c;
      const bool gc = gt.labels[v] == c;
      inter += (pc && gc);
      uni += (pc || gc);
    }
    if (uni == 0) continue;
    per_class[static_cast<std::size_t>(c)] =
        static_cast<double>(inter) / static_cast<double>(uni);
    sum += per_class[static_cast<std::size_t>(c)];
    ++present;
  }
  return {per_class, present > 0 ? sum / present : 0.0};
}

}  // namespace occforge::test
