// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "occforge/dca.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "occforge/errors.hpp"
#include "occforge/nn.hpp"
#include "occforge/threads.hpp"

namespace occforge {

void DcaConfig::validate() const {
  if (channels < 1 || heads < 1 || ref_points < 1)
    throw std::invalid_argument("dca config fields must be positive");
  if (channels % heads != 0)
    throw std::invalid_argument("dca channels must be divisible by heads");
}

DcaParams DcaParams::init(ParameterStore& store, const std::string& prefix,
                          const DcaConfig& config) {
  config.validate();
  const std::int64_t c = config.channels;
  const std::int64_t hd = config.hidden();
  const std::int64_t np = static_cast<std::int64_t>(config.heads) * config.ref_points;
  const auto u = [&](const char* leaf, std::vector<std::int64_t> dims) {
    return store.uniform(prefix + "." + leaf, dims);
  };
  const auto k1 = [&](const char* leaf, std::vector<std::int64_t> dims, float v) {
    return store.constant(prefix + "." + leaf, dims, v);
  };

  DcaParams p;
  p.self_q_w = u("self_q.w", {c, c});
  p.self_q_b = u("self_q.b", {c});
  p.self_k_w = u("self_k.w", {c, c});
  p.self_k_b = u("self_k.b", {c});
  p.self_v_w = u("self_v.w", {c, c});
  p.self_v_b = u("self_v.b", {c});
  p.self_o_w = u("self_o.w", {c, c});
  p.self_o_b = u("self_o.b", {c});
  p.off_w = u("off.w", {c, np * 2});
  p.off_b = u("off.b", {np * 2});
  p.att_w = u("att.w", {c, np});
  p.att_b = u("att.b", {np});
  p.val_w = u("val.w", {c, c});
  p.out_w = u("out.w", {c, c});
  p.ffn1_w = u("ffn1.w", {c, hd});
  p.ffn1_b = u("ffn1.b", {hd});
  p.ffn2_w = u("ffn2.w", {hd, c});
  p.ffn2_b = u("ffn2.b", {c});
  p.ln1_g = k1("ln1.gamma", {c}, 1.0f);
  p.ln1_b = k1("ln1.beta", {c}, 0.0f);
  p.ln2_g = k1("ln2.gamma", {c}, 1.0f);
  p.ln2_b = k1("ln2.beta", {c}, 0.0f);
  p.ln3_g = k1("ln3.gamma", {c}, 1.0f);
  p.ln3_b = k1("ln3.beta", {c}, 0.0f);
  p.conv1_k = u("conv1.w", {3, 3, 3, 2 * c, 2 * c});
  p.conv1_b = u("conv1.b", {2 * c});
  p.conv2_k = u("conv2.w", {3, 3, 3, 2 * c, 2 * c});
  p.conv2_b = u("conv2.b", {2 * c});
  p.conv3_k = u("conv3.w", {3, 3, 3, 2 * c, c});
  p.conv3_b = u("conv3.b", {c});
  p.bn1_g = k1("bn1.gamma", {2 * c}, 1.0f);
  p.bn1_b = k1("bn1.beta", {2 * c}, 0.0f);
  p.bn1_m = k1("bn1.mean", {2 * c}, 0.0f);
  p.bn1_v = k1("bn1.var", {2 * c}, 1.0f);
  p.bn2_g = k1("bn2.gamma", {2 * c}, 1.0f);
  p.bn2_b = k1("bn2.beta", {2 * c}, 0.0f);
  p.bn2_m = k1("bn2.mean", {2 * c}, 0.0f);
  p.bn2_v = k1("bn2.var", {2 * c}, 1.0f);
  return p;
}

VoxelQuerySet make_query_set(const FeatureVolume& volume, const CameraRig& rig,
                             const OccupancyMask* mask) {
  volume.validate();
  if (mask && !mask->spec.same_lattice(volume.spec))
    throw std::invalid_argument("query mask lattice does not match the volume");

  VoxelQuerySet set;
  set.num_cameras = rig.count();
  const std::int64_t total = volume.spec.voxel_count();
  for (std::int64_t v = 0; v < total; ++v) {
    if (mask && !mask->test(v)) continue;
    set.voxel_indices.push_back(v);
  }

  const int channels = volume.channels();
  const std::int64_t n = set.count();
  set.features = Tensor({n, channels});
  set.refs.resize(static_cast<std::size_t>(n * set.num_cameras));

  for (std::int64_t t = 0; t < n; ++t) {
    const std::int64_t v = set.voxel_indices[static_cast<std::size_t>(t)];
    std::memcpy(set.features.data() + t * channels, volume.voxel(v),
                sizeof(float) * static_cast<std::size_t>(channels));
    const Eigen::Vector3d center = voxel_center(volume.spec.index_of_linear(v), volume.spec);
    for (int cam = 0; cam < set.num_cameras; ++cam) {
      const Camera& camera = rig.cameras[static_cast<std::size_t>(cam)];
      const PixelProjection proj =
          ego_to_cam_and_project(center, camera.intrinsics, camera.extrinsics);
      RefPixel& ref = set.refs[static_cast<std::size_t>(t * set.num_cameras + cam)];
      ref.u = proj.pixel.x();
      ref.v = proj.pixel.y();
      ref.valid = proj.in_front && proj.pixel.x() >= 0.0 &&
                  proj.pixel.x() <= camera.intrinsics.width - 1 && proj.pixel.y() >= 0.0 &&
                  proj.pixel.y() <= camera.intrinsics.height - 1;
    }
  }
  return set;
}

Tensor self_attention_block(const Tensor& f_in, const DcaParams& params,
                            const DcaConfig& config) {
  config.validate();
  const std::int64_t n = f_in.dim(0);
  const std::int64_t c = config.channels;
  if (f_in.rank() != 2 || f_in.dim(1) != c)
    throw std::invalid_argument("self_attention_block: tokens must be (N, C)");

  const Tensor q = linear(f_in, params.self_q_w, &params.self_q_b, config.threads);
  const Tensor k = linear(f_in, params.self_k_w, &params.self_k_b, config.threads);
  const Tensor v = linear(f_in, params.self_v_w, &params.self_v_b, config.threads);

  const int heads = config.heads;
  const int dh = config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor attended({n, c});
  parallel_for(n, config.threads, [&](std::int64_t lo, std::int64_t hi) {
    std::vector<double> logits(static_cast<std::size_t>(n));
    for (std::int64_t i = lo; i < hi; ++i) {
      for (int h = 0; h < heads; ++h) {
        const std::int64_t base = static_cast<std::int64_t>(h) * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::int64_t j = 0; j < n; ++j) {
          double dot = 0.0;
          for (int d = 0; d < dh; ++d)
            dot += static_cast<double>(q[i * c + base + d]) *
                   static_cast<double>(k[j * c + base + d]);
          logits[static_cast<std::size_t>(j)] = dot * scale;
          mx = std::max(mx, logits[static_cast<std::size_t>(j)]);
        }
        double denom = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
          logits[static_cast<std::size_t>(j)] = std::exp(logits[static_cast<std::size_t>(j)] - mx);
          denom += logits[static_cast<std::size_t>(j)];
        }
        for (int d = 0; d < dh; ++d) {
          double acc = 0.0;
          for (std::int64_t j = 0; j < n; ++j)
            acc += logits[static_cast<std::size_t>(j)] * static_cast<double>(v[j * c + base + d]);
          attended[i * c + base + d] = static_cast<float>(acc / denom);
        }
      }
    }
  });

  Tensor out = linear(attended, params.self_o_w, &params.self_o_b, config.threads);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] += f_in[i];
  return layer_norm(out, params.ln1_g, params.ln1_b);
}

Tensor deformable_cross_attention(const VoxelQuerySet& queries,
                                  const std::vector<FeatureMap>& context,
                                  const DcaParams& params, const DcaConfig& config) {
  config.validate();
  const std::int64_t n = queries.count();
  const std::int64_t c = config.channels;
  if (queries.features.rank() != 2 || queries.features.dim(1) != c)
    throw std::invalid_argument("deformable_cross_attention: query features must be (N, C)");
  if (static_cast<int>(context.size()) != queries.num_cameras)
    throw std::invalid_argument("deformable_cross_attention: one context map per camera");
  for (const FeatureMap& map : context)
    if (map.channels() != c)
      throw std::invalid_argument("deformable_cross_attention: context channels must equal C");

  // Value projection of every context map, shared by all queries.
  std::vector<FeatureMap> values;
  values.reserve(context.size());
  for (const FeatureMap& map : context) {
    FeatureMap vm(map.height(), map.width(), static_cast<int>(c), map.camera_index);
    vm.tensor = linear(map.tensor, params.val_w, nullptr, config.threads);
    values.push_back(std::move(vm));
  }

  const Tensor offsets = linear(queries.features, params.off_w, &params.off_b, config.threads);
  const Tensor logits = linear(queries.features, params.att_w, &params.att_b, config.threads);

  const int heads = config.heads;
  const int pts = config.ref_points;
  const int dh = config.head_dim();

  Tensor gathered({n, c});
  parallel_for(n, config.threads, [&](std::int64_t lo, std::int64_t hi) {
    std::vector<double> weight(static_cast<std::size_t>(pts));
    std::vector<float> sample(static_cast<std::size_t>(c));
    std::vector<double> head_acc(static_cast<std::size_t>(dh));
    std::vector<double> cam_acc(static_cast<std::size_t>(dh));
    for (std::int64_t i = lo; i < hi; ++i) {
      for (int h = 0; h < heads; ++h) {
        // Softmax over the reference points of this head; the logits depend
        // only on the query, so the weights are shared across cameras.
        const std::int64_t lbase = i * heads * pts + static_cast<std::int64_t>(h) * pts;
        double mx = -std::numeric_limits<double>::infinity();
        for (int p = 0; p < pts; ++p)
          mx = std::max(mx, static_cast<double>(logits[lbase + p]));
        double denom = 0.0;
        for (int p = 0; p < pts; ++p) {
          weight[static_cast<std::size_t>(p)] =
              std::exp(static_cast<double>(logits[lbase + p]) - mx);
          denom += weight[static_cast<std::size_t>(p)];
        }
        for (int p = 0; p < pts; ++p) weight[static_cast<std::size_t>(p)] /= denom;

        std::fill(head_acc.begin(), head_acc.end(), 0.0);
        int valid_cams = 0;
        for (int cam = 0; cam < queries.num_cameras; ++cam) {
          const RefPixel& ref = queries.ref(i, cam);
          if (!ref.valid) continue;
          ++valid_cams;
          std::fill(cam_acc.begin(), cam_acc.end(), 0.0);
          for (int p = 0; p < pts; ++p) {
            const std::int64_t obase =
                (i * heads * pts + static_cast<std::int64_t>(h) * pts + p) * 2;
            const double su = ref.u + static_cast<double>(offsets[obase]);
            const double sv = ref.v + static_cast<double>(offsets[obase + 1]);
            bilinear_sample(values[static_cast<std::size_t>(cam)], su, sv, sample.data());
            for (int d = 0; d < dh; ++d)
              cam_acc[static_cast<std::size_t>(d)] +=
                  weight[static_cast<std::size_t>(p)] *
                  static_cast<double>(sample[static_cast<std::size_t>(h * dh + d)]);
          }
          for (int d = 0; d < dh; ++d)
            head_acc[static_cast<std::size_t>(d)] += cam_acc[static_cast<std::size_t>(d)];
        }
        float* dst = gathered.data() + i * c + static_cast<std::int64_t>(h) * dh;
        if (valid_cams == 0) {
          for (int d = 0; d < dh; ++d) dst[d] = 0.0f;
        } else {
          for (int d = 0; d < dh; ++d)
            dst[d] = static_cast<float>(head_acc[static_cast<std::size_t>(d)] / valid_cams);
        }
      }
    }
  });

  return linear(gathered, params.out_w, nullptr, config.threads);
}

Tensor cross_attention_block(const Tensor& f_self, const VoxelQuerySet& queries,
                             const std::vector<FeatureMap>& context, const DcaParams& params,
                             const DcaConfig& config) {
  VoxelQuerySet current = queries;
  current.features = f_self;
  Tensor cross = deformable_cross_attention(current, context, params, config);
  for (std::int64_t i = 0; i < cross.size(); ++i) cross[i] += f_self[i];
  return layer_norm(cross, params.ln2_g, params.ln2_b);
}

Tensor ffn_block(const Tensor& f_cross, const DcaParams& params, const DcaConfig& config) {
  Tensor hidden = linear(f_cross, params.ffn1_w, &params.ffn1_b, config.threads);
  relu_inplace(hidden);
  Tensor out = linear(hidden, params.ffn2_w, &params.ffn2_b, config.threads);
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] += f_cross[i];
  return layer_norm(out, params.ln3_g, params.ln3_b);
}

FeatureVolume feature_deepening(const FeatureVolume& f_in, const FeatureVolume& f_trans,
                                const DcaParams& params, const DcaConfig& config,
                                const std::vector<std::uint8_t>* active) {
  f_in.validate();
  f_trans.validate();
  if (!f_in.spec.same_lattice(f_trans.spec) || f_in.channels() != f_trans.channels())
    throw std::invalid_argument("feature_deepening: input volumes must match");
  const int c = f_in.channels();
  if (c != config.channels) throw std::invalid_argument("feature_deepening: channel mismatch");

  const std::int64_t voxels = f_in.spec.voxel_count();

  // Compute sets shrink stage by stage so that every written voxel sees fully
  // valid neighborhoods: conv1 needs values up to three cells away from the
  // active set, conv3 only one.
  std::vector<std::uint8_t> d1, d2, d3;
  const std::vector<std::uint8_t>* c1 = nullptr;
  const std::vector<std::uint8_t>* c2 = nullptr;
  const std::vector<std::uint8_t>* c3 = nullptr;
  if (active) {
    d1 = dilate_flags(*active, f_in.spec);
    d2 = dilate_flags(d1, f_in.spec);
    d3 = dilate_flags(d2, f_in.spec);
    c1 = &d3;
    c2 = &d2;
    c3 = &d1;
  }

  FeatureVolume cat(f_in.spec, 2 * c);
  for (std::int64_t v = 0; v < voxels; ++v) {
    float* dst = cat.voxel(v);
    std::memcpy(dst, f_in.voxel(v), sizeof(float) * static_cast<std::size_t>(c));
    std::memcpy(dst + c, f_trans.voxel(v), sizeof(float) * static_cast<std::size_t>(c));
  }

  FeatureVolume h1 = conv3d(cat, params.conv1_k, params.conv1_b, c1, config.threads);
  h1.tensor = batch_norm_inference(h1.tensor, params.bn1_g, params.bn1_b, params.bn1_m,
                                   params.bn1_v);
  relu_inplace(h1.tensor);
  FeatureVolume h2 = conv3d(h1, params.conv2_k, params.conv2_b, c2, config.threads);
  h2.tensor = batch_norm_inference(h2.tensor, params.bn2_g, params.bn2_b, params.bn2_m,
                                   params.bn2_v);
  relu_inplace(h2.tensor);
  FeatureVolume deep = conv3d(h2, params.conv3_k, params.conv3_b, c3, config.threads);

  if (!active) return deep;

  FeatureVolume out = f_in;
  for (std::int64_t v = 0; v < voxels; ++v) {
    if (d1[static_cast<std::size_t>(v)])
      std::memcpy(out.voxel(v), deep.voxel(v), sizeof(float) * static_cast<std::size_t>(c));
  }
  return out;
}

FeatureVolume dca_module(const FeatureVolume& f_in, const std::vector<FeatureMap>& context,
                         const CameraRig& rig, const OccupancyMask* mask,
                         const DcaParams& params, const DcaConfig& config) {
  config.validate();
  f_in.validate();
  if (f_in.channels() != config.channels)
    throw std::invalid_argument("dca_module: volume channels must match config");
  if (mask && !mask->spec.same_lattice(f_in.spec))
    throw std::invalid_argument("dca_module: mask lattice must match the volume");

  const VoxelQuerySet queries = make_query_set(f_in, rig, mask);

  FeatureVolume f_trans = f_in;  // inactive voxels pass through
  if (queries.count() > 0) {
    const Tensor f_self = self_attention_block(queries.features, params, config);
    const Tensor f_cross = cross_attention_block(f_self, queries, context, params, config);
    const Tensor f_tok = ffn_block(f_cross, params, config);
    const int c = config.channels;
    for (std::int64_t t = 0; t < queries.count(); ++t)
      std::memcpy(f_trans.voxel(queries.voxel_indices[static_cast<std::size_t>(t)]),
                  f_tok.data() + t * c, sizeof(float) * static_cast<std::size_t>(c));
  }

  if (!mask) return feature_deepening(f_in, f_trans, params, config);

  std::vector<std::uint8_t> active(mask->bits.begin(), mask->bits.end());
  return feature_deepening(f_in, f_trans, params, config, &active);
}

}  // namespace occforge
