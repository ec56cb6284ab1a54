// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occforge/feature.hpp"
#include "occforge/geometry.hpp"
#include "occforge/grid.hpp"
#include "occforge/params.hpp"
#include "occforge/tensor.hpp"

namespace occforge {

struct DcaConfig {
  int channels = 32;
  int heads = 8;
  int ref_points = 4;
  int ffn_hidden = 0;  // 0 selects 4 * channels
  int threads = 1;

  int head_dim() const { return channels / heads; }
  int hidden() const { return ffn_hidden > 0 ? ffn_hidden : 4 * channels; }
  void validate() const;
};

/// Parameter bundle of one DCA module instance. Registered under `prefix` as
/// {self_q,self_k,self_v,self_o,off,att,ffn1,ffn2}.{w,b}, {val,out}.w,
/// ln{1..3}.{gamma,beta}, conv{1..3}.{w,b}, bn{1..2}.{gamma,beta,mean,var}.
///
/// The value and output projections carry no bias: cross-attention must be
/// exactly linear in the context feature values, and a query with zero valid
/// cameras must contribute an exactly zero cross term.
struct DcaParams {
  Tensor self_q_w, self_q_b, self_k_w, self_k_b, self_v_w, self_v_b, self_o_w, self_o_b;
  Tensor off_w, off_b;  // C -> heads * ref_points * 2, raw pixel offsets
  Tensor att_w, att_b;  // C -> heads * ref_points, pre-softmax logits
  Tensor val_w, out_w;
  Tensor ffn1_w, ffn1_b, ffn2_w, ffn2_b;
  Tensor ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b;
  Tensor conv1_k, conv1_b, conv2_k, conv2_b, conv3_k, conv3_b;
  Tensor bn1_g, bn1_b, bn1_m, bn1_v, bn2_g, bn2_b, bn2_m, bn2_v;

  /// Projections and conv kernels are seeded; layer-norm and batch-norm
  /// parameters start inference-neutral (gamma 1, beta 0, mean 0, var 1).
  static DcaParams init(ParameterStore& store, const std::string& prefix,
                        const DcaConfig& config);
};

struct RefPixel {
  double u = 0.0;
  double v = 0.0;
  bool valid = false;  // in front of the camera and inside [0, W-1] x [0, H-1]
};

/// Active voxels flattened into attention tokens, with one reference pixel
/// per (voxel, camera) from projecting the voxel center.
struct VoxelQuerySet {
  std::vector<std::int64_t> voxel_indices;  // linear grid indices, ascending
  Tensor features;                          // (N, C)
  std::vector<RefPixel> refs;               // N * num_cameras, camera-minor
  int num_cameras = 0;

  std::int64_t count() const { return static_cast<std::int64_t>(voxel_indices.size()); }
  const RefPixel& ref(std::int64_t token, int camera) const {
    return refs[static_cast<std::size_t>(token * num_cameras + camera)];
  }
};

VoxelQuerySet make_query_set(const FeatureVolume& volume, const CameraRig& rig,
                             const OccupancyMask* mask);

/// LayerNorm(F_in + SelfAttn(F_in)) with multi-head scaled dot-product
/// attention over the N tokens.
Tensor self_attention_block(const Tensor& f_in, const DcaParams& params,
                            const DcaConfig& config);

/// Deformable cross-attention of the query tokens against the context maps.
/// Per head and reference point the query produces a pixel offset and a
/// logit; softmax runs over the points of a head, sampling is bilinear on the
/// value-projected map, and per-camera head outputs are averaged over the
/// valid cameras. Tokens with no valid camera yield exact zeros.
Tensor deformable_cross_attention(const VoxelQuerySet& queries,
                                  const std::vector<FeatureMap>& context,
                                  const DcaParams& params, const DcaConfig& config);

/// LayerNorm(F_self + DeformCrossAttn(F_self, context)).
Tensor cross_attention_block(const Tensor& f_self, const VoxelQuerySet& queries,
                             const std::vector<FeatureMap>& context, const DcaParams& params,
                             const DcaConfig& config);

/// LayerNorm(x + Linear2(ReLU(Linear1(x)))).
Tensor ffn_block(const Tensor& f_cross, const DcaParams& params, const DcaConfig& config);

/// Conv1(2C) -> BN -> ReLU -> Conv2(2C) -> BN -> ReLU -> Conv3(C) over the
/// channel concatenation [f_in, f_trans]. With `active` given, outputs are
/// produced only where the 3^3 neighborhood contains an active voxel; other
/// voxels keep their f_in value.
FeatureVolume feature_deepening(const FeatureVolume& f_in, const FeatureVolume& f_trans,
                                const DcaParams& params, const DcaConfig& config,
                                const std::vector<std::uint8_t>* active = nullptr);

/// Full DCA module: the transformer block (self -> cross -> FFN) runs on the
/// masked tokens only (all voxels when mask is null); the deepening pathway
/// sees the complete lattice with F_trans = F_in pass-through at inactive
/// voxels. Voxels whose whole 3^3 neighborhood is inactive are returned
/// exactly unchanged.
FeatureVolume dca_module(const FeatureVolume& f_in, const std::vector<FeatureMap>& context,
                         const CameraRig& rig, const OccupancyMask* mask,
                         const DcaParams& params, const DcaConfig& config);

}  // namespace occforge
