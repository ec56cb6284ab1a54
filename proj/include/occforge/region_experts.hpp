// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "occforge/dca.hpp"
#include "occforge/feature.hpp"
#include "occforge/grid.hpp"
#include "occforge/params.hpp"

namespace occforge {

/// Region scores: shared linear scorer over the masked mean-pooled feature of
/// each region. Empty regions score -infinity and are never selected.
std::vector<double> router_scores(const FeatureVolume& volume, const RegionPartition& partition,
                                  const Tensor& score_w, const Tensor& score_b);

struct RouteDecision {
  std::vector<double> scores;   // all regions
  std::vector<int> selected;    // K indices, descending score, ties to lower index
  std::vector<double> weights;  // softmax over the selected scores, aligned with `selected`
};

/// Top-K selection with deterministic tie-breaking (lower region index wins).
RouteDecision topk_select(const std::vector<double>& scores, int k);

/// Per-run routing trace; also serialized by the CLI.
struct RoutingReport {
  std::string variant;
  std::vector<double> scores;
  std::vector<int> selected;
  std::vector<double> weights;
  std::vector<int> executed;          // expert indices, in execution order
  std::vector<std::int64_t> mask_sizes;  // per recursion iteration
};

/// One expert: a DCA module restricted to its region mask.
FeatureVolume expert_apply(const FeatureVolume& volume, const std::vector<FeatureMap>& f_img,
                           const CameraRig& rig, const OccupancyMask& region_mask,
                           const DcaParams& params, const DcaConfig& config);

/// MoE-style refinement: route, run the K selected experts (each with its own
/// `expert.{m}.*` parameter namespace, created on first use), and return the
/// weighted sum of their full-volume outputs accumulated in ascending region
/// index. Exactly K experts execute per call.
FeatureVolume region_expert_refine(const FeatureVolume& f_out,
                                   const std::vector<FeatureMap>& f_img, const CameraRig& rig,
                                   const RegionPartition& partition, int top_k,
                                   ParameterStore& store, const DcaConfig& config,
                                   RoutingReport* report = nullptr);

/// k_t = max(1, floor(ratio_t * total)), strictly decreasing (duplicates are
/// decremented; the schedule truncates when it would fall below one voxel).
/// Ratios must start at 1 and strictly decrease within (0, 1].
std::vector<std::int64_t> k_schedule(std::int64_t total_voxels,
                                     const std::vector<double>& ratios);

/// Next nested mask: per-candidate importance is a linear projection of the
/// voxel feature concatenated with the previous-mask bit; the top k_t
/// candidates of M_prev survive, ties resolved toward the smaller linear
/// voxel index.
OccupancyMask recursion_mask(const FeatureVolume& f_prev, const OccupancyMask& m_prev,
                             std::int64_t k_t, const Tensor& router_w, const Tensor& router_b);

/// Recursive single-expert refinement: one shared `r2.dca.*` parameter set
/// applied over a strictly nested mask schedule; iteration 1 covers the full
/// grid.
FeatureVolume recursive_expert_refine(const FeatureVolume& f_out,
                                      const std::vector<FeatureMap>& f_img,
                                      const CameraRig& rig, const std::vector<double>& ratios,
                                      int iterations, ParameterStore& store,
                                      const DcaConfig& config, RoutingReport* report = nullptr);

}  // namespace occforge
