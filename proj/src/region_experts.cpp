// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "occforge/region_experts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "occforge/errors.hpp"

namespace occforge {

std::vector<double> router_scores(const FeatureVolume& volume, const RegionPartition& partition,
                                  const Tensor& score_w, const Tensor& score_b) {
  volume.validate();
  if (!partition.spec.same_lattice(volume.spec))
    throw std::invalid_argument("router_scores: partition lattice must match the volume");
  const int c = volume.channels();
  if (score_w.size() != c || score_b.size() != 1)
    throw std::invalid_argument("router_scores: scorer extents must be (C) and (1)");

  std::vector<double> scores;
  scores.reserve(partition.region_masks.size());
  std::vector<double> mean(static_cast<std::size_t>(c));
  const std::int64_t voxels = volume.spec.voxel_count();
  for (const OccupancyMask& mask : partition.region_masks) {
    std::int64_t count = 0;
    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::int64_t v = 0; v < voxels; ++v) {
      if (!mask.test(v)) continue;
      ++count;
      const float* f = volume.voxel(v);
      for (int i = 0; i < c; ++i) mean[static_cast<std::size_t>(i)] += f[i];
    }
    if (count == 0) {
      scores.push_back(-std::numeric_limits<double>::infinity());
      continue;
    }
    double s = static_cast<double>(score_b[0]);
    for (int i = 0; i < c; ++i)
      s += mean[static_cast<std::size_t>(i)] / static_cast<double>(count) *
           static_cast<double>(score_w[i]);
    scores.push_back(s);
  }
  return scores;
}

RouteDecision topk_select(const std::vector<double>& scores, int k) {
  const int m = static_cast<int>(scores.size());
  if (k < 1 || k > m) throw std::invalid_argument("topk_select: K out of range");

  RouteDecision decision;
  decision.scores = scores;
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    return a < b;
  });
  decision.selected.assign(order.begin(), order.begin() + k);

  // Softmax over the selected scores only.
  double mx = -std::numeric_limits<double>::infinity();
  for (int idx : decision.selected) mx = std::max(mx, scores[static_cast<std::size_t>(idx)]);
  double denom = 0.0;
  decision.weights.reserve(static_cast<std::size_t>(k));
  for (int idx : decision.selected) {
    const double e = std::exp(scores[static_cast<std::size_t>(idx)] - mx);
    decision.weights.push_back(e);
    denom += e;
  }
  for (double& w : decision.weights) w /= denom;

  double sum = 0.0;
  for (double w : decision.weights) sum += w;
  require(std::abs(sum - 1.0) <= 1e-6, "route weights must sum to 1");
  return decision;
}

FeatureVolume expert_apply(const FeatureVolume& volume, const std::vector<FeatureMap>& f_img,
                           const CameraRig& rig, const OccupancyMask& region_mask,
                           const DcaParams& params, const DcaConfig& config) {
  return dca_module(volume, f_img, rig, &region_mask, params, config);
}

FeatureVolume region_expert_refine(const FeatureVolume& f_out,
                                   const std::vector<FeatureMap>& f_img, const CameraRig& rig,
                                   const RegionPartition& partition, int top_k,
                                   ParameterStore& store, const DcaConfig& config,
                                   RoutingReport* report) {
  const Tensor& score_w = store.uniform("router.score.w", {config.channels});
  const Tensor& score_b = store.uniform("router.score.b", {1});
  const std::vector<double> scores = router_scores(f_out, partition, score_w, score_b);
  const RouteDecision decision = topk_select(scores, top_k);

  if (report) {
    report->variant = "moe";
    report->scores = decision.scores;
    report->selected = decision.selected;
    report->weights = decision.weights;
  }

  // Accumulate in ascending region index for a fixed summation order.
  std::vector<std::size_t> order(decision.selected.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return decision.selected[a] < decision.selected[b];
  });

  const std::int64_t n = f_out.tensor.size();
  std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
  for (std::size_t rank : order) {
    const int m = decision.selected[rank];
    const double w = decision.weights[rank];
    const DcaParams expert = DcaParams::init(store, "expert." + std::to_string(m), config);
    if (report) report->executed.push_back(m);
    const FeatureVolume out = expert_apply(f_out, f_img, rig,
                                           partition.region_masks[static_cast<std::size_t>(m)],
                                           expert, config);
    for (std::int64_t i = 0; i < n; ++i)
      acc[static_cast<std::size_t>(i)] += w * static_cast<double>(out.tensor[i]);
  }

  FeatureVolume result(f_out.spec, f_out.channels());
  for (std::int64_t i = 0; i < n; ++i)
    result.tensor[i] = static_cast<float>(acc[static_cast<std::size_t>(i)]);
  return result;
}

std::vector<std::int64_t> k_schedule(std::int64_t total_voxels,
                                     const std::vector<double>& ratios) {
  if (total_voxels < 1) throw std::invalid_argument("k_schedule: need at least one voxel");
  if (ratios.empty()) throw std::invalid_argument("k_schedule: empty ratio list");
  if (ratios.front() != 1.0) throw std::invalid_argument("k_schedule: first ratio must be 1");
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (!(ratios[i] > 0.0) || ratios[i] > 1.0)
      throw std::invalid_argument("k_schedule: ratios must lie in (0, 1]");
    if (i > 0 && !(ratios[i] < ratios[i - 1]))
      throw std::invalid_argument("k_schedule: ratios must strictly decrease");
  }

  std::vector<std::int64_t> ks;
  for (double ratio : ratios) {
    std::int64_t k = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::floor(ratio * static_cast<double>(total_voxels))));
    if (!ks.empty()) k = std::min(k, ks.back() - 1);  // enforce strict decrease
    if (k < 1) break;                                 // schedule exhausted: truncate
    ks.push_back(k);
  }
  if (ks.size() < ratios.size())
    std::fprintf(stderr,
                 "warning: mask schedule truncated to %zu of %zu iterations (%lld voxels)\n",
                 ks.size(), ratios.size(), static_cast<long long>(total_voxels));
  return ks;
}

OccupancyMask recursion_mask(const FeatureVolume& f_prev, const OccupancyMask& m_prev,
                             std::int64_t k_t, const Tensor& router_w, const Tensor& router_b) {
  f_prev.validate();
  if (!m_prev.spec.same_lattice(f_prev.spec))
    throw std::invalid_argument("recursion_mask: mask lattice must match the volume");
  const int c = f_prev.channels();
  if (router_w.size() != c + 1 || router_b.size() != 1)
    throw std::invalid_argument("recursion_mask: router extents must be (C+1) and (1)");
  const std::int64_t candidates = m_prev.popcount();
  if (k_t < 1 || k_t > candidates)
    throw std::invalid_argument("recursion_mask: k_t exceeds the candidate count");

  struct Scored {
    double importance;
    std::int64_t voxel;
  };
  std::vector<Scored> scored;
  scored.reserve(static_cast<std::size_t>(candidates));
  const std::int64_t voxels = f_prev.spec.voxel_count();
  for (std::int64_t v = 0; v < voxels; ++v) {
    if (!m_prev.test(v)) continue;
    const float* f = f_prev.voxel(v);
    double imp = static_cast<double>(router_b[0]) + static_cast<double>(router_w[c]);  // mask bit
    for (int i = 0; i < c; ++i)
      imp += static_cast<double>(f[i]) * static_cast<double>(router_w[i]);
    scored.push_back({imp, v});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    return a.voxel < b.voxel;
  });

  OccupancyMask next(m_prev.spec);
  for (std::int64_t i = 0; i < k_t; ++i) next.set(scored[static_cast<std::size_t>(i)].voxel);

  require(next.popcount() == k_t, "recursion mask cardinality mismatch");
  for (std::int64_t v = 0; v < voxels; ++v)
    require(!next.test(v) || m_prev.test(v), "recursion mask must nest inside its predecessor");
  return next;
}

FeatureVolume recursive_expert_refine(const FeatureVolume& f_out,
                                      const std::vector<FeatureMap>& f_img,
                                      const CameraRig& rig, const std::vector<double>& ratios,
                                      int iterations, ParameterStore& store,
                                      const DcaConfig& config, RoutingReport* report) {
  if (iterations < 1) throw std::invalid_argument("recursive_expert_refine: need n >= 1");
  if (static_cast<std::size_t>(iterations) > ratios.size())
    throw std::invalid_argument("recursive_expert_refine: more iterations than ratios");

  const std::int64_t total = f_out.spec.voxel_count();
  std::vector<std::int64_t> ks =
      k_schedule(total, {ratios.begin(), ratios.begin() + iterations});
  // One shared expert, reused on every iteration.
  const DcaParams expert = DcaParams::init(store, "r2.dca", config);

  if (report) report->variant = "mor";

  OccupancyMask mask(f_out.spec);
  std::fill(mask.bits.begin(), mask.bits.end(), 1);  // iteration 1 covers the grid
  FeatureVolume current = f_out;
  for (std::size_t t = 0; t < ks.size(); ++t) {
    if (t > 0) {
      const std::string stem = "r2.router." + std::to_string(t + 1);
      const Tensor& w = store.uniform(stem + ".w", {config.channels + 1});
      const Tensor& b = store.uniform(stem + ".b", {1});
      mask = recursion_mask(current, mask, ks[t], w, b);
    }
    if (report) report->mask_sizes.push_back(mask.popcount());
    current = expert_apply(current, f_img, rig, mask, expert, config);
  }
  return current;
}

}  // namespace occforge
