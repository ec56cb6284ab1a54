// SPDX-FileCopyrightText: 2026 The OccForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "occforge/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace occforge {

namespace {

void check_lattice(const GridSpec& a, const GridSpec& b, const char* where) {
  if (a.dims != b.dims) throw std::invalid_argument(std::string(where) + ": dim mismatch");
}

}  // namespace

double iou_binary(const OccupancyMask& pred, const OccupancyMask& gt,
                  const OccupancyMask* eval_mask) {
  check_lattice(pred.spec, gt.spec, "iou_binary");
  if (eval_mask) check_lattice(pred.spec, eval_mask->spec, "iou_binary");
  std::int64_t inter = 0, uni = 0;
  for (std::size_t v = 0; v < pred.bits.size(); ++v) {
    if (eval_mask && !eval_mask->bits[v]) continue;
    const bool p = pred.bits[v] != 0;
    const bool g = gt.bits[v] != 0;
    inter += (p && g);
    uni += (p || g);
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

MiouResult miou(const SemanticGrid& pred, const SemanticGrid& gt,
                const OccupancyMask* eval_mask, int num_classes) {
  check_lattice(pred.spec, gt.spec, "miou");
  if (eval_mask) check_lattice(pred.spec, eval_mask->spec, "miou");
  if (num_classes < 1) throw std::invalid_argument("miou: need at least one class");

  std::vector<std::int64_t> inter(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::int64_t> uni(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t v = 0; v < pred.labels.size(); ++v) {
    if (eval_mask && !eval_mask->bits[v]) continue;
    const std::uint16_t p = pred.labels[v];
    const std::uint16_t g = gt.labels[v];
    for (int c = 0; c < num_classes; ++c) {
      const bool pc = (p == c);
      const bool gc = (g == c);
      inter[static_cast<std::size_t>(c)] += (pc && gc);
      uni[static_cast<std::size_t>(c)] += (pc || gc);
    }
  }

  MiouResult result;
  result.per_class.assign(static_cast<std::size_t>(num_classes),
                          std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (uni[static_cast<std::size_t>(c)] == 0) continue;  // absent from both: excluded
    const double v = static_cast<double>(inter[static_cast<std::size_t>(c)]) /
                     static_cast<double>(uni[static_cast<std::size_t>(c)]);
    result.per_class[static_cast<std::size_t>(c)] = v;
    sum += v;
    ++present;
  }
  result.mean = present > 0 ? sum / present : 0.0;
  return result;
}

GapReport gap_report(const OccupancyMask& depth_grid, const OccupancyMask& gt,
                     const OccupancyMask* eval_mask) {
  check_lattice(depth_grid.spec, gt.spec, "gap_report");
  if (eval_mask) check_lattice(depth_grid.spec, eval_mask->spec, "gap_report");

  std::int64_t depth_total = 0, gt_total = 0, depth_only = 0, gt_only = 0;
  for (std::size_t v = 0; v < depth_grid.bits.size(); ++v) {
    if (eval_mask && !eval_mask->bits[v]) continue;
    const bool d = depth_grid.bits[v] != 0;
    const bool g = gt.bits[v] != 0;
    depth_total += d;
    gt_total += g;
    depth_only += (d && !g);
    gt_only += (!d && g);
  }

  GapReport report;
  report.iou = iou_binary(depth_grid, gt, eval_mask);
  report.over_densification =
      depth_total > 0 ? static_cast<double>(depth_only) / static_cast<double>(depth_total) : 0.0;
  report.occlusion_miss =
      gt_total > 0 ? static_cast<double>(gt_only) / static_cast<double>(gt_total) : 0.0;
  return report;
}

}  // namespace occforge
