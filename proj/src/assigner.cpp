#include "lidarpost/assigner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lidarpost {

namespace {

using Matrix = std::vector<std::vector<double>>;

// overlaps[a][g]
Matrix bev_overlaps(std::span<const Box3D> anchors, std::span<const Box3D> gts) {
  Matrix m(anchors.size(), std::vector<double>(gts.size(), 0.0));
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    for (std::size_t g = 0; g < gts.size(); ++g) m[a][g] = bev_iou(anchors[a], gts[g]);
  }
  return m;
}

}  // namespace

std::string_view to_string(AnchorLabelKind kind) {
  switch (kind) {
    case AnchorLabelKind::kPositive: return "POSITIVE";
    case AnchorLabelKind::kNegative: return "NEGATIVE";
    case AnchorLabelKind::kIgnored: return "IGNORED";
  }
  return "UNKNOWN";
}

AssignmentResult fixed_assign(std::span<const Box3D> anchors, std::span<const Box3D> gts,
                              double pos_thr, double neg_thr) {
  if (!(0.0 <= neg_thr && neg_thr <= pos_thr && pos_thr <= 1.0)) {
    throw std::invalid_argument("fixed_assign: requires 0 <= neg_thr <= pos_thr <= 1");
  }
  const Matrix overlaps = bev_overlaps(anchors, gts);
  AssignmentResult result;
  result.labels.resize(anchors.size());

  for (std::size_t a = 0; a < anchors.size(); ++a) {
    double best = 0.0;
    std::optional<std::size_t> best_gt;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (!best_gt || overlaps[a][g] > best) {
        best = overlaps[a][g];
        best_gt = g;
      }
    }
    AnchorLabel& label = result.labels[a];
    if (best_gt && best >= pos_thr) {
      label = {AnchorLabelKind::kPositive, best_gt};
    } else if (best < neg_thr) {
      label = {AnchorLabelKind::kNegative, std::nullopt};
    } else {
      label = {AnchorLabelKind::kIgnored, std::nullopt};
    }
  }

  // Every gt keeps at least its best anchor. When two gts share a best
  // anchor the higher-overlap gt wins, ties to the lower gt index.
  std::vector<std::optional<std::size_t>> forced(anchors.size());
  for (std::size_t g = 0; g < gts.size(); ++g) {
    std::optional<std::size_t> best_anchor;
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      if (!best_anchor || overlaps[a][g] > overlaps[*best_anchor][g]) best_anchor = a;
    }
    if (!best_anchor || overlaps[*best_anchor][g] <= 0.0) continue;
    auto& slot = forced[*best_anchor];
    if (!slot || overlaps[*best_anchor][g] > overlaps[*best_anchor][*slot]) slot = g;
  }
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (forced[a]) result.labels[a] = {AnchorLabelKind::kPositive, forced[a]};
  }
  return result;
}

AssignmentResult adaptive_assign(std::span<const Box3D> anchors, std::span<const Box3D> gts,
                                 std::size_t k) {
  if (anchors.empty()) throw std::invalid_argument("adaptive_assign: no anchors");
  if (k == 0) throw std::invalid_argument("adaptive_assign: k must be >= 1");

  AssignmentResult result;
  result.labels.assign(anchors.size(), AnchorLabel{});
  result.adaptive_thresholds.resize(gts.size(), 0.0);

  // Best claiming gt per anchor and its IoU.
  std::vector<std::optional<std::size_t>> owner(anchors.size());
  std::vector<double> owner_iou(anchors.size(), 0.0);

  std::vector<std::size_t> order(anchors.size());
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const Box3D& gt = gts[g];
    std::vector<double> dist(anchors.size());
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      dist[a] = std::hypot(anchors[a].cx - gt.cx, anchors[a].cy - gt.cy);
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t n = std::min(k, anchors.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](std::size_t l, std::size_t r) {
                        return dist[l] < dist[r] || (dist[l] == dist[r] && l < r);
                      });

    std::vector<double> ious(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ious[i] = bev_iou(anchors[order[i]], gt);
      sum += ious[i];
    }
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (double v : ious) sq += (v - mean) * (v - mean);
    const double threshold = mean + std::sqrt(sq / static_cast<double>(n));
    result.adaptive_thresholds[g] = threshold;

    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = order[i];
      if (ious[i] < threshold || !contains_bev(gt, {anchors[a].cx, anchors[a].cy})) continue;
      if (!owner[a] || ious[i] > owner_iou[a]) {
        owner[a] = g;
        owner_iou[a] = ious[i];
      }
    }
  }

  for (std::size_t a = 0; a < anchors.size(); ++a) {
    if (owner[a]) result.labels[a] = {AnchorLabelKind::kPositive, owner[a]};
  }
  return result;
}

}  // namespace lidarpost
