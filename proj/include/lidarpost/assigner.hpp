#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lidarpost/geometry.hpp"

namespace lidarpost {

enum class AnchorLabelKind { kPositive, kNegative, kIgnored };

std::string_view to_string(AnchorLabelKind kind);

struct AnchorLabel {
  AnchorLabelKind kind = AnchorLabelKind::kNegative;
  std::optional<std::size_t> gt_index;  // set iff kind == kPositive

  bool operator==(const AnchorLabel&) const = default;
};

struct AssignmentResult {
  std::vector<AnchorLabel> labels;         // one per anchor
  std::vector<double> adaptive_thresholds; // one per gt, adaptive mode only
};

inline constexpr std::size_t kDefaultAdaptiveTopK = 9;

/// Threshold assignment on BEV IoU: POSITIVE at or above pos_thr, NEGATIVE
/// below neg_thr, IGNORED in between. Each gt additionally claims its best
/// overlapping anchor. Throws std::invalid_argument unless
/// 0 <= neg_thr <= pos_thr <= 1.
AssignmentResult fixed_assign(std::span<const Box3D> anchors, std::span<const Box3D> gts,
                              double pos_thr, double neg_thr);

/// Per-gt adaptive threshold: the k anchors nearest the gt center (BEV)
/// are candidates; the threshold is mean + population stddev of their
/// IoUs. A candidate is positive when it reaches the threshold and its
/// center lies inside the gt footprint. Anchors claimed by several gts go
/// to the highest-IoU gt. Everything else is NEGATIVE.
/// Throws std::invalid_argument for empty anchors or k == 0.
AssignmentResult adaptive_assign(std::span<const Box3D> anchors, std::span<const Box3D> gts,
                                 std::size_t k = kDefaultAdaptiveTopK);

}  // namespace lidarpost
