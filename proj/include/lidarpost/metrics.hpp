#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lidarpost/ensemble.hpp"
#include "lidarpost/geometry.hpp"

namespace lidarpost {

enum class DifficultyLevel { kL1, kL2 };

std::string_view to_string(DifficultyLevel level);
std::optional<DifficultyLevel> parse_difficulty_level(std::string_view name);

// Matching thresholds follow the usual evaluation convention.
struct EvalConfig {
  PerClass<double> match_iou{0.7, 0.5, 0.5};
  DifficultyLevel level = DifficultyLevel::kL1;
  IouKind iou_kind = IouKind::k3d;

  bool operator==(const EvalConfig&) const = default;
};

/// Heading accuracy in [0, 1]: 1 - |dtheta| / pi, floored at 0.
double heading_weight(double det_heading, double gt_heading);

struct DetectionOutcome {
  double score = 0.0;
  bool true_positive = false;
  std::optional<std::size_t> gt_index;
  double heading_weight = 0.0;  // 0 for false positives
};

struct MatchLedger {
  std::vector<DetectionOutcome> detections;  // input order
  std::vector<bool> gt_matched;
};

/// Greedy single-frame matching: detections by descending score (ties to
/// lower index) each claim the unmatched gt of highest IoU >= iou_thr.
MatchLedger match_frame(std::span<const Box3D> dets, std::span<const Box3D> gts, double iou_thr,
                        IouKind kind = IouKind::k3d);

struct PrPoint {
  double score = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double heading_precision = 0.0;
};

struct ApResult {
  double ap = 0.0;
  double aph = 0.0;
  std::vector<PrPoint> curve;  // one point per detection, descending score
};

/// All-point interpolated AP over every ledger. APH uses the same recall
/// axis with heading-weighted true positives in the precision numerator.
/// With no gts the result is 1 when there are also no detections, else 0.
ApResult average_precision(std::span<const MatchLedger> ledgers, std::size_t gt_count);

/// Explicit difficulty if present, else 2 for num_points <= 5, else 1.
int effective_difficulty(const Box3D& gt);

/// L1 keeps difficulty-1 boxes, L2 keeps all.
std::vector<Box3D> split_difficulty(std::span<const Box3D> gts, DifficultyLevel level);

/// Filters both sides to one class, applies the difficulty split to gts,
/// matches per frame and integrates. Frames pair by frame_id; a frame
/// present on one side only counts as empty on the other.
ApResult evaluate_detections(std::span<const DetectionSet> dets, std::span<const DetectionSet> gts,
                             Label label, const EvalConfig& cfg);

struct MotResult {
  std::optional<double> mota;  // empty when there are no gt boxes
  std::optional<double> motp;  // empty when nothing matched
  std::size_t false_positives = 0;
  std::size_t misses = 0;
  std::size_t id_switches = 0;
  std::size_t matches = 0;
  std::size_t total_gt = 0;
};

using BoxFrames = std::vector<std::vector<Box3D>>;

/// CLEAR-MOT accumulation over frame-aligned sequences of one class.
/// Correspondences from the previous frame are kept while their IoU stays
/// at or above iou_thr; the rest are resolved by Hungarian on 1 - IoU.
/// MOTP is the mean 1 - IoU over matches. Every box needs a track_id;
/// throws std::invalid_argument otherwise or when frame counts differ.
MotResult mota_motp(std::span<const std::vector<Box3D>> tracked,
                    std::span<const std::vector<Box3D>> gt, double iou_thr,
                    IouKind kind = IouKind::k3d);

}  // namespace lidarpost
