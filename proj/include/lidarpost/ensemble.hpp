#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lidarpost/geometry.hpp"

namespace lidarpost {

/// Detections of one frame, as produced by one detector or a merge of
/// several. The originating detector of each box is kept in Box3D::source_id.
struct DetectionSet {
  std::string frame_id;
  double timestamp = 0.0;
  int source_id = 0;
  std::vector<Box3D> boxes;
};

// Defaults below are conventional values, not taken from any result.
struct EnsembleConfig {
  PerClass<double> nms_iou{0.7, 0.5, 0.5};
  double vote_iou = 0.55;
  double soft_sigma = 0.5;
  double soft_score_floor = 0.001;
  IouKind iou_kind = IouKind::kBev;
  std::vector<double> weight_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double min_improvement = 0.001;

  bool operator==(const EnsembleConfig&) const = default;
};

/// Class-wise greedy NMS. Boxes are visited by descending score (ties to
/// the lower index); a box survives iff its IoU with every kept box of its
/// label is below that label's threshold. Returns kept indices in keep order.
std::vector<std::size_t> nms(std::span<const Box3D> boxes, const PerClass<double>& iou_thr,
                             IouKind kind = IouKind::kBev);
std::vector<std::size_t> nms(std::span<const Box3D> boxes, double iou_thr,
                             IouKind kind = IouKind::kBev);

/// Gaussian soft-NMS: s <- s * exp(-IoU^2 / sigma) against each picked box
/// of the same label. Boxes whose score drops below score_floor are
/// discarded. Returns survivors with their final scores, highest first.
std::vector<Box3D> soft_nms(std::span<const Box3D> boxes, double sigma, double score_floor,
                            IouKind kind = IouKind::kBev);

/// Box voting. For each kept box, the same-label pre-suppression boxes
/// whose IoU with it exceeds iou_thr are averaged (unweighted) into its
/// x, y, z, l, w, h. Heading, score and every other field of the kept box
/// are left alone. A kept box with no voters passes through.
std::vector<Box3D> box_vote(std::span<const Box3D> nms_boxes, std::span<const Box3D> original_boxes,
                            double iou_thr, IouKind kind = IouKind::kBev);

/// Concatenation in source order. Boxes without a source tag inherit their
/// set's source_id. Throws std::invalid_argument on mixed frame ids.
DetectionSet merge_sources(std::span<const DetectionSet> sets);

/// One greedy-ensemble step: weight each side's scores (clamped to [0, 1]),
/// merge and suppress. The result can be fed back in as a detector.
DetectionSet ensemble_pair(const DetectionSet& a, const DetectionSet& b, double w_a, double w_b,
                           const PerClass<double>& iou_thr, IouKind kind = IouKind::kBev);
DetectionSet ensemble_pair(const DetectionSet& a, const DetectionSet& b, double w_a, double w_b,
                           double iou_thr, IouKind kind = IouKind::kBev);

/// Multi-frame form: frames are paired by position and must share ids.
std::vector<DetectionSet> ensemble_pair(std::span<const DetectionSet> a,
                                        std::span<const DetectionSet> b, double w_a, double w_b,
                                        const PerClass<double>& iou_thr,
                                        IouKind kind = IouKind::kBev);

struct GridSearchResult {
  double best_weight = 0.0;
  double best_score = 0.0;
  std::vector<double> scores;  // one per grid entry
};

using SetScoreFn = std::function<double(const DetectionSet&)>;
using FramesScoreFn = std::function<double(std::span<const DetectionSet>)>;

/// Scores ensemble_pair(fixed, candidate, 1, w) for every w in the grid and
/// returns the best (ties to the earliest entry). Throws on an empty grid.
GridSearchResult grid_search_weight(const DetectionSet& fixed, const DetectionSet& candidate,
                                    std::span<const double> grid, const PerClass<double>& iou_thr,
                                    const SetScoreFn& score_fn, IouKind kind = IouKind::kBev);
GridSearchResult grid_search_weight(std::span<const DetectionSet> fixed,
                                    std::span<const DetectionSet> candidate,
                                    std::span<const double> grid, const PerClass<double>& iou_thr,
                                    const FramesScoreFn& score_fn, IouKind kind = IouKind::kBev);

}  // namespace lidarpost
