#include "lidarpost/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lidarpost/parallel.hpp"

namespace lidarpost {

namespace {

std::vector<std::size_t> score_order(std::span<const Box3D> boxes) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return boxes[l].score > boxes[r].score; });
  return order;
}

DetectionSet weighted(const DetectionSet& set, double w) {
  if (!(w > 0.0 && w <= 1.0)) throw std::invalid_argument("ensemble weight must be in (0, 1]");
  DetectionSet out = set;
  for (Box3D& b : out.boxes) b.score = std::clamp(b.score * w, 0.0, 1.0);
  return out;
}

}  // namespace

std::vector<std::size_t> nms(std::span<const Box3D> boxes, const PerClass<double>& iou_thr,
                             IouKind kind) {
  std::vector<std::size_t> kept;
  for (std::size_t i : score_order(boxes)) {
    const Box3D& candidate = boxes[i];
    const double thr = iou_thr[candidate.label];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return boxes[k].label == candidate.label && iou(boxes[k], candidate, kind) >= thr;
    });
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

std::vector<std::size_t> nms(std::span<const Box3D> boxes, double iou_thr, IouKind kind) {
  return nms(boxes, PerClass<double>::uniform(iou_thr), kind);
}

std::vector<Box3D> soft_nms(std::span<const Box3D> boxes, double sigma, double score_floor,
                            IouKind kind) {
  if (!(sigma > 0.0)) throw std::invalid_argument("soft_nms: sigma must be positive");
  if (!(score_floor >= 0.0 && score_floor < 1.0)) {
    throw std::invalid_argument("soft_nms: score_floor must be in [0, 1)");
  }
  struct Live {
    std::size_t index;
    Box3D box;
  };
  std::vector<Live> live;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (boxes[i].score >= score_floor) live.push_back({i, boxes[i]});
  }

  std::vector<Box3D> kept;
  while (!live.empty()) {
    auto top = live.begin();
    for (auto it = live.begin(); it != live.end(); ++it) {
      if (it->box.score > top->box.score ||
          (it->box.score == top->box.score && it->index < top->index)) {
        top = it;
      }
    }
    const Box3D picked = top->box;
    live.erase(top);
    kept.push_back(picked);
    for (Live& other : live) {
      if (other.box.label != picked.label) continue;
      const double overlap = iou(picked, other.box, kind);
      other.box.score *= std::exp(-(overlap * overlap) / sigma);
    }
    std::erase_if(live, [&](const Live& l) { return l.box.score < score_floor; });
  }
  return kept;
}

std::vector<Box3D> box_vote(std::span<const Box3D> nms_boxes, std::span<const Box3D> original_boxes,
                            double iou_thr, IouKind kind) {
  std::vector<Box3D> out;
  out.reserve(nms_boxes.size());
  for (const Box3D& kept : nms_boxes) {
    double sum[6] = {0, 0, 0, 0, 0, 0};
    std::size_t voters = 0;
    for (const Box3D& o : original_boxes) {
      if (o.label != kept.label || !(iou(o, kept, kind) > iou_thr)) continue;
      sum[0] += o.cx;
      sum[1] += o.cy;
      sum[2] += o.cz;
      sum[3] += o.width;
      sum[4] += o.length;
      sum[5] += o.height;
      ++voters;
    }
    Box3D voted = kept;
    if (voters > 0) {
      const double n = static_cast<double>(voters);
      voted.cx = sum[0] / n;
      voted.cy = sum[1] / n;
      voted.cz = sum[2] / n;
      voted.width = sum[3] / n;
      voted.length = sum[4] / n;
      voted.height = sum[5] / n;
    }
    out.push_back(voted);
  }
  return out;
}

DetectionSet merge_sources(std::span<const DetectionSet> sets) {
  DetectionSet out;
  if (sets.empty()) return out;
  out.frame_id = sets.front().frame_id;
  out.timestamp = sets.front().timestamp;
  out.source_id = sets.front().source_id;
  for (const DetectionSet& s : sets) {
    if (s.frame_id != out.frame_id) {
      throw std::invalid_argument("merge_sources: mixed frame ids '" + out.frame_id + "' and '" +
                                  s.frame_id + "'");
    }
    for (Box3D b : s.boxes) {
      if (!b.source_id) b.source_id = s.source_id;
      out.boxes.push_back(std::move(b));
    }
  }
  return out;
}

DetectionSet ensemble_pair(const DetectionSet& a, const DetectionSet& b, double w_a, double w_b,
                           const PerClass<double>& iou_thr, IouKind kind) {
  const DetectionSet sets[] = {weighted(a, w_a), weighted(b, w_b)};
  DetectionSet merged = merge_sources(sets);
  DetectionSet out;
  out.frame_id = merged.frame_id;
  out.timestamp = merged.timestamp;
  out.source_id = a.source_id;
  for (std::size_t i : nms(merged.boxes, iou_thr, kind)) out.boxes.push_back(merged.boxes[i]);
  return out;
}

DetectionSet ensemble_pair(const DetectionSet& a, const DetectionSet& b, double w_a, double w_b,
                           double iou_thr, IouKind kind) {
  return ensemble_pair(a, b, w_a, w_b, PerClass<double>::uniform(iou_thr), kind);
}

std::vector<DetectionSet> ensemble_pair(std::span<const DetectionSet> a,
                                        std::span<const DetectionSet> b, double w_a, double w_b,
                                        const PerClass<double>& iou_thr, IouKind kind) {
  if (a.size() != b.size()) throw std::invalid_argument("ensemble_pair: frame counts differ");
  std::vector<DetectionSet> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = ensemble_pair(a[i], b[i], w_a, w_b, iou_thr, kind);
  return out;
}

namespace {

GridSearchResult pick_best(std::span<const double> grid, std::vector<double> scores) {
  GridSearchResult result;
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  result.best_weight = grid[best];
  result.best_score = scores[best];
  result.scores = std::move(scores);
  return result;
}

}  // namespace

GridSearchResult grid_search_weight(const DetectionSet& fixed, const DetectionSet& candidate,
                                    std::span<const double> grid, const PerClass<double>& iou_thr,
                                    const SetScoreFn& score_fn, IouKind kind) {
  if (grid.empty()) throw std::invalid_argument("grid_search_weight: empty grid");
  std::vector<double> scores(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    scores[i] = score_fn(ensemble_pair(fixed, candidate, 1.0, grid[i], iou_thr, kind));
  });
  return pick_best(grid, std::move(scores));
}

GridSearchResult grid_search_weight(std::span<const DetectionSet> fixed,
                                    std::span<const DetectionSet> candidate,
                                    std::span<const double> grid, const PerClass<double>& iou_thr,
                                    const FramesScoreFn& score_fn, IouKind kind) {
  if (grid.empty()) throw std::invalid_argument("grid_search_weight: empty grid");
  std::vector<double> scores(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const auto frames = ensemble_pair(fixed, candidate, 1.0, grid[i], iou_thr, kind);
    scores[i] = score_fn(frames);
  });
  return pick_best(grid, std::move(scores));
}

}  // namespace lidarpost
