#include "lidarpost/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "lidarpost/hungarian.hpp"

namespace lidarpost {

std::string_view to_string(DifficultyLevel level) { return level == DifficultyLevel::kL1 ? "L1" : "L2"; }

std::optional<DifficultyLevel> parse_difficulty_level(std::string_view name) {
  if (name == "L1") return DifficultyLevel::kL1;
  if (name == "L2") return DifficultyLevel::kL2;
  return std::nullopt;
}

double heading_weight(double det_heading, double gt_heading) {
  return std::max(0.0, 1.0 - heading_error(det_heading, gt_heading) / kPi);
}

MatchLedger match_frame(std::span<const Box3D> dets, std::span<const Box3D> gts, double iou_thr,
                        IouKind kind) {
  MatchLedger ledger;
  ledger.detections.resize(dets.size());
  ledger.gt_matched.assign(gts.size(), false);

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return dets[l].score > dets[r].score; });

  for (std::size_t d : order) {
    DetectionOutcome& out = ledger.detections[d];
    out.score = dets[d].score;
    std::optional<std::size_t> best;
    double best_iou = iou_thr;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (ledger.gt_matched[g]) continue;
      const double overlap = iou(dets[d], gts[g], kind);
      if (overlap >= best_iou && (!best || overlap > best_iou)) {
        best = g;
        best_iou = overlap;
      }
    }
    if (best) {
      ledger.gt_matched[*best] = true;
      out.true_positive = true;
      out.gt_index = best;
      out.heading_weight = heading_weight(dets[d].heading, gts[*best].heading);
    }
  }
  return ledger;
}

ApResult average_precision(std::span<const MatchLedger> ledgers, std::size_t gt_count) {
  std::vector<const DetectionOutcome*> all;
  for (const MatchLedger& l : ledgers) {
    for (const DetectionOutcome& d : l.detections) all.push_back(&d);
  }
  ApResult result;
  if (gt_count == 0) {
    result.ap = result.aph = all.empty() ? 1.0 : 0.0;
    return result;
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const DetectionOutcome* l, const DetectionOutcome* r) { return l->score > r->score; });

  double tp = 0.0;
  double weighted_tp = 0.0;
  const double total = static_cast<double>(gt_count);
  result.curve.reserve(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i]->true_positive) {
      tp += 1.0;
      weighted_tp += all[i]->heading_weight;
    }
    const double seen = static_cast<double>(i + 1);
    const double precision = tp / seen;
    result.curve.push_back({all[i]->score, tp / total, precision, std::min(weighted_tp / seen, precision)});
  }

  // Right-to-left running maxima give the interpolated envelope.
  double env = 0.0;
  double env_h = 0.0;
  std::vector<double> envelope(result.curve.size()), envelope_h(result.curve.size());
  for (std::size_t i = result.curve.size(); i-- > 0;) {
    env = std::max(env, result.curve[i].precision);
    env_h = std::max(env_h, result.curve[i].heading_precision);
    envelope[i] = env;
    envelope_h[i] = env_h;
  }
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < result.curve.size(); ++i) {
    const double step = result.curve[i].recall - prev_recall;
    result.ap += step * envelope[i];
    result.aph += step * envelope_h[i];
    prev_recall = result.curve[i].recall;
  }
  return result;
}

int effective_difficulty(const Box3D& gt) {
  if (gt.difficulty) return *gt.difficulty;
  if (gt.num_points) return *gt.num_points <= 5 ? 2 : 1;
  return 1;
}

std::vector<Box3D> split_difficulty(std::span<const Box3D> gts, DifficultyLevel level) {
  std::vector<Box3D> out;
  for (const Box3D& g : gts) {
    if (level == DifficultyLevel::kL2 || effective_difficulty(g) == 1) out.push_back(g);
  }
  return out;
}

ApResult evaluate_detections(std::span<const DetectionSet> dets, std::span<const DetectionSet> gts,
                             Label label, const EvalConfig& cfg) {
  std::map<std::string, const DetectionSet*> det_by_frame;
  for (const DetectionSet& d : dets) det_by_frame.emplace(d.frame_id, &d);

  const auto of_class = [label](std::span<const Box3D> boxes) {
    std::vector<Box3D> out;
    for (const Box3D& b : boxes) {
      if (b.label == label) out.push_back(b);
    }
    return out;
  };

  std::vector<MatchLedger> ledgers;
  std::size_t gt_count = 0;
  std::set<std::string> seen;
  for (const DetectionSet& g : gts) {
    const auto frame_gts = split_difficulty(of_class(g.boxes), cfg.level);
    gt_count += frame_gts.size();
    std::vector<Box3D> frame_dets;
    if (auto it = det_by_frame.find(g.frame_id); it != det_by_frame.end()) {
      frame_dets = of_class(it->second->boxes);
    }
    seen.insert(g.frame_id);
    ledgers.push_back(match_frame(frame_dets, frame_gts, cfg.match_iou[label], cfg.iou_kind));
  }
  for (const DetectionSet& d : dets) {
    if (seen.count(d.frame_id)) continue;
    ledgers.push_back(match_frame(of_class(d.boxes), {}, cfg.match_iou[label], cfg.iou_kind));
  }
  return average_precision(ledgers, gt_count);
}

namespace {

std::int64_t require_id(const Box3D& b, const char* side) {
  if (!b.track_id) throw std::invalid_argument(std::string("mota_motp: ") + side + " box without track_id");
  return *b.track_id;
}

}  // namespace

MotResult mota_motp(std::span<const std::vector<Box3D>> tracked,
                    std::span<const std::vector<Box3D>> gt, double iou_thr, IouKind kind) {
  if (tracked.size() != gt.size()) throw std::invalid_argument("mota_motp: frame counts differ");
  MotResult result;
  double dissimilarity = 0.0;
  std::unordered_map<std::int64_t, std::int64_t> previous;   // gt id -> hyp id, last frame
  std::unordered_map<std::int64_t, std::int64_t> last_seen;  // gt id -> most recent hyp id

  for (std::size_t f = 0; f < gt.size(); ++f) {
    const auto& gts = gt[f];
    const auto& hyps = tracked[f];
    result.total_gt += gts.size();

    std::vector<std::optional<std::size_t>> gt_to_hyp(gts.size());
    std::vector<bool> hyp_taken(hyps.size(), false);
    std::vector<double> overlap_of(gts.size(), 0.0);

    std::unordered_map<std::int64_t, std::size_t> hyp_index;
    for (std::size_t h = 0; h < hyps.size(); ++h) hyp_index.emplace(require_id(hyps[h], "tracked"), h);

    for (std::size_t g = 0; g < gts.size(); ++g) {
      auto prev = previous.find(require_id(gts[g], "ground-truth"));
      if (prev == previous.end()) continue;
      auto h = hyp_index.find(prev->second);
      if (h == hyp_index.end() || hyp_taken[h->second]) continue;
      const double overlap = iou(gts[g], hyps[h->second], kind);
      if (overlap < iou_thr) continue;
      gt_to_hyp[g] = h->second;
      hyp_taken[h->second] = true;
      overlap_of[g] = overlap;
    }

    std::vector<std::size_t> free_gts, free_hyps;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (!gt_to_hyp[g]) free_gts.push_back(g);
    }
    for (std::size_t h = 0; h < hyps.size(); ++h) {
      if (!hyp_taken[h]) free_hyps.push_back(h);
    }
    if (!free_gts.empty() && !free_hyps.empty()) {
      // Gated pairs cost more than any set of admissible pairs can save.
      const double blocked = static_cast<double>(free_gts.size() + free_hyps.size() + 1);
      CostMatrix cost(free_gts.size(), std::vector<double>(free_hyps.size(), blocked));
      CostMatrix overlap(free_gts.size(), std::vector<double>(free_hyps.size(), 0.0));
      for (std::size_t a = 0; a < free_gts.size(); ++a) {
        for (std::size_t b = 0; b < free_hyps.size(); ++b) {
          overlap[a][b] = iou(gts[free_gts[a]], hyps[free_hyps[b]], kind);
          if (overlap[a][b] >= iou_thr) cost[a][b] = 1.0 - overlap[a][b];
        }
      }
      for (auto [a, b] : hungarian(cost).pairs) {
        if (overlap[a][b] < iou_thr) continue;
        gt_to_hyp[free_gts[a]] = free_hyps[b];
        hyp_taken[free_hyps[b]] = true;
        overlap_of[free_gts[a]] = overlap[a][b];
      }
    }

    previous.clear();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (!gt_to_hyp[g]) {
        ++result.misses;
        continue;
      }
      const std::int64_t gid = *gts[g].track_id;
      const std::int64_t hid = *hyps[*gt_to_hyp[g]].track_id;
      if (auto it = last_seen.find(gid); it != last_seen.end() && it->second != hid) ++result.id_switches;
      last_seen[gid] = hid;
      previous[gid] = hid;
      ++result.matches;
      dissimilarity += 1.0 - overlap_of[g];
    }
    for (bool taken : hyp_taken) {
      if (!taken) ++result.false_positives;
    }
  }

  if (result.total_gt > 0) {
    const double errors = static_cast<double>(result.misses + result.false_positives + result.id_switches);
    result.mota = 1.0 - errors / static_cast<double>(result.total_gt);
  }
  if (result.matches > 0) result.motp = dissimilarity / static_cast<double>(result.matches);
  return result;
}

}  // namespace lidarpost
