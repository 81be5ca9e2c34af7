#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "lidarpost/ensemble.hpp"
#include "lidarpost/metrics.hpp"
#include "oracles.hpp"

namespace lidarpost {
namespace {

Box3D box_at(double cx, double score, Label label = Label::kVehicle) {
  Box3D b;
  b.cx = cx;
  b.length = 2;
  b.width = 2;
  b.height = 2;
  b.score = score;
  b.label = label;
  return b;
}

// Offset giving BEV IoU v between two 2x2 squares.
double offset_for_iou(double v) { return 2.0 * (1.0 - v) / (1.0 + v); }

std::vector<Box3D> random_frame(std::mt19937_64& rng, std::size_t n) {
  std::vector<Box3D> out;
  std::uniform_int_distribution<int> lab(0, 2);
  for (std::size_t i = 0; i < n; ++i) out.push_back(oracle::random_box(rng, 4.0, kAllLabels[lab(rng)]));
  return out;
}

TEST(Nms, Examples) {
  const std::vector<Box3D> single{box_at(0, 0.5)};
  EXPECT_EQ(nms(single, 0.7), std::vector<std::size_t>{0});

  const std::vector<Box3D> abc{box_at(0, 0.9), box_at(offset_for_iou(0.8), 0.8), box_at(50, 0.5)};
  EXPECT_EQ(nms(abc, 0.7), (std::vector<std::size_t>{0, 2}));

  const std::vector<Box3D> mixed{box_at(0, 0.9), box_at(0.1, 0.8, Label::kPedestrian)};
  EXPECT_EQ(nms(mixed, 0.5).size(), 2u);
  EXPECT_TRUE(nms(std::vector<Box3D>{}, 0.5).empty());
}

TEST(Nms, ThresholdIsInclusive) {
  const std::vector<Box3D> pair{box_at(0, 0.9), box_at(offset_for_iou(0.5), 0.8)};
  const double v = bev_iou(pair[0], pair[1]);
  EXPECT_EQ(nms(pair, v).size(), 1u);
  EXPECT_EQ(nms(pair, std::nextafter(v, 1.0)).size(), 2u);
}

TEST(Nms, PerClassThresholds) {
  const double d = offset_for_iou(0.6);
  const std::vector<Box3D> boxes{box_at(0, 0.9), box_at(d, 0.8), box_at(0, 0.9, Label::kCyclist),
                                 box_at(d, 0.8, Label::kCyclist)};
  const auto kept = nms(boxes, PerClass<double>{0.7, 0.5, 0.5});
  EXPECT_EQ(kept, (std::vector<std::size_t>{0, 2, 1}));
}

TEST(Nms, MatchesReferenceAndInvariants) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const auto boxes = random_frame(rng, rng() % 25);
    const double thr = 0.1 + 0.8 * std::uniform_real_distribution<double>()(rng);
    const auto kept = nms(boxes, thr);
    EXPECT_EQ(kept, oracle::reference_nms(boxes, thr));
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        if (boxes[kept[i]].label == boxes[kept[j]].label) {
          EXPECT_LT(bev_iou(boxes[kept[i]], boxes[kept[j]]), thr);
        }
      }
    }
    // Idempotent.
    std::vector<Box3D> survivors;
    for (auto k : kept) survivors.push_back(boxes[k]);
    EXPECT_EQ(nms(survivors, thr).size(), survivors.size());
  }
}

TEST(SoftNms, Examples) {
  const std::vector<Box3D> disjoint{box_at(0, 0.9), box_at(10, 0.6)};
  const auto a = soft_nms(disjoint, 0.5, 0.001);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[1].score, 0.6);

  const std::vector<Box3D> overlapping{box_at(0, 0.95), box_at(offset_for_iou(0.8), 0.9)};
  const auto b = soft_nms(overlapping, 0.5, 0.001);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_NEAR(b[1].score, 0.9 * std::exp(-1.28), 1e-9);
  EXPECT_NEAR(b[1].score, 0.25024, 1e-5);

  const auto c = soft_nms(std::vector<Box3D>{box_at(0, 0.3)}, 0.5, 0.001);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].score, 0.3);
}

TEST(SoftNms, ScoresNeverIncreaseAndStaySorted) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const auto boxes = random_frame(rng, rng() % 20);
    const auto out = soft_nms(boxes, 0.5, 0.001);
    for (std::size_t i = 1; i < out.size(); ++i) EXPECT_GE(out[i - 1].score, out[i].score);
    for (const auto& o : out) {
      EXPECT_GE(o.score, 0.001);
      const auto it = std::find_if(boxes.begin(), boxes.end(), [&](const Box3D& b) { return b.cx == o.cx && b.cy == o.cy; });
      ASSERT_NE(it, boxes.end());
      EXPECT_LE(o.score, it->score);
    }
  }
}

TEST(SoftNms, TinySigmaActsLikeHardNms) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    auto boxes = random_frame(rng, rng() % 20);
    for (auto& b : boxes) b.score = 0.05 + 0.95 * b.score;
    const auto hard = nms(boxes, 1e-2);
    bool ambiguous = false;
    for (std::size_t i = 0; i < boxes.size(); ++i)
      for (std::size_t j = i + 1; j < boxes.size(); ++j) {
        const double v = bev_iou(boxes[i], boxes[j]);
        ambiguous |= boxes[i].label == boxes[j].label && v > 0 && v < 1e-2;
      }
    if (ambiguous) continue;
    const auto soft = soft_nms(boxes, 1e-6, 1e-3);
    ASSERT_EQ(soft.size(), hard.size());
    for (std::size_t i = 0; i < hard.size(); ++i) EXPECT_EQ(soft[i], boxes[hard[i]]);
  }
}

TEST(Vote, TwoElementMean) {
  Box3D kept = box_at(1.0, 0.9);
  kept.heading = 0.3;
  Box3D other = box_at(2.0, 0.5);
  other.heading = 0.3 - kPi;  // same footprint, opposite direction
  const std::vector<Box3D> nms_boxes{kept};
  const std::vector<Box3D> pool{kept, other};
  const auto out = box_vote(nms_boxes, pool, 0.2);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].cx, 1.5);
  EXPECT_EQ(out[0].heading, 0.3);
  EXPECT_EQ(out[0].score, 0.9);
}

TEST(Vote, SelfOnlyAndPassThrough) {
  Box3D kept = box_at(1.0, 0.9);
  kept.length = 3.7;
  const std::vector<Box3D> nms_boxes{kept};
  EXPECT_EQ(box_vote(nms_boxes, nms_boxes, 0.5)[0], kept);
  const std::vector<Box3D> far{box_at(30, 0.4)};
  EXPECT_EQ(box_vote(nms_boxes, far, 0.99)[0], kept);
}

TEST(Vote, ThresholdIsStrictAndClassWise) {
  const Box3D kept = box_at(0, 0.9);
  const Box3D peer = box_at(offset_for_iou(0.5), 0.7);
  const Box3D ped = box_at(0.1, 0.7, Label::kPedestrian);
  const double v = bev_iou(kept, peer);
  const std::vector<Box3D> nms_boxes{kept};
  const std::vector<Box3D> pool{kept, peer, ped};
  EXPECT_EQ(box_vote(nms_boxes, pool, v)[0].cx, 0.0);
  EXPECT_NEAR(box_vote(nms_boxes, pool, std::nextafter(v, 0.0))[0].cx, peer.cx / 2, 1e-15);
}

TEST(Merge, Examples) {
  DetectionSet a{"f", 0, 0, {box_at(0, 0.5)}}, b{"f", 0, 1, {box_at(5, 0.4)}}, empty{"f", 0, 2, {}};
  std::vector<DetectionSet> sets{a, b};
  auto m = merge_sources(sets);
  ASSERT_EQ(m.boxes.size(), 2u);
  EXPECT_EQ(m.boxes[0].source_id, 0);
  EXPECT_EQ(m.boxes[1].source_id, 1);
  sets = {a, empty};
  EXPECT_EQ(merge_sources(sets).boxes.size(), 1u);

  DetectionSet s0{"f", 0, 0, {box_at(0, .1), box_at(1, .2)}}, s2{"f", 0, 2, {box_at(2, .1), box_at(3, .1), box_at(4, .1)}};
  sets = {s0, empty, s2};
  m = merge_sources(sets);
  ASSERT_EQ(m.boxes.size(), 5u);
  const std::vector<int> want{0, 0, 2, 2, 2};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(m.boxes[i].source_id, want[i]);

  DetectionSet other{"g", 0, 1, {}};
  sets = {a, other};
  EXPECT_THROW(merge_sources(sets), std::invalid_argument);
}

TEST(EnsemblePair, Examples) {
  DetectionSet a{"f", 0, 0, {box_at(0, 0.8)}}, b{"f", 0, 1, {box_at(10, 0.8)}};
  auto u = ensemble_pair(a, b, 1.0, 1.0, 0.7);
  EXPECT_EQ(u.boxes.size(), 2u);

  auto scaled = ensemble_pair(a, DetectionSet{"f", 0, 1, {}}, 0.5, 1.0, 0.7);
  ASSERT_EQ(scaled.boxes.size(), 1u);
  EXPECT_DOUBLE_EQ(scaled.boxes[0].score, 0.4);

  DetectionSet dup{"f", 0, 1, {box_at(0, 0.8)}};
  auto d = ensemble_pair(a, dup, 1.0, 0.6, 0.7);
  ASSERT_EQ(d.boxes.size(), 1u);
  EXPECT_EQ(d.boxes[0].score, 0.8);
  EXPECT_EQ(d.boxes[0].source_id, 0);

  EXPECT_THROW(ensemble_pair(a, b, 0.0, 1.0, 0.7), std::invalid_argument);
  EXPECT_THROW(ensemble_pair(a, b, 1.0, 1.5, 0.7), std::invalid_argument);
}

TEST(GridSearch, SingletonAndTies) {
  DetectionSet a{"f", 0, 0, {box_at(0, 0.8)}}, b{"f", 0, 1, {box_at(10, 0.8)}};
  const std::vector<double> one{1.0};
  auto r = grid_search_weight(a, b, one, PerClass<double>::uniform(0.7), [](const DetectionSet&) { return 0.3; });
  EXPECT_EQ(r.best_weight, 1.0);
  const std::vector<double> grid{0.4, 0.2, 0.9};
  r = grid_search_weight(a, b, grid, PerClass<double>::uniform(0.7), [](const DetectionSet&) { return 0.3; });
  EXPECT_EQ(r.best_weight, 0.4);
  EXPECT_EQ(r.scores.size(), 3u);
  EXPECT_THROW(grid_search_weight(a, b, std::vector<double>{}, PerClass<double>::uniform(0.7),
                                  [](const DetectionSet&) { return 0.0; }),
               std::invalid_argument);
}

TEST(GridSearch, FalsePositiveCandidatePrefersLowestWeight) {
  std::vector<Box3D> gt, fixed_boxes, fp_boxes;
  for (int i = 0; i < 6; ++i) {
    gt.push_back(box_at(10.0 * i, 1.0));
    fixed_boxes.push_back(box_at(10.0 * i, 0.3 + 0.05 * i));
  }
  for (int i = 0; i < 4; ++i) fp_boxes.push_back(box_at(200.0 + 10 * i, 0.9 - 0.1 * i));
  const DetectionSet fixed{"f", 0, 0, fixed_boxes}, candidate{"f", 0, 1, fp_boxes};
  auto score = [&](const DetectionSet& s) {
    const std::vector<MatchLedger> ledger{match_frame(s.boxes, gt, 0.5)};
    return average_precision(ledger, gt.size()).ap;
  };
  const EnsembleConfig cfg;
  const auto r = grid_search_weight(fixed, candidate, cfg.weight_grid, cfg.nms_iou, score);
  double best = -1, arg = 0;
  for (std::size_t i = 0; i < cfg.weight_grid.size(); ++i) {
    const double s = score(ensemble_pair(fixed, candidate, 1.0, cfg.weight_grid[i], cfg.nms_iou));
    EXPECT_EQ(r.scores[i], s);
    if (s > best) best = s, arg = cfg.weight_grid[i];
  }
  EXPECT_EQ(r.best_weight, arg);
  EXPECT_EQ(r.best_weight, 0.1);
}

}  // namespace
}  // namespace lidarpost
