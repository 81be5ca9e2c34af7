#include "lidarpost/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lidarpost/assigner.hpp"
#include "lidarpost/config.hpp"
#include "lidarpost/ensemble.hpp"
#include "lidarpost/io.hpp"
#include "lidarpost/metrics.hpp"
#include "lidarpost/parallel.hpp"
#include "lidarpost/pointcloud.hpp"
#include "lidarpost/tracker.hpp"
#include "lidarpost/voxelizer.hpp"

namespace lidarpost {

namespace {

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::string output;
  std::string class_name;
  std::uint64_t seed = 0;
};

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

class Summary {
 public:
  explicit Summary(std::string command) : start_(std::chrono::steady_clock::now()) {
    line_ << "command=" << command;
  }
  template <class T>
  Summary& add(const std::string& key, const T& value) {
    line_ << ' ' << key << '=' << value;
    return *this;
  }
  void print(std::ostream& out) {
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    out << line_.str() << " elapsed_ms=" << fixed6(ms) << '\n';
  }

 private:
  std::ostringstream line_;
  std::chrono::steady_clock::time_point start_;
};

Config resolve_config(const Common& common) {
  return common.config_path.empty() ? Config{} : load_config(common.config_path);
}

std::optional<Label> class_filter(const Common& common) {
  if (common.class_name.empty()) return std::nullopt;
  auto label = parse_label(common.class_name);
  if (!label) throw UsageError("unknown --class '" + common.class_name + "'");
  return label;
}

std::vector<DetectionSet> load_frames(const std::string& path, std::optional<Label> only) {
  auto frames = read_boxes(path).ordered();
  if (only) {
    for (DetectionSet& f : frames) std::erase_if(f.boxes, [&](const Box3D& b) { return b.label != *only; });
  }
  return frames;
}

std::size_t box_count(std::span<const DetectionSet> frames) {
  std::size_t n = 0;
  for (const auto& f : frames) n += f.boxes.size();
  return n;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoError::Kind::kIo, "cannot write '" + path + "'");
  return out;
}

// Union of frames across inputs, ordered by timestamp then first appearance.
// Inputs missing a frame contribute an empty set for it.
std::vector<std::vector<DetectionSet>> align_frames(const std::vector<std::vector<DetectionSet>>& inputs) {
  struct Slot {
    std::string id;
    double timestamp;
  };
  std::vector<Slot> slots;
  std::set<std::string> known;
  for (const auto& input : inputs) {
    for (const auto& f : input) {
      if (known.insert(f.frame_id).second) slots.push_back({f.frame_id, f.timestamp});
    }
  }
  std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) { return a.timestamp < b.timestamp; });

  std::vector<std::vector<DetectionSet>> aligned;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    std::map<std::string, const DetectionSet*> by_id;
    for (const auto& f : inputs[s]) by_id.emplace(f.frame_id, &f);
    std::vector<DetectionSet> column;
    for (const Slot& slot : slots) {
      auto it = by_id.find(slot.id);
      DetectionSet f = it != by_id.end() ? *it->second : DetectionSet{slot.id, slot.timestamp, 0, {}};
      f.source_id = static_cast<int>(s);
      column.push_back(std::move(f));
    }
    aligned.push_back(std::move(column));
  }
  return aligned;
}

std::vector<DetectionSet> map_frames(std::span<const DetectionSet> frames,
                                     const std::function<std::vector<Box3D>(const DetectionSet&)>& fn) {
  std::vector<DetectionSet> out(frames.size());
  parallel_for(frames.size(), [&](std::size_t i) {
    out[i] = frames[i];
    out[i].boxes = fn(frames[i]);
  });
  return out;
}

std::vector<Box3D> apply_nms(const DetectionSet& f, const PerClass<double>& thr, IouKind kind) {
  std::vector<Box3D> kept;
  for (std::size_t i : nms(f.boxes, thr, kind)) kept.push_back(f.boxes[i]);
  return kept;
}

// ---------------------------------------------------------------------------

struct ConcatArgs {
  std::string current, previous;
  int channels = 4;
  std::optional<double> delta;
  bool crop = false;
  bool augment = false;
};

int cmd_concat(const Common& common, const ConcatArgs& a, std::ostream& out) {
  Summary summary("concat");
  const Config cfg = resolve_config(common);
  const PointCloud current = read_points(a.current, a.channels);
  const PointCloud previous = read_points(a.previous, a.channels);
  PointCloud merged = concat_frames(current, previous, a.delta.value_or(cfg.frame_delta));
  if (a.crop) merged = crop_range(merged, cfg.range);
  summary.add("current_points", current.points.size()).add("previous_points", previous.points.size());
  if (a.augment) {
    const AugmentationParams params = sample_augmentation(common.seed);
    merged = apply_augmentation(Scene{std::move(merged), {}}, params).cloud;
    summary.add("seed", common.seed)
        .add("flip_x", params.flip_x)
        .add("flip_y", params.flip_y)
        .add("scale", fixed6(params.scale))
        .add("angle", fixed6(params.angle));
  }
  write_points(common.output, merged, 5);
  summary.add("output_points", merged.points.size()).print(out);
  return kExitOk;
}

struct VoxelizeArgs {
  std::string input;
  int channels = 4;
  std::string mode = "dynamic";
};

int cmd_voxelize(const Common& common, const VoxelizeArgs& a, std::ostream& out) {
  Summary summary("voxelize");
  const Config cfg = resolve_config(common);
  const PointCloud cloud = read_points(a.input, a.channels);
  const VoxelGrid grid = a.mode == "hard" ? voxelize_hard(cloud, cfg.voxel) : voxelize_dynamic(cloud, cfg.voxel);
  auto file = open_output(common.output);
  for (const Voxel& v : grid.voxels) {
    nlohmann::ordered_json rec;
    rec["ix"] = v.key.ix;
    rec["iy"] = v.key.iy;
    rec["iz"] = v.key.iz;
    rec["count"] = v.count();
    rec["mean"] = v.mean;
    file << rec.dump() << '\n';
  }
  summary.add("mode", a.mode)
      .add("input_points", cloud.points.size())
      .add("voxels", grid.voxels.size())
      .add("stored_points", grid.stored_points())
      .add("out_of_range", grid.out_of_range)
      .add("dropped_points", grid.dropped_points)
      .add("dropped_voxels", grid.dropped_voxels)
      .print(out);
  return kExitOk;
}

struct AssignArgs {
  std::string anchors, gts;
  std::string mode = "adaptive";
};

int cmd_assign(const Common& common, const AssignArgs& a, std::ostream& out) {
  Summary summary("assign");
  const Config cfg = resolve_config(common);
  const auto only = class_filter(common);
  const auto anchor_frames = load_frames(a.anchors, std::nullopt);
  std::map<std::string, DetectionSet> gt_by_frame;
  for (auto& f : load_frames(a.gts, only)) gt_by_frame.emplace(f.frame_id, std::move(f));

  auto file = open_output(common.output);
  std::size_t positives = 0, negatives = 0, ignored = 0;
  for (const DetectionSet& frame : anchor_frames) {
    std::vector<Box3D> gts;
    if (auto it = gt_by_frame.find(frame.frame_id); it != gt_by_frame.end()) gts = it->second.boxes;
    const AssignmentResult r = a.mode == "fixed"
                                   ? fixed_assign(frame.boxes, gts, cfg.assigner.pos_iou, cfg.assigner.neg_iou)
                                   : adaptive_assign(frame.boxes, gts, cfg.assigner.top_k);
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
      const AnchorLabel& l = r.labels[i];
      nlohmann::ordered_json rec;
      rec["frame_id"] = frame.frame_id;
      rec["anchor"] = i;
      rec["label"] = std::string(to_string(l.kind));
      rec["gt"] = l.gt_index ? nlohmann::ordered_json(*l.gt_index) : nlohmann::ordered_json(nullptr);
      if (l.gt_index && !r.adaptive_thresholds.empty()) rec["threshold"] = r.adaptive_thresholds[*l.gt_index];
      file << rec.dump() << '\n';
      if (l.kind == AnchorLabelKind::kPositive) ++positives;
      else if (l.kind == AnchorLabelKind::kNegative) ++negatives;
      else ++ignored;
    }
  }
  summary.add("mode", a.mode)
      .add("frames", anchor_frames.size())
      .add("positive", positives)
      .add("negative", negatives)
      .add("ignored", ignored)
      .print(out);
  return kExitOk;
}

struct NmsArgs {
  std::string input;
  std::optional<double> iou;
};

int cmd_nms(const Common& common, const NmsArgs& a, std::ostream& out) {
  Summary summary("nms");
  const Config cfg = resolve_config(common);
  const auto frames = load_frames(a.input, class_filter(common));
  const PerClass<double> thr = a.iou ? PerClass<double>::uniform(*a.iou) : cfg.ensemble.nms_iou;
  const auto kept = map_frames(frames, [&](const DetectionSet& f) { return apply_nms(f, thr, cfg.ensemble.iou_kind); });
  write_boxes(common.output, kept);
  summary.add("frames", frames.size()).add("input_boxes", box_count(frames)).add("output_boxes", box_count(kept)).print(out);
  return kExitOk;
}

struct SoftNmsArgs {
  std::string input;
  std::optional<double> sigma, floor;
};

int cmd_soft_nms(const Common& common, const SoftNmsArgs& a, std::ostream& out) {
  Summary summary("soft-nms");
  const Config cfg = resolve_config(common);
  const auto frames = load_frames(a.input, class_filter(common));
  const double sigma = a.sigma.value_or(cfg.ensemble.soft_sigma);
  const double floor = a.floor.value_or(cfg.ensemble.soft_score_floor);
  const auto kept = map_frames(
      frames, [&](const DetectionSet& f) { return soft_nms(f.boxes, sigma, floor, cfg.ensemble.iou_kind); });
  write_boxes(common.output, kept);
  summary.add("frames", frames.size()).add("input_boxes", box_count(frames)).add("output_boxes", box_count(kept)).print(out);
  return kExitOk;
}

struct VoteArgs {
  std::string nms_input, original;
  std::optional<double> iou;
};

int cmd_vote(const Common& common, const VoteArgs& a, std::ostream& out) {
  Summary summary("vote");
  const Config cfg = resolve_config(common);
  const auto only = class_filter(common);
  const auto kept = load_frames(a.nms_input, only);
  std::map<std::string, DetectionSet> pool;
  for (auto& f : load_frames(a.original, only)) pool.emplace(f.frame_id, std::move(f));
  const double thr = a.iou.value_or(cfg.ensemble.vote_iou);
  const auto voted = map_frames(kept, [&](const DetectionSet& f) {
    auto it = pool.find(f.frame_id);
    if (it == pool.end()) return f.boxes;
    return box_vote(f.boxes, it->second.boxes, thr, cfg.ensemble.iou_kind);
  });
  write_boxes(common.output, voted);
  summary.add("frames", kept.size()).add("boxes", box_count(voted)).print(out);
  return kExitOk;
}

struct EnsembleArgs {
  std::vector<std::string> inputs;
  std::vector<double> weights;
  std::string gt;
  bool vote = false;
};

double mean_ap(std::span<const DetectionSet> dets, std::span<const DetectionSet> gts,
               const std::vector<Label>& labels, const EvalConfig& eval) {
  double sum = 0.0;
  for (Label l : labels) sum += evaluate_detections(dets, gts, l, eval).ap;
  return labels.empty() ? 0.0 : sum / static_cast<double>(labels.size());
}

int cmd_ensemble(const Common& common, const EnsembleArgs& a, std::ostream& out) {
  Summary summary("ensemble");
  const Config cfg = resolve_config(common);
  const auto only = class_filter(common);
  if (!a.weights.empty() && a.weights.size() != a.inputs.size()) {
    throw UsageError("--weights needs one value per --input");
  }

  std::vector<std::vector<DetectionSet>> inputs;
  for (const auto& path : a.inputs) inputs.push_back(load_frames(path, only));
  std::vector<DetectionSet> gts;
  if (!a.gt.empty()) {
    gts = load_frames(a.gt, only);
    inputs.push_back(gts);
  }
  auto aligned = align_frames(inputs);
  if (!a.gt.empty()) {
    gts = std::move(aligned.back());
    aligned.pop_back();
  }
  const std::size_t n_frames = aligned.front().size();
  const auto& ecfg = cfg.ensemble;

  std::vector<DetectionSet> result;
  std::vector<std::size_t> used_sources;
  std::ostringstream chosen;
  if (a.gt.empty()) {
    // Merge everything once, suppress once.
    result.resize(n_frames);
    for (std::size_t f = 0; f < n_frames; ++f) {
      std::vector<DetectionSet> sets;
      for (std::size_t s = 0; s < aligned.size(); ++s) {
        DetectionSet set = aligned[s][f];
        const double w = a.weights.empty() ? 1.0 : a.weights[s];
        for (Box3D& b : set.boxes) b.score = std::clamp(b.score * w, 0.0, 1.0);
        sets.push_back(std::move(set));
      }
      result[f] = merge_sources(sets);
    }
    result = map_frames(result, [&](const DetectionSet& f) { return apply_nms(f, ecfg.nms_iou, ecfg.iou_kind); });
    for (std::size_t s = 0; s < aligned.size(); ++s) used_sources.push_back(s);
  } else {
    // Greedy pairing with a grid-searched weight per added detector.
    std::vector<Label> labels;
    if (only) {
      labels.push_back(*only);
    } else {
      std::set<Label> present;
      for (const auto& f : gts) {
        for (const auto& b : f.boxes) present.insert(b.label);
      }
      labels.assign(present.begin(), present.end());
    }
    const FramesScoreFn score = [&](std::span<const DetectionSet> frames) {
      return mean_ap(frames, gts, labels, cfg.eval);
    };
    result = aligned[0];
    for (auto& f : result) {
      for (auto& b : f.boxes) b.source_id = b.source_id.value_or(0);
    }
    used_sources.push_back(0);
    double current = score(result);
    chosen << "1";
    summary.add("score_0", fixed6(current));
    for (std::size_t s = 1; s < aligned.size(); ++s) {
      const GridSearchResult gs =
          grid_search_weight(result, aligned[s], ecfg.weight_grid, ecfg.nms_iou, score, ecfg.iou_kind);
      if (gs.best_score - current < ecfg.min_improvement) break;
      result = ensemble_pair(std::span<const DetectionSet>(result), aligned[s], 1.0, gs.best_weight, ecfg.nms_iou,
                             ecfg.iou_kind);
      current = gs.best_score;
      used_sources.push_back(s);
      chosen << ',' << gs.best_weight;
      summary.add("score_" + std::to_string(s), fixed6(current));
    }
  }

  if (a.vote) {
    for (std::size_t f = 0; f < n_frames; ++f) {
      std::vector<Box3D> pool;
      for (std::size_t s : used_sources) {
        pool.insert(pool.end(), aligned[s][f].boxes.begin(), aligned[s][f].boxes.end());
      }
      result[f].boxes = box_vote(result[f].boxes, pool, ecfg.vote_iou, ecfg.iou_kind);
    }
  }

  write_boxes(common.output, result);
  summary.add("detectors", a.inputs.size()).add("used", used_sources.size()).add("frames", n_frames);
  if (!a.gt.empty()) summary.add("weights", chosen.str());
  summary.add("output_boxes", box_count(result)).print(out);
  return kExitOk;
}

int cmd_track(const Common& common, const std::string& input, std::ostream& out) {
  Summary summary("track");
  const Config cfg = resolve_config(common);
  const auto frames = load_frames(input, class_filter(common));
  Tracker tracker(cfg.tracker);
  std::vector<DetectionSet> tracked;
  for (const DetectionSet& f : frames) {
    DetectionSet t = f;
    t.boxes = tracker.step(f);
    tracked.push_back(std::move(t));
  }
  write_boxes(common.output, tracked);
  summary.add("frames", frames.size()).add("detections", box_count(frames)).add("reported", box_count(tracked)).print(out);
  return kExitOk;
}

struct EvalArgs {
  std::string input, gt, level, pr_csv;
  std::optional<double> iou;
};

std::vector<Label> labels_to_report(std::optional<Label> only, std::span<const DetectionSet> a,
                                    std::span<const DetectionSet> b) {
  if (only) return {*only};
  std::set<Label> present;
  for (auto frames : {a, b}) {
    for (const auto& f : frames) {
      for (const auto& box : f.boxes) present.insert(box.label);
    }
  }
  return {present.begin(), present.end()};
}

void emit_report(const Common& common, const std::string& report, std::ostream& out) {
  out << report;
  if (!common.output.empty()) open_output(common.output) << report;
}

int cmd_eval_det(const Common& common, const EvalArgs& a, std::ostream& out) {
  Config cfg = resolve_config(common);
  if (!a.level.empty()) cfg.eval.level = *parse_difficulty_level(a.level);
  if (a.iou) cfg.eval.match_iou = PerClass<double>::uniform(*a.iou);
  const auto only = class_filter(common);
  const auto dets = load_frames(a.input, only);
  const auto gts = load_frames(a.gt, only);

  std::ostringstream report;
  std::ofstream csv;
  if (!a.pr_csv.empty()) {
    csv = open_output(a.pr_csv);
    csv << "class,score,recall,precision,heading_precision\n";
  }
  for (Label label : labels_to_report(only, dets, gts)) {
    const ApResult r = evaluate_detections(dets, gts, label, cfg.eval);
    std::size_t n_gt = 0, n_det = 0;
    for (const auto& f : gts) {
      for (const Box3D& b : split_difficulty(f.boxes, cfg.eval.level)) n_gt += b.label == label ? 1 : 0;
    }
    for (const auto& f : dets) {
      n_det += static_cast<std::size_t>(
          std::count_if(f.boxes.begin(), f.boxes.end(), [&](const Box3D& b) { return b.label == label; }));
    }
    report << "class=" << to_string(label) << " level=" << to_string(cfg.eval.level) << " AP=" << fixed6(r.ap)
           << " APH=" << fixed6(r.aph) << " num_gt=" << n_gt << " num_det=" << n_det << '\n';
    if (csv.is_open()) {
      for (const PrPoint& p : r.curve) {
        csv << to_string(label) << ',' << fixed6(p.score) << ',' << fixed6(p.recall) << ',' << fixed6(p.precision)
            << ',' << fixed6(p.heading_precision) << '\n';
      }
    }
  }
  emit_report(common, report.str(), out);
  return kExitOk;
}

int cmd_eval_mot(const Common& common, const EvalArgs& a, std::ostream& out) {
  const Config cfg = resolve_config(common);
  const auto only = class_filter(common);
  const auto tracked_frames = load_frames(a.input, only);
  const auto gt_frames = load_frames(a.gt, only);
  const auto aligned = align_frames({tracked_frames, gt_frames});

  std::ostringstream report;
  for (Label label : labels_to_report(only, tracked_frames, gt_frames)) {
    BoxFrames hyp, gt;
    for (std::size_t f = 0; f < aligned[0].size(); ++f) {
      auto pick = [&](const DetectionSet& s) {
        std::vector<Box3D> boxes;
        for (const auto& b : s.boxes) {
          if (b.label == label) boxes.push_back(b);
        }
        return boxes;
      };
      hyp.push_back(pick(aligned[0][f]));
      gt.push_back(pick(aligned[1][f]));
    }
    const double thr = a.iou.value_or(cfg.eval.match_iou[label]);
    const MotResult r = mota_motp(hyp, gt, thr, cfg.eval.iou_kind);
    if (!r.mota) throw IoError(IoError::Kind::kValidation, "MOTA undefined: no ground-truth boxes for " + std::string(to_string(label)));
    report << "class=" << to_string(label) << " MOTA=" << fixed6(*r.mota)
           << " MOTP=" << (r.motp ? fixed6(*r.motp) : std::string("nan")) << " FP=" << r.false_positives
           << " FN=" << r.misses << " IDS=" << r.id_switches << " matches=" << r.matches
           << " num_gt=" << r.total_gt << '\n';
  }
  emit_report(common, report.str(), out);
  return kExitOk;
}

int cmd_default_config(const Common& common, std::ostream& out) {
  const std::string text = to_json_text(Config{});
  if (common.output.empty()) {
    out << text;
  } else {
    open_output(common.output) << text;
  }
  return kExitOk;
}

void add_common(CLI::App* sub, Common& common, bool output_required) {
  sub->add_option("--config", common.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  auto* output = sub->add_option("--output", common.output, "Output path");
  if (output_required) output->required();
  sub->add_option("--class", common.class_name, "Restrict to one label (VEHICLE, PEDESTRIAN, CYCLIST)");
  sub->add_option("--seed", common.seed, "Random seed");
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"LiDAR detection post-processing, tracking and evaluation toolkit", "lidarpost"};
  app.require_subcommand(1);
  Common common;

  auto* concat = app.add_subcommand("concat", "Stack the current and previous sweeps with a time channel");
  ConcatArgs concat_args;
  add_common(concat, common, true);
  concat->add_option("--current", concat_args.current)->required()->check(CLI::ExistingFile);
  concat->add_option("--previous", concat_args.previous)->required()->check(CLI::ExistingFile);
  concat->add_option("--channels", concat_args.channels, "Channels of the input files")->check(CLI::IsMember({4, 5}));
  concat->add_option("--delta", concat_args.delta, "Time offset of the previous sweep (s)")->check(CLI::PositiveNumber);
  concat->add_flag("--crop", concat_args.crop, "Crop to the configured range");
  concat->add_flag("--augment", concat_args.augment, "Apply a seeded random augmentation");

  auto* voxelize = app.add_subcommand("voxelize", "Voxelize a point file and write per-voxel records");
  VoxelizeArgs voxel_args;
  add_common(voxelize, common, true);
  voxelize->add_option("--input", voxel_args.input)->required()->check(CLI::ExistingFile);
  voxelize->add_option("--channels", voxel_args.channels)->check(CLI::IsMember({4, 5}));
  voxelize->add_option("--mode", voxel_args.mode)->check(CLI::IsMember({"dynamic", "hard"}));

  auto* assign = app.add_subcommand("assign", "Label anchors against ground truth");
  AssignArgs assign_args;
  add_common(assign, common, true);
  assign->add_option("--anchors", assign_args.anchors)->required()->check(CLI::ExistingFile);
  assign->add_option("--gts", assign_args.gts)->required()->check(CLI::ExistingFile);
  assign->add_option("--mode", assign_args.mode)->check(CLI::IsMember({"fixed", "adaptive"}));

  auto* nms_cmd = app.add_subcommand("nms", "Class-wise non-maximum suppression per frame");
  NmsArgs nms_args;
  add_common(nms_cmd, common, true);
  nms_cmd->add_option("--input", nms_args.input)->required()->check(CLI::ExistingFile);
  nms_cmd->add_option("--iou", nms_args.iou, "IoU threshold for every class")->check(CLI::Range(0.0, 1.0));

  auto* soft = app.add_subcommand("soft-nms", "Gaussian soft-NMS per frame");
  SoftNmsArgs soft_args;
  add_common(soft, common, true);
  soft->add_option("--input", soft_args.input)->required()->check(CLI::ExistingFile);
  soft->add_option("--sigma", soft_args.sigma)->check(CLI::PositiveNumber);
  soft->add_option("--floor", soft_args.floor)->check(CLI::Range(0.0, 0.999999));

  auto* vote = app.add_subcommand("vote", "Refine kept boxes by averaging overlapping pre-NMS boxes");
  VoteArgs vote_args;
  add_common(vote, common, true);
  vote->add_option("--nms", vote_args.nms_input, "Boxes kept by NMS")->required()->check(CLI::ExistingFile);
  vote->add_option("--original", vote_args.original, "Pre-NMS pool")->required()->check(CLI::ExistingFile);
  vote->add_option("--iou", vote_args.iou)->check(CLI::Range(0.0, 1.0));

  auto* ens = app.add_subcommand("ensemble", "Merge several detectors");
  EnsembleArgs ens_args;
  add_common(ens, common, true);
  ens->add_option("--input", ens_args.inputs, "Detector outputs, in merge order")->required()->check(CLI::ExistingFile);
  ens->add_option("--weights", ens_args.weights, "Score weight per input")->delimiter(',')->check(CLI::Range(0.0, 1.0));
  ens->add_option("--gt", ens_args.gt, "Ground truth; enables greedy pairing with grid search")
      ->check(CLI::ExistingFile);
  ens->add_flag("--vote", ens_args.vote, "Apply box voting after suppression");

  auto* track = app.add_subcommand("track", "Assign track ids to a detection sequence");
  std::string track_input;
  add_common(track, common, true);
  track->add_option("--input", track_input)->required()->check(CLI::ExistingFile);

  auto* eval_det = app.add_subcommand("eval-det", "AP / APH of detections against ground truth");
  EvalArgs det_args;
  add_common(eval_det, common, false);
  eval_det->add_option("--input", det_args.input)->required()->check(CLI::ExistingFile);
  eval_det->add_option("--gt", det_args.gt)->required()->check(CLI::ExistingFile);
  eval_det->add_option("--level", det_args.level)->check(CLI::IsMember({"L1", "L2"}));
  eval_det->add_option("--iou", det_args.iou, "Match IoU for every class")->check(CLI::Range(0.0, 1.0));
  eval_det->add_option("--pr-csv", det_args.pr_csv, "Write precision/recall points");

  auto* eval_mot = app.add_subcommand("eval-mot", "MOTA / MOTP of tracks against ground truth");
  EvalArgs mot_args;
  add_common(eval_mot, common, false);
  eval_mot->add_option("--input", mot_args.input)->required()->check(CLI::ExistingFile);
  eval_mot->add_option("--gt", mot_args.gt)->required()->check(CLI::ExistingFile);
  eval_mot->add_option("--iou", mot_args.iou)->check(CLI::Range(0.0, 1.0));

  auto* defaults = app.add_subcommand("default-config", "Print the default configuration");
  add_common(defaults, common, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "ERROR " << kExitUsage << ": " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (concat->parsed()) return cmd_concat(common, concat_args, out);
    if (voxelize->parsed()) return cmd_voxelize(common, voxel_args, out);
    if (assign->parsed()) return cmd_assign(common, assign_args, out);
    if (nms_cmd->parsed()) return cmd_nms(common, nms_args, out);
    if (soft->parsed()) return cmd_soft_nms(common, soft_args, out);
    if (vote->parsed()) return cmd_vote(common, vote_args, out);
    if (ens->parsed()) return cmd_ensemble(common, ens_args, out);
    if (track->parsed()) return cmd_track(common, track_input, out);
    if (eval_det->parsed()) return cmd_eval_det(common, det_args, out);
    if (eval_mot->parsed()) return cmd_eval_mot(common, mot_args, out);
    if (defaults->parsed()) return cmd_default_config(common, out);
  } catch (const UsageError& e) {
    err << "ERROR " << kExitUsage << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "ERROR " << kExitInput << ": " << e.what() << '\n';
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    err << "ERROR " << kExitInput << ": " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "ERROR " << kExitInternal << ": " << e.what() << '\n';
    return kExitInternal;
  }
  err << "ERROR " << kExitUsage << ": no subcommand\n";
  return kExitUsage;
}

}  // namespace lidarpost
