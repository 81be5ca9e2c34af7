#include "lidarpost/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lidarpost/io.hpp"

namespace lidarpost {

namespace {

using nlohmann::ordered_json;

ordered_json range_json(const RangeSpec& r) {
  return {{"x_min", r.x_min}, {"x_max", r.x_max}, {"y_min", r.y_min},
          {"y_max", r.y_max}, {"z_min", r.z_min}, {"z_max", r.z_max}};
}

RangeSpec range_from(const ordered_json& j) {
  return {j.at("x_min").get<double>(), j.at("x_max").get<double>(), j.at("y_min").get<double>(),
          j.at("y_max").get<double>(), j.at("z_min").get<double>(), j.at("z_max").get<double>()};
}

ordered_json per_class_json(const PerClass<double>& p) {
  return {{"VEHICLE", p.vehicle}, {"PEDESTRIAN", p.pedestrian}, {"CYCLIST", p.cyclist}};
}

PerClass<double> per_class_from(const ordered_json& j) {
  return {j.at("VEHICLE").get<double>(), j.at("PEDESTRIAN").get<double>(), j.at("CYCLIST").get<double>()};
}

IouKind iou_kind_from(const ordered_json& j) {
  const auto kind = parse_iou_kind(j.get<std::string>());
  if (!kind) throw std::invalid_argument("iou must be \"bev\" or \"3d\"");
  return *kind;
}

ordered_json to_json(const Config& c) {
  ordered_json j;
  j["pointcloud"] = {{"range", range_json(c.range)}, {"frame_delta", c.frame_delta}};
  j["voxelizer"] = {{"range", range_json(c.voxel.range)},
                    {"voxel_size", {c.voxel.vx, c.voxel.vy, c.voxel.vz}},
                    {"max_points_per_voxel", c.voxel.max_points_per_voxel},
                    {"max_voxels", c.voxel.max_voxels}};
  j["assigner"] = {{"pos_iou", c.assigner.pos_iou}, {"neg_iou", c.assigner.neg_iou}, {"top_k", c.assigner.top_k}};
  j["ensemble"] = {{"nms_iou", per_class_json(c.ensemble.nms_iou)},
                   {"vote_iou", c.ensemble.vote_iou},
                   {"soft_nms_sigma", c.ensemble.soft_sigma},
                   {"soft_nms_score_floor", c.ensemble.soft_score_floor},
                   {"iou", std::string(to_string(c.ensemble.iou_kind))},
                   {"weight_grid", c.ensemble.weight_grid},
                   {"min_improvement", c.ensemble.min_improvement}};
  j["tracker"] = {{"iou_min", c.tracker.iou_min},
                  {"max_age", c.tracker.max_age},
                  {"min_hits", c.tracker.min_hits},
                  {"process_noise", c.tracker.process_noise},
                  {"measurement_noise", c.tracker.measurement_noise},
                  {"init_pose_variance", c.tracker.init_pose_variance},
                  {"init_velocity_variance", c.tracker.init_velocity_variance},
                  {"iou", std::string(to_string(c.tracker.iou_kind))},
                  {"report_filtered_state", c.tracker.report_filtered_state}};
  j["metrics"] = {{"match_iou", per_class_json(c.eval.match_iou)},
                  {"level", std::string(to_string(c.eval.level))},
                  {"iou", std::string(to_string(c.eval.iou_kind))}};
  return j;
}

Config from_json(const ordered_json& j) {
  Config c;
  const auto& pc = j.at("pointcloud");
  c.range = range_from(pc.at("range"));
  c.frame_delta = pc.at("frame_delta").get<double>();

  const auto& vx = j.at("voxelizer");
  c.voxel.range = range_from(vx.at("range"));
  const auto size = vx.at("voxel_size").get<std::vector<double>>();
  if (size.size() != 3) throw std::invalid_argument("voxel_size needs three entries");
  c.voxel.vx = size[0];
  c.voxel.vy = size[1];
  c.voxel.vz = size[2];
  c.voxel.max_points_per_voxel = vx.at("max_points_per_voxel").get<int>();
  c.voxel.max_voxels = vx.at("max_voxels").get<int>();

  const auto& as = j.at("assigner");
  c.assigner.pos_iou = as.at("pos_iou").get<double>();
  c.assigner.neg_iou = as.at("neg_iou").get<double>();
  c.assigner.top_k = as.at("top_k").get<std::size_t>();

  const auto& en = j.at("ensemble");
  c.ensemble.nms_iou = per_class_from(en.at("nms_iou"));
  c.ensemble.vote_iou = en.at("vote_iou").get<double>();
  c.ensemble.soft_sigma = en.at("soft_nms_sigma").get<double>();
  c.ensemble.soft_score_floor = en.at("soft_nms_score_floor").get<double>();
  c.ensemble.iou_kind = iou_kind_from(en.at("iou"));
  c.ensemble.weight_grid = en.at("weight_grid").get<std::vector<double>>();
  c.ensemble.min_improvement = en.at("min_improvement").get<double>();

  const auto& tr = j.at("tracker");
  c.tracker.iou_min = tr.at("iou_min").get<double>();
  c.tracker.max_age = tr.at("max_age").get<int>();
  c.tracker.min_hits = tr.at("min_hits").get<int>();
  c.tracker.process_noise = tr.at("process_noise").get<double>();
  c.tracker.measurement_noise = tr.at("measurement_noise").get<double>();
  c.tracker.init_pose_variance = tr.at("init_pose_variance").get<double>();
  c.tracker.init_velocity_variance = tr.at("init_velocity_variance").get<double>();
  c.tracker.iou_kind = iou_kind_from(tr.at("iou"));
  c.tracker.report_filtered_state = tr.at("report_filtered_state").get<bool>();

  const auto& me = j.at("metrics");
  c.eval.match_iou = per_class_from(me.at("match_iou"));
  const auto level = parse_difficulty_level(me.at("level").get<std::string>());
  if (!level) throw std::invalid_argument("level must be \"L1\" or \"L2\"");
  c.eval.level = *level;
  c.eval.iou_kind = iou_kind_from(me.at("iou"));
  return c;
}

// Every key of `user` must exist in `reference`; objects recurse.
void check_keys(const ordered_json& user, const ordered_json& reference, const std::string& where) {
  if (!user.is_object()) {
    throw IoError(IoError::Kind::kValidation, "config: '" + where + "' must be an object");
  }
  for (const auto& [key, value] : user.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    auto ref = reference.find(key);
    if (ref == reference.end()) throw IoError(IoError::Kind::kValidation, "config: unknown key '" + path + "'");
    if (ref->is_object()) check_keys(value, *ref, path);
  }
}

void merge(ordered_json& base, const ordered_json& patch) {
  for (const auto& [key, value] : patch.items()) {
    if (value.is_object() && base[key].is_object()) {
      merge(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

}  // namespace

void Config::validate() const {
  range.validate();
  if (!(frame_delta > 0.0)) throw std::invalid_argument("frame_delta must be positive");
  voxel.validate();
  if (!(0.0 <= assigner.neg_iou && assigner.neg_iou <= assigner.pos_iou && assigner.pos_iou <= 1.0)) {
    throw std::invalid_argument("assigner requires 0 <= neg_iou <= pos_iou <= 1");
  }
  if (assigner.top_k == 0) throw std::invalid_argument("assigner top_k must be >= 1");
  for (Label l : kAllLabels) {
    if (!(ensemble.nms_iou[l] >= 0.0 && ensemble.nms_iou[l] <= 1.0)) {
      throw std::invalid_argument("nms_iou must be in [0, 1]");
    }
    if (!(eval.match_iou[l] > 0.0 && eval.match_iou[l] <= 1.0)) {
      throw std::invalid_argument("match_iou must be in (0, 1]");
    }
  }
  if (!(ensemble.vote_iou > 0.0 && ensemble.vote_iou <= 1.0)) throw std::invalid_argument("vote_iou must be in (0, 1]");
  if (!(ensemble.soft_sigma > 0.0)) throw std::invalid_argument("soft_nms_sigma must be positive");
  if (!(ensemble.soft_score_floor >= 0.0 && ensemble.soft_score_floor < 1.0)) {
    throw std::invalid_argument("soft_nms_score_floor must be in [0, 1)");
  }
  if (ensemble.weight_grid.empty()) throw std::invalid_argument("weight_grid must not be empty");
  for (double w : ensemble.weight_grid) {
    if (!(w > 0.0 && w <= 1.0)) throw std::invalid_argument("weight_grid entries must be in (0, 1]");
  }
  tracker.validate();
}

std::string to_json_text(const Config& cfg) { return to_json(cfg).dump(2) + "\n"; }

Config config_from_json_text(const std::string& text) {
  ordered_json user;
  try {
    user = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw IoError(IoError::Kind::kParse, std::string("config: malformed JSON: ") + e.what());
  }
  ordered_json base = to_json(Config{});
  check_keys(user, base, "");
  merge(base, user);
  try {
    Config cfg = from_json(base);
    cfg.validate();
    return cfg;
  } catch (const ordered_json::exception& e) {
    throw IoError(IoError::Kind::kValidation, std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(IoError::Kind::kValidation, std::string("config: ") + e.what());
  }
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoError::Kind::kIo, "cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json_text(buffer.str());
}

}  // namespace lidarpost
