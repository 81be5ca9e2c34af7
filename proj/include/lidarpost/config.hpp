#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "lidarpost/assigner.hpp"
#include "lidarpost/ensemble.hpp"
#include "lidarpost/metrics.hpp"
#include "lidarpost/pointcloud.hpp"
#include "lidarpost/tracker.hpp"
#include "lidarpost/voxelizer.hpp"

namespace lidarpost {

struct AssignerConfig {
  double pos_iou = 0.6;
  double neg_iou = 0.45;
  std::size_t top_k = kDefaultAdaptiveTopK;

  bool operator==(const AssignerConfig&) const = default;
};

/// Every tunable of the toolkit in one document. Values not stated as
/// measured settings are conventional defaults.
struct Config {
  RangeSpec range;
  double frame_delta = kDefaultFrameDelta;
  VoxelConfig voxel;
  AssignerConfig assigner;
  EnsembleConfig ensemble;
  TrackerConfig tracker;
  EvalConfig eval;

  void validate() const;
  bool operator==(const Config&) const = default;
};

/// Pretty-printed JSON with one section per module.
std::string to_json_text(const Config& cfg);

/// Starts from the defaults and overrides whatever keys are present.
/// Unknown keys and wrong types raise IoError (kValidation).
Config config_from_json_text(const std::string& text);
Config load_config(const std::filesystem::path& path);

}  // namespace lidarpost
