#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lidarpost/ensemble.hpp"
#include "lidarpost/geometry.hpp"

namespace lidarpost {

inline constexpr int kStateDim = 10;  // cx cy cz heading l w h vx vy vz
inline constexpr int kObsDim = 7;     // cx cy cz heading l w h

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using StateCovariance = Eigen::Matrix<double, kStateDim, kStateDim>;

// Defaults, all tunable.
struct TrackerConfig {
  double iou_min = 0.1;
  int max_age = 2;
  int min_hits = 3;
  double process_noise = 1.0;      // Q = process_noise * I
  double measurement_noise = 1.0;  // R = measurement_noise * I
  double init_pose_variance = 10.0;
  double init_velocity_variance = 10000.0;
  IouKind iou_kind = IouKind::k3d;
  /// Report the filtered state instead of the matched detection geometry.
  bool report_filtered_state = false;

  void validate() const;
  bool operator==(const TrackerConfig&) const = default;
};

/// Constant-velocity Kalman state of one track. Velocities are in meters
/// per frame step.
struct TrackState {
  StateVector mean = StateVector::Zero();
  StateCovariance covariance = StateCovariance::Identity();
  std::int64_t id = 0;
  int hits = 1;
  int time_since_update = 0;
  int age = 0;
  Label label = Label::kVehicle;
  Box3D last_detection;

  Box3D box() const;
};

TrackState init_track(const Box3D& det, std::int64_t id, const TrackerConfig& cfg);

/// x <- F x, P <- F P F^T + Q; age and time_since_update advance by one.
TrackState predict(TrackState state, const TrackerConfig& cfg);

/// Kalman correction with the 7-dim box observation. A detection heading
/// more than pi/2 away from the track is turned around first.
TrackState update(TrackState state, const Box3D& det, const TrackerConfig& cfg);

/// Heading actually fed to the filter for a detection against a track.
double corrected_heading(double track_heading, double det_heading);

struct AssociationResult {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (track, det) by track
  std::vector<std::size_t> unmatched_tracks;
  std::vector<std::size_t> unmatched_detections;
};

/// Class-wise Hungarian matching on 1 - IoU, gated at iou_min.
AssociationResult associate(std::span<const Box3D> tracks, std::span<const Box3D> detections,
                            double iou_min, IouKind kind = IouKind::k3d);

/// Online multi-object tracker for one sequence.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg = {});

  /// Runs predict, associate, update, birth and death for one frame and
  /// returns the boxes reported for it, with track ids set. Throws
  /// std::invalid_argument when the frame is older than the previous one.
  std::vector<Box3D> step(const DetectionSet& frame);

  const std::vector<TrackState>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return cfg_; }
  std::size_t frame_count() const { return frame_count_; }

 private:
  TrackerConfig cfg_;
  std::vector<TrackState> tracks_;
  std::int64_t next_id_ = 0;
  std::size_t frame_count_ = 0;
  std::optional<double> last_timestamp_;
};

}  // namespace lidarpost
