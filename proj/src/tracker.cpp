#include "lidarpost/tracker.hpp"

#include <algorithm>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "lidarpost/hungarian.hpp"

namespace lidarpost {

namespace {

constexpr double kMinDimension = 1e-3;

using ObsVector = Eigen::Matrix<double, kObsDim, 1>;
using ObsMatrix = Eigen::Matrix<double, kObsDim, kObsDim>;
using ObsModel = Eigen::Matrix<double, kObsDim, kStateDim>;

StateCovariance transition() {
  StateCovariance f = StateCovariance::Identity();
  f(0, 7) = 1.0;
  f(1, 8) = 1.0;
  f(2, 9) = 1.0;
  return f;
}

ObsModel observation() {
  ObsModel h = ObsModel::Zero();
  h.leftCols<kObsDim>().setIdentity();
  return h;
}

ObsVector observe(const Box3D& b) {
  ObsVector z;
  z << b.cx, b.cy, b.cz, b.heading, b.length, b.width, b.height;
  return z;
}

}  // namespace

void TrackerConfig::validate() const {
  if (!(iou_min >= 0.0 && iou_min <= 1.0)) throw std::invalid_argument("iou_min must be in [0, 1]");
  if (max_age < 1) throw std::invalid_argument("max_age must be >= 1");
  if (min_hits < 1) throw std::invalid_argument("min_hits must be >= 1");
  if (!(process_noise >= 0.0) || !(measurement_noise >= 0.0)) {
    throw std::invalid_argument("noise scales must be non-negative");
  }
  if (!(init_pose_variance > 0.0) || !(init_velocity_variance > 0.0)) {
    throw std::invalid_argument("initial variances must be positive");
  }
}

Box3D TrackState::box() const {
  Box3D b = last_detection;
  b.cx = mean(0);
  b.cy = mean(1);
  b.cz = mean(2);
  b.heading = wrap_angle(mean(3));
  // The filter does not constrain dimensions; keep them valid for IoU.
  b.length = std::max(mean(4), kMinDimension);
  b.width = std::max(mean(5), kMinDimension);
  b.height = std::max(mean(6), kMinDimension);
  b.label = label;
  b.track_id = id;
  return b;
}

TrackState init_track(const Box3D& det, std::int64_t id, const TrackerConfig& cfg) {
  TrackState s;
  s.mean.setZero();
  s.mean.head<kObsDim>() = observe(det);
  s.covariance.setZero();
  s.covariance.diagonal().head<kObsDim>().setConstant(cfg.init_pose_variance);
  s.covariance.diagonal().tail<3>().setConstant(cfg.init_velocity_variance);
  s.id = id;
  s.hits = 1;
  s.time_since_update = 0;
  s.age = 0;
  s.label = det.label;
  s.last_detection = det;
  return s;
}

TrackState predict(TrackState state, const TrackerConfig& cfg) {
  static const StateCovariance f = transition();
  state.mean = f * state.mean;
  state.mean(3) = wrap_angle(state.mean(3));
  StateCovariance p = f * state.covariance * f.transpose();
  p.diagonal().array() += cfg.process_noise;
  state.covariance = 0.5 * (p + p.transpose());
  ++state.age;
  ++state.time_since_update;
  return state;
}

double corrected_heading(double track_heading, double det_heading) {
  if (heading_error(det_heading, track_heading) > kPi / 2.0) return wrap_angle(det_heading + kPi);
  return wrap_angle(det_heading);
}

TrackState update(TrackState state, const Box3D& det, const TrackerConfig& cfg) {
  static const ObsModel h = observation();
  ObsVector z = observe(det);
  z(3) = corrected_heading(state.mean(3), det.heading);

  ObsVector residual = z - h * state.mean;
  residual(3) = wrap_angle(residual(3));

  const ObsMatrix r = ObsMatrix::Identity() * cfg.measurement_noise;
  const ObsMatrix s = h * state.covariance * h.transpose() + r;
  // K = P H^T S^-1, via a solve on the symmetric S.
  const Eigen::Matrix<double, kStateDim, kObsDim> gain =
      s.ldlt().solve(h * state.covariance).transpose();

  state.mean += gain * residual;
  state.mean(3) = wrap_angle(state.mean(3));
  // Joseph form keeps P symmetric positive-definite under rounding.
  const StateCovariance i_kh = StateCovariance::Identity() - gain * h;
  StateCovariance p = i_kh * state.covariance * i_kh.transpose() + gain * r * gain.transpose();
  state.covariance = 0.5 * (p + p.transpose());

  ++state.hits;
  state.time_since_update = 0;
  state.last_detection = det;
  return state;
}

AssociationResult associate(std::span<const Box3D> tracks, std::span<const Box3D> detections,
                            double iou_min, IouKind kind) {
  AssociationResult result;
  std::vector<bool> track_matched(tracks.size(), false), det_matched(detections.size(), false);

  for (Label label : kAllLabels) {
    std::vector<std::size_t> ti, di;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      if (tracks[i].label == label) ti.push_back(i);
    }
    for (std::size_t j = 0; j < detections.size(); ++j) {
      if (detections[j].label == label) di.push_back(j);
    }
    if (ti.empty() || di.empty()) continue;

    CostMatrix cost(ti.size(), std::vector<double>(di.size()));
    CostMatrix overlap(ti.size(), std::vector<double>(di.size()));
    for (std::size_t a = 0; a < ti.size(); ++a) {
      for (std::size_t b = 0; b < di.size(); ++b) {
        overlap[a][b] = iou(tracks[ti[a]], detections[di[b]], kind);
        cost[a][b] = 1.0 - overlap[a][b];
      }
    }
    for (auto [a, b] : hungarian(cost).pairs) {
      if (overlap[a][b] < iou_min) continue;
      result.matches.emplace_back(ti[a], di[b]);
      track_matched[ti[a]] = true;
      det_matched[di[b]] = true;
    }
  }

  std::sort(result.matches.begin(), result.matches.end());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (!track_matched[i]) result.unmatched_tracks.push_back(i);
  }
  for (std::size_t j = 0; j < detections.size(); ++j) {
    if (!det_matched[j]) result.unmatched_detections.push_back(j);
  }
  return result;
}

Tracker::Tracker(TrackerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::vector<Box3D> Tracker::step(const DetectionSet& frame) {
  if (last_timestamp_ && frame.timestamp < *last_timestamp_) {
    throw std::invalid_argument("tracker: frame '" + frame.frame_id + "' is out of temporal order");
  }
  last_timestamp_ = frame.timestamp;
  ++frame_count_;

  for (TrackState& t : tracks_) t = predict(std::move(t), cfg_);

  std::vector<Box3D> predicted;
  predicted.reserve(tracks_.size());
  for (const TrackState& t : tracks_) predicted.push_back(t.box());

  const AssociationResult assoc = associate(predicted, frame.boxes, cfg_.iou_min, cfg_.iou_kind);
  for (auto [ti, dj] : assoc.matches) tracks_[ti] = update(std::move(tracks_[ti]), frame.boxes[dj], cfg_);
  for (std::size_t dj : assoc.unmatched_detections) {
    tracks_.push_back(init_track(frame.boxes[dj], next_id_++, cfg_));
  }
  std::erase_if(tracks_, [&](const TrackState& t) { return t.time_since_update > cfg_.max_age; });

  std::vector<Box3D> reported;
  const auto min_hits = static_cast<std::size_t>(cfg_.min_hits);
  for (const TrackState& t : tracks_) {
    if (t.time_since_update != 0) continue;
    if (t.hits < cfg_.min_hits && frame_count_ > min_hits) continue;
    Box3D out = cfg_.report_filtered_state ? t.box() : t.last_detection;
    out.track_id = t.id;
    reported.push_back(out);
  }
  return reported;
}

}  // namespace lidarpost
