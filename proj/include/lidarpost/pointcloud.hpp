#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lidarpost/geometry.hpp"

namespace lidarpost {

/// Time offset between the current frame and the previous sweep.
inline constexpr double kDefaultFrameDelta = 0.1;

/// A LiDAR return. `t` is the time-offset channel: 0 for the current
/// sweep, the frame delta for points borrowed from the previous sweep.
struct TimedPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;
  double t = 0.0;

  bool operator==(const TimedPoint&) const = default;
};

struct PointCloud {
  std::vector<TimedPoint> points;
  std::string frame_id;
  double timestamp = 0.0;
};

/// Axis-aligned detection range with closed bounds.
struct RangeSpec {
  double x_min = -75.2;
  double x_max = 75.2;
  double y_min = -75.2;
  double y_max = 75.2;
  double z_min = -2.0;
  double z_max = 4.0;

  void validate() const;
  bool contains(double x, double y, double z) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max && z >= z_min && z <= z_max;
  }
  bool operator==(const RangeSpec&) const = default;
};

/// Points plus the boxes annotated on them; augmentations act on both.
struct Scene {
  PointCloud cloud;
  std::vector<Box3D> boxes;
};

/// Stacks the current sweep (t = 0) ahead of the previous sweep (t = delta).
/// Both sweeps must already share a coordinate frame; the result keeps the
/// current frame's id and timestamp. Throws std::invalid_argument when
/// delta is not positive.
PointCloud concat_frames(const PointCloud& current, const PointCloud& previous,
                         double delta = kDefaultFrameDelta);

PointCloud crop_range(const PointCloud& cloud, const RangeSpec& range);

enum class FlipAxis { kX, kY };

/// kX mirrors across the x-axis (y -> -y), kY across the y-axis (x -> -x).
Scene flip(Scene scene, FlipAxis axis);

Scene global_scale(Scene scene, double factor);

/// Rotation about +z through the origin.
Scene global_rotate(Scene scene, double angle);

struct AugmentationParams {
  bool flip_x = false;
  bool flip_y = false;
  double scale = 1.0;
  double angle = 0.0;

  bool operator==(const AugmentationParams&) const = default;
};

inline constexpr double kScaleMin = 0.95;
inline constexpr double kScaleMax = 1.05;
inline constexpr double kRotationLimit = kPi / 4.0;

/// Deterministic draw: fair coin per flip, scale ~ U[0.95, 1.05],
/// angle ~ U[-pi/4, pi/4].
AugmentationParams sample_augmentation(std::uint64_t seed);

/// Applies flip x, flip y, scale, then rotation.
Scene apply_augmentation(Scene scene, const AugmentationParams& params);

}  // namespace lidarpost
