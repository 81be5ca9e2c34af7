#include "lidarpost/pointcloud.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace lidarpost {

namespace {

// 53 high bits of a 64-bit draw mapped onto [0, 1). Independent of the
// standard library's distribution implementations.
double unit_double(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

void RangeSpec::validate() const {
  for (double v : {x_min, x_max, y_min, y_max, z_min, z_max}) {
    if (!std::isfinite(v)) throw std::invalid_argument("range bound is not finite");
  }
  if (!(x_min < x_max) || !(y_min < y_max) || !(z_min < z_max)) {
    throw std::invalid_argument("range requires min < max on every axis");
  }
}

PointCloud concat_frames(const PointCloud& current, const PointCloud& previous, double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw std::invalid_argument("concat_frames: delta must be positive and finite");
  }
  PointCloud out;
  out.frame_id = current.frame_id;
  out.timestamp = current.timestamp;
  out.points.reserve(current.points.size() + previous.points.size());
  for (TimedPoint p : current.points) {
    p.t = 0.0;
    out.points.push_back(p);
  }
  for (TimedPoint p : previous.points) {
    p.t = delta;
    out.points.push_back(p);
  }
  return out;
}

PointCloud crop_range(const PointCloud& cloud, const RangeSpec& range) {
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.timestamp = cloud.timestamp;
  for (const TimedPoint& p : cloud.points) {
    if (range.contains(p.x, p.y, p.z)) out.points.push_back(p);
  }
  return out;
}

Scene flip(Scene scene, FlipAxis axis) {
  if (axis == FlipAxis::kX) {
    for (TimedPoint& p : scene.cloud.points) p.y = -p.y;
    for (Box3D& b : scene.boxes) {
      b.cy = -b.cy;
      b.heading = wrap_angle(-b.heading);
    }
  } else {
    for (TimedPoint& p : scene.cloud.points) p.x = -p.x;
    for (Box3D& b : scene.boxes) {
      b.cx = -b.cx;
      b.heading = wrap_angle(kPi - b.heading);
    }
  }
  return scene;
}

Scene global_scale(Scene scene, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw std::invalid_argument("global_scale: factor must be positive and finite");
  }
  for (TimedPoint& p : scene.cloud.points) {
    p.x *= factor;
    p.y *= factor;
    p.z *= factor;
  }
  for (Box3D& b : scene.boxes) {
    b.cx *= factor;
    b.cy *= factor;
    b.cz *= factor;
    b.length *= factor;
    b.width *= factor;
    b.height *= factor;
  }
  return scene;
}

Scene global_rotate(Scene scene, double angle) {
  if (!std::isfinite(angle)) throw std::invalid_argument("global_rotate: angle must be finite");
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (TimedPoint& p : scene.cloud.points) {
    const double x = p.x;
    p.x = c * x - s * p.y;
    p.y = s * x + c * p.y;
  }
  for (Box3D& b : scene.boxes) {
    const double x = b.cx;
    b.cx = c * x - s * b.cy;
    b.cy = s * x + c * b.cy;
    b.heading = wrap_angle(b.heading + angle);
  }
  return scene;
}

AugmentationParams sample_augmentation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AugmentationParams params;
  params.flip_x = unit_double(rng) < 0.5;
  params.flip_y = unit_double(rng) < 0.5;
  params.scale = kScaleMin + (kScaleMax - kScaleMin) * unit_double(rng);
  params.angle = -kRotationLimit + 2.0 * kRotationLimit * unit_double(rng);
  return params;
}

Scene apply_augmentation(Scene scene, const AugmentationParams& params) {
  if (params.flip_x) scene = flip(std::move(scene), FlipAxis::kX);
  if (params.flip_y) scene = flip(std::move(scene), FlipAxis::kY);
  scene = global_scale(std::move(scene), params.scale);
  return global_rotate(std::move(scene), params.angle);
}

}  // namespace lidarpost
