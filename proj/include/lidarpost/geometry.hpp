#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace lidarpost {

inline constexpr double kPi = 3.14159265358979323846;

enum class Label { kVehicle, kPedestrian, kCyclist };

inline constexpr std::array<Label, 3> kAllLabels = {Label::kVehicle, Label::kPedestrian,
                                                    Label::kCyclist};

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view name);

/// One value per object class, indexable by Label.
template <class T>
struct PerClass {
  T vehicle{};
  T pedestrian{};
  T cyclist{};

  static PerClass uniform(const T& value) { return {value, value, value}; }

  T& operator[](Label label) {
    switch (label) {
      case Label::kPedestrian: return pedestrian;
      case Label::kCyclist: return cyclist;
      default: return vehicle;
    }
  }
  const T& operator[](Label label) const { return const_cast<PerClass&>(*this)[label]; }
  bool operator==(const PerClass&) const = default;
};

/// Oriented 3D box. The center is the geometric center (cz at mid-height),
/// `length` runs along the heading direction and `width` across it.
/// Heading is counterclockwise about +z, 0 along +x, kept in (-pi, pi].
struct Box3D {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double length = 1.0;
  double width = 1.0;
  double height = 1.0;
  double heading = 0.0;
  double score = 1.0;
  Label label = Label::kVehicle;
  std::optional<std::int64_t> track_id;
  std::optional<int> difficulty;
  std::optional<std::int64_t> num_points;
  std::optional<int> source_id;

  bool operator==(const Box3D&) const = default;
};

/// Throws std::invalid_argument naming the first violated invariant.
void validate(const Box3D& box);

/// Maps theta onto (-pi, pi]. Throws std::invalid_argument for NaN/Inf.
double wrap_angle(double theta);

/// Smallest absolute angular difference, in [0, pi].
double heading_error(double a, double b);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Footprint corners in counterclockwise order.
std::array<Vec2, 4> bev_corners(const Box3D& box);

/// Closed point-in-rotated-rectangle test on the footprint.
bool contains_bev(const Box3D& box, Vec2 point);

/// Area of the convex polygon given in either winding order.
double polygon_area(const std::vector<Vec2>& polygon);

/// Intersection polygon of two convex polygons, both counterclockwise.
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip);

double bev_intersection_area(const Box3D& a, const Box3D& b);
double bev_iou(const Box3D& a, const Box3D& b);
double iou3d(const Box3D& a, const Box3D& b);

enum class IouKind { kBev, k3d };

std::string_view to_string(IouKind kind);
std::optional<IouKind> parse_iou_kind(std::string_view name);

inline double iou(const Box3D& a, const Box3D& b, IouKind kind) {
  return kind == IouKind::kBev ? bev_iou(a, b) : iou3d(a, b);
}

}  // namespace lidarpost
