#include "lidarpost/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lidarpost {

namespace {

// Clip slivers below this area are floating-point noise.
constexpr double kMinArea = 1e-12;

double cross(Vec2 o, Vec2 a, Vec2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

Vec2 line_intersection(Vec2 p, Vec2 q, Vec2 a, Vec2 b) {
  // Intersection of segment pq with the infinite line ab.
  const double dp = cross(a, b, p);
  const double dq = cross(a, b, q);
  const double t = dp / (dp - dq);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

bool same_footprint(const Box3D& a, const Box3D& b) {
  return a.cx == b.cx && a.cy == b.cy && a.length == b.length && a.width == b.width &&
         a.heading == b.heading;
}

}  // namespace

std::string_view to_string(Label label) {
  switch (label) {
    case Label::kVehicle: return "VEHICLE";
    case Label::kPedestrian: return "PEDESTRIAN";
    case Label::kCyclist: return "CYCLIST";
  }
  return "UNKNOWN";
}

std::optional<Label> parse_label(std::string_view name) {
  for (Label label : kAllLabels) {
    if (to_string(label) == name) return label;
  }
  return std::nullopt;
}

std::string_view to_string(IouKind kind) { return kind == IouKind::kBev ? "bev" : "3d"; }

std::optional<IouKind> parse_iou_kind(std::string_view name) {
  if (name == "bev") return IouKind::kBev;
  if (name == "3d") return IouKind::k3d;
  return std::nullopt;
}

void validate(const Box3D& box) {
  const auto fail = [](const std::string& what) { throw std::invalid_argument("invalid box: " + what); };
  for (double v : {box.cx, box.cy, box.cz, box.length, box.width, box.height, box.heading, box.score}) {
    if (!std::isfinite(v)) fail("non-finite field");
  }
  if (box.length <= 0.0) fail("length must be > 0");
  if (box.width <= 0.0) fail("width must be > 0");
  if (box.height <= 0.0) fail("height must be > 0");
  if (!(box.heading > -kPi && box.heading <= kPi)) fail("heading outside (-pi, pi]");
  if (box.score < 0.0 || box.score > 1.0) fail("score outside [0, 1]");
  if (box.track_id && *box.track_id < 0) fail("negative track_id");
  if (box.difficulty && *box.difficulty != 1 && *box.difficulty != 2) fail("difficulty must be 1 or 2");
  if (box.num_points && *box.num_points < 0) fail("negative num_points");
}

double wrap_angle(double theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("wrap_angle: non-finite angle");
  double r = std::remainder(theta, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  if (r > kPi) r -= 2.0 * kPi;
  return r;
}

double heading_error(double a, double b) { return std::abs(wrap_angle(a - b)); }

std::array<Vec2, 4> bev_corners(const Box3D& box) {
  const double c = std::cos(box.heading);
  const double s = std::sin(box.heading);
  const double hl = 0.5 * box.length;
  const double hw = 0.5 * box.width;
  const std::array<Vec2, 4> local = {{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
  std::array<Vec2, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {box.cx + c * local[i].x - s * local[i].y, box.cy + s * local[i].x + c * local[i].y};
  }
  return out;
}

bool contains_bev(const Box3D& box, Vec2 point) {
  const double dx = point.x - box.cx;
  const double dy = point.y - box.cy;
  const double c = std::cos(box.heading);
  const double s = std::sin(box.heading);
  const double along = c * dx + s * dy;
  const double across = -s * dx + c * dy;
  return std::abs(along) <= 0.5 * box.length && std::abs(across) <= 0.5 * box.width;
}

double polygon_area(const std::vector<Vec2>& polygon) {
  if (polygon.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Vec2& p = polygon[i];
    const Vec2& q = polygon[(i + 1) % polygon.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  return 0.5 * std::abs(twice);
}

std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip) {
  std::vector<Vec2> output = subject;
  for (std::size_t e = 0; e < clip.size() && !output.empty(); ++e) {
    const Vec2 a = clip[e];
    const Vec2 b = clip[(e + 1) % clip.size()];
    std::vector<Vec2> input;
    input.swap(output);
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vec2 p = input[i];
      const Vec2 q = input[(i + 1) % input.size()];
      const bool p_in = cross(a, b, p) >= 0.0;
      const bool q_in = cross(a, b, q) >= 0.0;
      if (p_in) output.push_back(p);
      if (p_in != q_in) output.push_back(line_intersection(p, q, a, b));
    }
  }
  return output;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  const double reach = 0.5 * (std::hypot(a.length, a.width) + std::hypot(b.length, b.width));
  if (std::hypot(a.cx - b.cx, a.cy - b.cy) > reach) return 0.0;
  const double area = polygon_area(clip_convex({ca.begin(), ca.end()}, {cb.begin(), cb.end()}));
  return area < kMinArea ? 0.0 : area;
}

double bev_iou(const Box3D& a, const Box3D& b) {
  if (same_footprint(a, b)) return 1.0;
  const double inter = bev_intersection_area(a, b);
  const double uni = a.length * a.width + b.length * b.width - inter;
  if (uni < kMinArea) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou3d(const Box3D& a, const Box3D& b) {
  if (same_footprint(a, b) && a.cz == b.cz && a.height == b.height) return 1.0;
  const double top = std::min(a.cz + 0.5 * a.height, b.cz + 0.5 * b.height);
  const double bottom = std::max(a.cz - 0.5 * a.height, b.cz - 0.5 * b.height);
  const double overlap_z = top - bottom;
  if (overlap_z <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b) * overlap_z;
  const double uni =
      a.length * a.width * a.height + b.length * b.width * b.height - inter;
  if (uni < kMinArea) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace lidarpost
