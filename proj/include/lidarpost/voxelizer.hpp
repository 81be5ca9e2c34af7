#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "lidarpost/pointcloud.hpp"

namespace lidarpost {

struct VoxelConfig {
  RangeSpec range;
  double vx = 0.1;
  double vy = 0.1;
  double vz = 0.15;
  // Hard mode only. Typical caps for this voxel size.
  int max_points_per_voxel = 5;
  int max_voxels = 150000;

  void validate() const;
  /// Number of voxels along x, y, z.
  std::array<std::int32_t, 3> grid_size() const;
  bool operator==(const VoxelConfig&) const = default;
};

struct VoxelKey {
  std::int32_t ix = 0;
  std::int32_t iy = 0;
  std::int32_t iz = 0;

  auto operator<=>(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(k.ix);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(k.iy);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(k.iz);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

/// Grid cell of a point, or nullopt when the point lies outside the range.
/// Points on an upper bound land in the last cell.
std::optional<VoxelKey> voxel_index(const TimedPoint& p, const VoxelConfig& cfg);

/// Mean over (x, y, z, intensity, t).
using VoxelFeature = std::array<double, 5>;

struct Voxel {
  VoxelKey key;
  std::vector<TimedPoint> points;  // arrival order
  VoxelFeature mean{};

  std::size_t count() const { return points.size(); }
};

enum class VoxelMode { kHard, kDynamic };

struct VoxelGrid {
  VoxelMode mode = VoxelMode::kDynamic;
  std::vector<Voxel> voxels;  // creation order
  std::size_t dropped_points = 0;
  std::size_t dropped_voxels = 0;
  std::size_t out_of_range = 0;

  const Voxel* find(const VoxelKey& key) const;
  std::size_t stored_points() const;

 private:
  friend VoxelGrid voxelize_dynamic(const PointCloud&, const VoxelConfig&);
  friend VoxelGrid voxelize_hard(const PointCloud&, const VoxelConfig&);
  std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> index_;
};

/// Uncapped: every in-range point is stored.
VoxelGrid voxelize_dynamic(const PointCloud& cloud, const VoxelConfig& cfg);

/// Capped at max_points_per_voxel per cell and max_voxels cells, both
/// filled in arrival order. Overflow points count towards dropped_points;
/// each distinct refused cell counts once towards dropped_voxels.
VoxelGrid voxelize_hard(const PointCloud& cloud, const VoxelConfig& cfg);

}  // namespace lidarpost
