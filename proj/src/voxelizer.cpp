#include "lidarpost/voxelizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace lidarpost {

namespace {

std::int32_t cells_along(double extent, double edge) {
  const double ratio = extent / edge;
  const double nearest = std::round(ratio);
  // 150.4 / 0.1 is 1504.0000000000002 in binary; don't let that spill a cell.
  const double n = std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest) ? nearest : std::ceil(ratio);
  if (n > static_cast<double>(std::numeric_limits<std::int32_t>::max())) {
    throw std::invalid_argument("voxel grid dimension overflows int32");
  }
  return static_cast<std::int32_t>(std::max(1.0, n));
}

std::int32_t cell(double value, double origin, double edge, std::int32_t n) {
  const auto i = static_cast<std::int64_t>(std::floor((value - origin) / edge));
  return static_cast<std::int32_t>(std::clamp<std::int64_t>(i, 0, n - 1));
}

void finalize_means(VoxelGrid& grid) {
  for (Voxel& v : grid.voxels) {
    VoxelFeature sum{};
    for (const TimedPoint& p : v.points) {
      sum[0] += p.x;
      sum[1] += p.y;
      sum[2] += p.z;
      sum[3] += p.intensity;
      sum[4] += p.t;
    }
    const double n = static_cast<double>(v.points.size());
    for (std::size_t c = 0; c < sum.size(); ++c) v.mean[c] = sum[c] / n;
  }
}

}  // namespace

void VoxelConfig::validate() const {
  range.validate();
  if (!(vx > 0.0) || !(vy > 0.0) || !(vz > 0.0)) {
    throw std::invalid_argument("voxel edge lengths must be positive");
  }
  if (max_points_per_voxel < 1 || max_voxels < 1) {
    throw std::invalid_argument("voxel caps must be positive");
  }
  (void)grid_size();
}

std::array<std::int32_t, 3> VoxelConfig::grid_size() const {
  return {cells_along(range.x_max - range.x_min, vx), cells_along(range.y_max - range.y_min, vy),
          cells_along(range.z_max - range.z_min, vz)};
}

std::optional<VoxelKey> voxel_index(const TimedPoint& p, const VoxelConfig& cfg) {
  if (!cfg.range.contains(p.x, p.y, p.z)) return std::nullopt;
  const auto n = cfg.grid_size();
  return VoxelKey{cell(p.x, cfg.range.x_min, cfg.vx, n[0]), cell(p.y, cfg.range.y_min, cfg.vy, n[1]),
                  cell(p.z, cfg.range.z_min, cfg.vz, n[2])};
}

const Voxel* VoxelGrid::find(const VoxelKey& key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : &voxels[it->second];
}

std::size_t VoxelGrid::stored_points() const {
  std::size_t total = 0;
  for (const Voxel& v : voxels) total += v.count();
  return total;
}

VoxelGrid voxelize_dynamic(const PointCloud& cloud, const VoxelConfig& cfg) {
  cfg.validate();
  VoxelGrid grid;
  grid.mode = VoxelMode::kDynamic;
  for (const TimedPoint& p : cloud.points) {
    const auto key = voxel_index(p, cfg);
    if (!key) {
      ++grid.out_of_range;
      continue;
    }
    auto [it, inserted] = grid.index_.try_emplace(*key, grid.voxels.size());
    if (inserted) grid.voxels.push_back(Voxel{*key, {}, {}});
    grid.voxels[it->second].points.push_back(p);
  }
  finalize_means(grid);
  return grid;
}

VoxelGrid voxelize_hard(const PointCloud& cloud, const VoxelConfig& cfg) {
  cfg.validate();
  VoxelGrid grid;
  grid.mode = VoxelMode::kHard;
  std::unordered_set<VoxelKey, VoxelKeyHash> refused;
  const auto cap_points = static_cast<std::size_t>(cfg.max_points_per_voxel);
  const auto cap_voxels = static_cast<std::size_t>(cfg.max_voxels);
  for (const TimedPoint& p : cloud.points) {
    const auto key = voxel_index(p, cfg);
    if (!key) {
      ++grid.out_of_range;
      continue;
    }
    auto it = grid.index_.find(*key);
    if (it == grid.index_.end()) {
      if (grid.voxels.size() >= cap_voxels) {
        if (refused.insert(*key).second) ++grid.dropped_voxels;
        ++grid.dropped_points;
        continue;
      }
      it = grid.index_.emplace(*key, grid.voxels.size()).first;
      grid.voxels.push_back(Voxel{*key, {}, {}});
    }
    Voxel& v = grid.voxels[it->second];
    if (v.points.size() >= cap_points) {
      ++grid.dropped_points;
      continue;
    }
    v.points.push_back(p);
  }
  finalize_means(grid);
  return grid;
}

}  // namespace lidarpost
