#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lidarpost/ensemble.hpp"
#include "lidarpost/pointcloud.hpp"

namespace lidarpost {

/// Input problem: unreadable file, malformed record or violated invariant.
class IoError : public std::runtime_error {
 public:
  enum class Kind { kIo, kParse, kValidation, kFormat };

  IoError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Parsed JSONL box file, grouped by frame.
struct BoxFile {
  std::map<std::string, DetectionSet> frames;
  std::map<std::string, std::vector<std::size_t>> lines;  // 1-based, parallel to frames[id].boxes
  std::vector<std::string> first_seen;

  /// Frames ordered by timestamp, then by first appearance in the file.
  std::vector<DetectionSet> ordered() const;
};

/// One JSON object per line. Required keys: frame_id, cx, cy, cz, l, w, h,
/// heading, label. Optional: timestamp (0), score (1), track_id,
/// difficulty, num_points, source_id. Unknown keys are ignored.
BoxFile parse_boxes(std::istream& in);
BoxFile read_boxes(const std::filesystem::path& path);

void write_boxes(std::ostream& out, std::span<const DetectionSet> frames);
void write_boxes(const std::filesystem::path& path, std::span<const DetectionSet> frames);

/// Little-endian float32 records of (x, y, z, intensity) or
/// (x, y, z, intensity, t). With 4 channels t is 0.
PointCloud read_points(const std::filesystem::path& path, int channels);
PointCloud decode_points(std::span<const std::byte> bytes, int channels);

void write_points(const std::filesystem::path& path, const PointCloud& cloud, int channels);
std::vector<std::byte> encode_points(const PointCloud& cloud, int channels);

}  // namespace lidarpost
