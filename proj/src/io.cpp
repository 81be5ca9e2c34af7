#include "lidarpost/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <cctype>
#include <optional>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace lidarpost {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "point files assume a little-endian host");

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

double number_field(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw IoError(IoError::Kind::kValidation, at_line(line) + "missing '" + key + "'");
  if (!it->is_number()) throw IoError(IoError::Kind::kValidation, at_line(line) + "'" + key + "' is not a number");
  return it->get<double>();
}

template <class T>
std::optional<T> optional_integer(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) {
    throw IoError(IoError::Kind::kValidation, at_line(line) + "'" + key + "' is not an integer");
  }
  return it->get<T>();
}

Box3D parse_record(const json& obj, std::size_t line, std::string& frame_id, double& timestamp) {
  if (!obj.is_object()) throw IoError(IoError::Kind::kParse, at_line(line) + "record is not a JSON object");
  auto fid = obj.find("frame_id");
  if (fid == obj.end() || !fid->is_string()) {
    throw IoError(IoError::Kind::kValidation, at_line(line) + "missing string 'frame_id'");
  }
  frame_id = fid->get<std::string>();
  timestamp = obj.contains("timestamp") ? number_field(obj, "timestamp", line) : 0.0;

  Box3D b;
  b.cx = number_field(obj, "cx", line);
  b.cy = number_field(obj, "cy", line);
  b.cz = number_field(obj, "cz", line);
  b.length = number_field(obj, "l", line);
  b.width = number_field(obj, "w", line);
  b.height = number_field(obj, "h", line);
  b.heading = number_field(obj, "heading", line);
  b.score = obj.contains("score") ? number_field(obj, "score", line) : 1.0;

  auto lab = obj.find("label");
  if (lab == obj.end() || !lab->is_string()) {
    throw IoError(IoError::Kind::kValidation, at_line(line) + "missing string 'label'");
  }
  const auto label = parse_label(lab->get<std::string>());
  if (!label) throw IoError(IoError::Kind::kValidation, at_line(line) + "unknown label '" + lab->get<std::string>() + "'");
  b.label = *label;

  b.track_id = optional_integer<std::int64_t>(obj, "track_id", line);
  b.difficulty = optional_integer<int>(obj, "difficulty", line);
  b.num_points = optional_integer<std::int64_t>(obj, "num_points", line);
  b.source_id = optional_integer<int>(obj, "source_id", line);

  try {
    validate(b);
  } catch (const std::invalid_argument& e) {
    throw IoError(IoError::Kind::kValidation, at_line(line) + e.what());
  }
  return b;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError(IoError::Kind::kIo, "cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError(IoError::Kind::kIo, "cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

std::vector<DetectionSet> BoxFile::ordered() const {
  std::vector<DetectionSet> out;
  out.reserve(first_seen.size());
  for (const std::string& id : first_seen) out.push_back(frames.at(id));
  std::stable_sort(out.begin(), out.end(),
                   [](const DetectionSet& a, const DetectionSet& b) { return a.timestamp < b.timestamp; });
  return out;
}

BoxFile parse_boxes(std::istream& in) {
  BoxFile file;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw IoError(IoError::Kind::kParse, at_line(line) + "malformed JSON: " + e.what());
    }
    std::string frame_id;
    double timestamp = 0.0;
    Box3D box = parse_record(obj, line, frame_id, timestamp);

    auto [it, inserted] = file.frames.try_emplace(frame_id);
    DetectionSet& set = it->second;
    if (inserted) {
      set.frame_id = frame_id;
      set.timestamp = timestamp;
      set.source_id = box.source_id.value_or(0);
      file.first_seen.push_back(frame_id);
    }
    set.boxes.push_back(std::move(box));
    file.lines[frame_id].push_back(line);
  }
  return file;
}

BoxFile read_boxes(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return parse_boxes(in);
  } catch (const IoError& e) {
    throw IoError(e.kind(), path.string() + ": " + e.what());
  }
}

void write_boxes(std::ostream& out, std::span<const DetectionSet> frames) {
  for (const DetectionSet& set : frames) {
    for (const Box3D& b : set.boxes) {
      ordered_json rec;
      rec["frame_id"] = set.frame_id;
      rec["timestamp"] = set.timestamp;
      rec["cx"] = b.cx;
      rec["cy"] = b.cy;
      rec["cz"] = b.cz;
      rec["l"] = b.length;
      rec["w"] = b.width;
      rec["h"] = b.height;
      rec["heading"] = b.heading;
      rec["score"] = b.score;
      rec["label"] = std::string(to_string(b.label));
      if (b.track_id) rec["track_id"] = *b.track_id;
      if (b.difficulty) rec["difficulty"] = *b.difficulty;
      if (b.num_points) rec["num_points"] = *b.num_points;
      if (b.source_id) rec["source_id"] = *b.source_id;
      out << rec.dump() << '\n';
    }
  }
}

void write_boxes(const std::filesystem::path& path, std::span<const DetectionSet> frames) {
  auto out = open_out(path);
  write_boxes(out, frames);
  if (!out) throw IoError(IoError::Kind::kIo, "failed writing '" + path.string() + "'");
}

PointCloud decode_points(std::span<const std::byte> bytes, int channels) {
  if (channels != 4 && channels != 5) throw std::invalid_argument("point channels must be 4 or 5");
  const std::size_t record = sizeof(float) * static_cast<std::size_t>(channels);
  if (bytes.size() % record != 0) {
    throw IoError(IoError::Kind::kFormat, "point payload of " + std::to_string(bytes.size()) +
                                              " bytes is not a multiple of the " + std::to_string(record) +
                                              "-byte record size");
  }
  PointCloud cloud;
  const std::size_t n = bytes.size() / record;
  cloud.points.reserve(n);
  float values[5] = {0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(values, bytes.data() + i * record, record);
    for (int c = 0; c < channels; ++c) {
      if (!std::isfinite(values[c])) {
        throw IoError(IoError::Kind::kValidation, "record " + std::to_string(i) + ": non-finite value");
      }
    }
    TimedPoint p{values[0], values[1], values[2], values[3], channels == 5 ? values[4] : 0.0f};
    if (p.t < 0.0) throw IoError(IoError::Kind::kValidation, "record " + std::to_string(i) + ": negative t");
    cloud.points.push_back(p);
  }
  return cloud;
}

PointCloud read_points(const std::filesystem::path& path, int channels) {
  auto in = open_in(path, std::ios::binary);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    PointCloud cloud = decode_points(std::as_bytes(std::span(raw)), channels);
    cloud.frame_id = path.stem().string();
    return cloud;
  } catch (const IoError& e) {
    throw IoError(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<std::byte> encode_points(const PointCloud& cloud, int channels) {
  if (channels != 4 && channels != 5) throw std::invalid_argument("point channels must be 4 or 5");
  const std::size_t record = sizeof(float) * static_cast<std::size_t>(channels);
  std::vector<std::byte> out(cloud.points.size() * record);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const TimedPoint& p = cloud.points[i];
    const float values[5] = {static_cast<float>(p.x), static_cast<float>(p.y), static_cast<float>(p.z),
                             static_cast<float>(p.intensity), static_cast<float>(p.t)};
    std::memcpy(out.data() + i * record, values, record);
  }
  return out;
}

void write_points(const std::filesystem::path& path, const PointCloud& cloud, int channels) {
  const auto bytes = encode_points(cloud, channels);
  auto out = open_out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(IoError::Kind::kIo, "failed writing '" + path.string() + "'");
}

}  // namespace lidarpost
