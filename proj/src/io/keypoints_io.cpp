#include <cmath>

#include "ctnet/errors.hpp"
#include "ctnet/io.hpp"

namespace ctnet {
namespace {

double number_at(const Json& doc, const std::string& key, const std::string& path) {
  if (!doc.contains(key)) throw ParseError(path + "." + key + ": missing");
  const Json& v = doc.at(key);
  if (!v.is_number()) throw ParseError(path + "." + key + ": expected a number");
  return v.get<double>();
}

std::size_t extent_at(const Json& doc, const std::string& key) {
  if (!doc.contains(key)) throw ParseError(key + ": missing");
  const Json& v = doc.at(key);
  if (!v.is_number_integer() || v.get<long long>() <= 0) throw ParseError(key + ": expected a positive integer");
  return v.get<std::size_t>();
}

}  // namespace

KeypointSet keypoints_from_json(const Json& doc) {
  if (!doc.is_object()) throw ParseError("keypoints: expected an object");
  const std::size_t width = extent_at(doc, "width");
  const std::size_t height = extent_at(doc, "height");
  if (!doc.contains("joints") || !doc.at("joints").is_array()) throw ParseError("joints: expected an array");
  const Json& joints = doc.at("joints");
  if (joints.size() != kJointCount) {
    throw ParseError("joints: expected 18 entries, got " + std::to_string(joints.size()));
  }
  std::array<std::optional<Joint>, kJointCount> parsed;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const std::string path = "joints[" + std::to_string(j) + "]";
    const Json& e = joints[j];
    if (e.is_null()) continue;
    if (!e.is_object()) throw ParseError(path + ": expected an object or null");
    if (!e.contains("name") || !e.at("name").is_string()) throw ParseError(path + ".name: expected a string");
    const std::string name = e.at("name").get<std::string>();
    const auto index = joint_index(name);
    if (!index) throw ParseError(path + ".name: unknown joint '" + name + "'");
    if (*index != j) {
      throw ParseError(path + ".name: expected '" + std::string(kJointNames[j]) + "' at this position, got '" + name + "'");
    }
    Joint p{number_at(e, "x", path), number_at(e, "y", path), number_at(e, "c", path)};
    if (!(p.x >= 0.0 && p.x < static_cast<double>(width))) throw ParseError(path + ".x: outside [0, width)");
    if (!(p.y >= 0.0 && p.y < static_cast<double>(height))) throw ParseError(path + ".y: outside [0, height)");
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) throw ParseError(path + ".c: outside [0, 1]");
    parsed[j] = p;
  }
  return KeypointSet(width, height, parsed);
}

Json keypoints_to_json(const KeypointSet& k) {
  Json joints = Json::array();
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const auto& p = k.joint(j);
    if (!p) {
      joints.push_back(nullptr);
    } else {
      joints.push_back({{"name", kJointNames[j]}, {"x", p->x}, {"y", p->y}, {"c", p->confidence}});
    }
  }
  return {{"width", k.width()}, {"height", k.height()}, {"joints", joints}};
}

KeypointSet load_keypoints(const fs::path& path) {
  const Json doc = parse_json(read_text(path), path.string());
  try {
    return keypoints_from_json(doc);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace ctnet
