#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ctnet/correspondence.hpp"
#include "ctnet/layout.hpp"
#include "ctnet/pose_fields.hpp"
#include "ctnet/tensor.hpp"
#include "ctnet/warping.hpp"

namespace ctnet {

namespace fs = std::filesystem;
using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Tensor files: "CTTN", version 1, dtype (0 f32, 1 f64), ndim, u32 extents,
// then the row-major payload, all little-endian.

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes, const std::string& origin = "<memory>");
void save_tensor(const Tensor& t, const fs::path& path);
Tensor load_tensor(const fs::path& path);

std::vector<std::uint8_t> read_bytes(const fs::path& path);
void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes);
void write_text(const fs::path& path, std::string_view text);
std::string read_text(const fs::path& path);

// ---------------------------------------------------------------------------
// Images

/// 8-bit PNG as H x W x C reals in [0, 1]; C is 1 for grey, 3 for colour
/// (alpha is dropped).
Tensor load_png(const fs::path& path);
/// Values are clamped to [0, 1] and rounded half-up to 8 bits. C must be 1 or 3.
void save_png(const Tensor& image, const fs::path& path);
/// Grey PNG as an H x W tensor of value / 255.
Tensor load_mask_png(const fs::path& path);
SegmentationMap load_label_png(const fs::path& path);
void save_label_png(const SegmentationMap& s, const fs::path& path);

/// PNG or tensor file by extension (.png / .cttn).
Tensor load_image_any(const fs::path& path);

// ---------------------------------------------------------------------------
// JSON documents

KeypointSet keypoints_from_json(const Json& doc);
Json keypoints_to_json(const KeypointSet& k);
KeypointSet load_keypoints(const fs::path& path);

Json grid_info_to_json(const GridInfo& g);
GridInfo grid_info_from_json(const Json& doc);

/// Scores go to `path`, grid metadata to `path` + ".json".
void save_correspondence(const CorrespondenceMatrix& m, const fs::path& path);
CorrespondenceMatrix load_correspondence(const fs::path& path);

Json control_grid_to_json(const ControlGrid& c);
ControlGrid control_grid_from_json(const Json& doc);
Json tps_to_json(const TpsTransform& t);
TpsTransform tps_from_json(const Json& doc);

Json parse_json(std::string_view text, const std::string& origin);
/// Sorted keys, two-space indent, trailing newline.
std::string dump_json(const Json& doc);

// ---------------------------------------------------------------------------
// Hashing

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const fs::path& path);

}  // namespace ctnet
