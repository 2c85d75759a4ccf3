#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "medground/core/triplet.hpp"
#include "medground/mask/attributes.hpp"
#include "medground/mask/components.hpp"
#include "medground/mask/mask.hpp"

namespace medground {

struct ExtractConfig {
  Connectivity connectivity = Connectivity::kEight;
  int min_component_pixels = 4;
};

struct CandidateEntry {
  NormBox box;
  RegionAttributes attributes;

  friend bool operator==(const CandidateEntry&, const CandidateEntry&) = default;
};

/// All ground-truth boxes of one image, in component order.
struct CandidatePool {
  ImageRef image;
  std::vector<CandidateEntry> entries;
  MaskMode mode = MaskMode::kBinary;
  std::string split = "train";
  std::string category;  // optional coarse label from the manifest

  [[nodiscard]] std::size_t size() const { return entries.size(); }

  friend bool operator==(const CandidatePool&, const CandidatePool&) = default;
};

/// Components of `mask` at or above the size threshold become pool entries.
inline Result<CandidatePool> derive_boxes(const InstanceMask& mask, const ImageRef& image,
                                          MaskMode mode, const ExtractConfig& config = {}) {
  auto comps = connected_components(mask, config.connectivity);
  if (!comps) return comps.error();
  CandidatePool pool;
  pool.image = image;
  pool.mode = mode;
  for (const Component& c : comps.value()) {
    if (static_cast<int>(c.size()) < config.min_component_pixels) continue;
    pool.entries.push_back({normalize_box(c.bounds, mask.width, mask.height),
                            compute_attributes(c, mask.width, mask.height)});
  }
  if (pool.entries.empty()) return make_error("no_targets", "no usable targets");
  return pool;
}

inline Json attributes_to_json(const RegionAttributes& a) {
  Json j;
  j["area_ratio"] = a.area_ratio;
  j["width_px"] = a.width_px;
  j["height_px"] = a.height_px;
  j["aspect_ratio"] = a.aspect_ratio;
  j["elongation"] = a.elongation;
  j["compactness"] = a.compactness;
  j["centroid_x"] = a.centroid_x;
  j["centroid_y"] = a.centroid_y;
  j["horiz_bin"] = std::string(to_string(a.horiz_bin));
  j["vert_bin"] = std::string(to_string(a.vert_bin));
  j["size_bucket"] = std::string(to_string(a.size_bucket));
  return j;
}

inline Result<RegionAttributes> attributes_from_json(const Json& j) {
  try {
    RegionAttributes a;
    a.area_ratio = j.at("area_ratio").get<double>();
    a.width_px = j.at("width_px").get<int>();
    a.height_px = j.at("height_px").get<int>();
    a.aspect_ratio = j.at("aspect_ratio").get<double>();
    a.elongation = j.at("elongation").get<double>();
    a.compactness = j.at("compactness").get<double>();
    a.centroid_x = j.at("centroid_x").get<double>();
    a.centroid_y = j.at("centroid_y").get<double>();
    auto h = parse_horiz_bin(j.at("horiz_bin").get<std::string>());
    auto v = parse_vert_bin(j.at("vert_bin").get<std::string>());
    auto s = parse_size_bucket(j.at("size_bucket").get<std::string>());
    if (!h || !v || !s) return make_error("attributes", "unknown bin or bucket value");
    a.horiz_bin = *h;
    a.vert_bin = *v;
    a.size_bucket = *s;
    return a;
  } catch (const Json::exception& e) {
    return make_error("attributes", std::string("malformed attributes: ") + e.what());
  }
}

inline Json pool_to_json(const CandidatePool& p) {
  Json j;
  j["dataset"] = p.image.dataset;
  j["image"] = p.image.path;
  j["width"] = p.image.width;
  j["height"] = p.image.height;
  j["modality"] = std::string(to_string(p.image.modality));
  j["split"] = p.split;
  j["mask_mode"] = std::string(to_string(p.mode));
  j["category"] = p.category;
  Json entries = Json::array();
  for (const CandidateEntry& e : p.entries) {
    Json je;
    je["box"] = box_to_json(e.box);
    je["attributes"] = attributes_to_json(e.attributes);
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  return j;
}

inline std::string serialize_pool(const CandidatePool& p) { return dump_compact(pool_to_json(p)); }

inline Result<CandidatePool> parse_pool(std::string_view line) {
  Json j = Json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return make_error("syntax", "malformed pool record");
  try {
    CandidatePool p;
    p.image.dataset = j.at("dataset").get<std::string>();
    p.image.path = j.at("image").get<std::string>();
    p.image.width = j.at("width").get<int>();
    p.image.height = j.at("height").get<int>();
    auto m = parse_modality(j.at("modality").get<std::string>());
    if (!m) return make_error("modality", "unknown modality");
    p.image.modality = *m;
    p.split = j.at("split").get<std::string>();
    auto mode = parse_mask_mode(j.at("mask_mode").get<std::string>());
    if (!mode) return make_error("mask_mode", "unknown mask mode");
    p.mode = *mode;
    p.category = j.at("category").get<std::string>();
    for (const Json& je : j.at("entries")) {
      auto box = box_from_json(je.at("box"));
      if (!box || !box->valid()) return make_error("box_range", "box coordinate out of range");
      auto attrs = attributes_from_json(je.at("attributes"));
      if (!attrs) return attrs.error();
      p.entries.push_back({*box, attrs.value()});
    }
    if (p.entries.empty()) return make_error("no_targets", "pool has no entries");
    return p;
  } catch (const Json::exception& e) {
    return make_error("missing_key", std::string("malformed pool record: ") + e.what());
  }
}

/// One line of the input manifest.
struct ManifestEntry {
  std::string dataset;
  Modality modality = Modality::kCT;
  std::string image_path;  // relative to the manifest directory
  std::string mask_path;
  MaskMode mask_mode = MaskMode::kBinary;
  std::string category;
  std::string split = "train";
};

inline Result<ManifestEntry> parse_manifest_entry(std::string_view line) {
  Json j = Json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return make_error("syntax", "malformed manifest line");
  static const std::vector<std::string> kAllowed = {"dataset", "modality", "image", "mask",
                                                    "mask_mode", "category", "split"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(kAllowed.begin(), kAllowed.end(), it.key()) == kAllowed.end())
      return make_error("unknown_key", "unknown manifest key: " + it.key());
  }
  ManifestEntry e;
  for (const char* key : {"dataset", "modality", "image", "mask", "mask_mode"}) {
    if (!j.contains(key) || !j[key].is_string())
      return make_error("missing_key", std::string("missing key: ") + key);
  }
  e.dataset = j["dataset"].get<std::string>();
  auto m = parse_modality(j["modality"].get<std::string>());
  if (!m) return make_error("modality", "unknown modality: " + j["modality"].get<std::string>());
  e.modality = *m;
  e.image_path = j["image"].get<std::string>();
  e.mask_path = j["mask"].get<std::string>();
  auto mode = parse_mask_mode(j["mask_mode"].get<std::string>());
  if (!mode) return make_error("mask_mode", "unknown mask mode");
  e.mask_mode = *mode;
  if (j.contains("category")) {
    if (!j["category"].is_string()) return make_error("type", "category must be a string");
    e.category = j["category"].get<std::string>();
  }
  if (j.contains("split")) {
    if (!j["split"].is_string()) return make_error("type", "split must be a string");
    e.split = j["split"].get<std::string>();
  }
  return e;
}

/// Reads a PNG header and returns (width, height) without decoding pixels.
inline Result<std::pair<int, int>> png_dimensions(std::span<const std::uint8_t> bytes) {
  // IHDR is always the first chunk: 8-byte signature, 4 length, 4 type, then w, h.
  if (!detail::has_png_signature(bytes) || bytes.size() < 24)
    return make_error("unreadable", "unreadable file: not a PNG");
  auto be32 = [&](std::size_t off) {
    return (static_cast<std::uint32_t>(bytes[off]) << 24) |
           (static_cast<std::uint32_t>(bytes[off + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[off + 2]) << 8) | bytes[off + 3];
  };
  return std::pair<int, int>{static_cast<int>(be32(16)), static_cast<int>(be32(20))};
}

/// Full stage-A work for one manifest line: decode, label, box, attribute.
inline Result<CandidatePool> extract_pool(const ManifestEntry& entry,
                                          const std::filesystem::path& root,
                                          const ExtractConfig& config) {
  std::vector<std::uint8_t> mask_bytes;
  std::vector<std::uint8_t> image_bytes;
  try {
    mask_bytes = read_binary_file((root / entry.mask_path).string());
    image_bytes = read_binary_file((root / entry.image_path).string());
  } catch (const DataError& e) {
    return make_error("unreadable", e.what());
  }
  auto mask = decode_mask(mask_bytes, entry.mask_mode);
  if (!mask) return mask.error();
  auto dims = png_dimensions(image_bytes);
  if (!dims) return dims.error();
  if (dims.value().first != mask.value().width || dims.value().second != mask.value().height)
    return make_error("dims_mismatch", "image and mask dimensions differ: " + entry.image_path);
  ImageRef ref{entry.dataset, entry.image_path, mask.value().width, mask.value().height,
               entry.modality};
  auto pool = derive_boxes(mask.value(), ref, entry.mask_mode, config);
  if (!pool) return pool.error();
  pool.value().split = entry.split;
  pool.value().category = entry.category;
  return pool;
}

}  // namespace medground
