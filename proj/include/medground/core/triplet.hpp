#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "medground/core/box.hpp"
#include "medground/core/result.hpp"

namespace medground {

using Json = nlohmann::ordered_json;

enum class Modality { kCT, kUltrasound, kDermoscopy, kNuclei, kBacteria };

inline constexpr std::array<Modality, 5> kAllModalities = {
    Modality::kCT, Modality::kUltrasound, Modality::kDermoscopy, Modality::kNuclei,
    Modality::kBacteria};

inline std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kCT: return "CT";
    case Modality::kUltrasound: return "Ultrasound";
    case Modality::kDermoscopy: return "Dermoscopy";
    case Modality::kNuclei: return "Nuclei";
    case Modality::kBacteria: return "Bacteria";
  }
  return "?";
}

inline std::optional<Modality> parse_modality(std::string_view s) {
  for (Modality m : kAllModalities) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

/// Lower-case file-name stem used for per-modality data files.
inline std::string modality_slug(Modality m) {
  std::string out(to_string(m));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct ImageRef {
  std::string dataset;
  std::string path;  // relative to the image root
  int width = 0;
  int height = 0;
  Modality modality = Modality::kCT;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

/// Pipeline stages in the order they may appear in a stage log.
enum class Stage { kFormat, kRules, kJudge, kAudit };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kFormat: return "format";
    case Stage::kRules: return "rules";
    case Stage::kJudge: return "judge";
    case Stage::kAudit: return "audit";
  }
  return "?";
}

inline std::optional<Stage> parse_stage(std::string_view s) {
  for (Stage st : {Stage::kFormat, Stage::kRules, Stage::kJudge, Stage::kAudit}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

struct StageRecord {
  Stage stage = Stage::kFormat;
  bool passed = false;
  std::string reason;

  friend bool operator==(const StageRecord&, const StageRecord&) = default;
};

struct ReferringTriplet {
  std::string id;
  ImageRef image;
  std::string query;
  std::vector<NormBox> answer_boxes;
  int candidate_count = 1;
  std::string generator;
  std::vector<StageRecord> stage_log;

  friend bool operator==(const ReferringTriplet&, const ReferringTriplet&) = default;
};

/// First violated invariant, or nullopt when the triplet is valid.
inline std::optional<Error> validate_triplet(const ReferringTriplet& t) {
  if (t.id.empty()) return make_error("empty_id", "empty id");
  if (t.image.width <= 0 || t.image.height <= 0)
    return make_error("bad_dims", "image dimensions must be positive");
  if (t.query.empty()) return make_error("empty_query", "empty query");
  if (t.answer_boxes.empty()) return make_error("empty_boxes", "empty answer_boxes");
  for (const NormBox& b : t.answer_boxes) {
    for (int c : {b.x_min, b.y_min, b.x_max, b.y_max}) {
      if (c < 0 || c > NormBox::kGrid)
        return make_error("box_range", "box coordinate out of range");
    }
    if (!b.valid()) return make_error("box_order", "box min must be below max");
  }
  if (t.candidate_count < 1) return make_error("candidate_count", "candidate_count must be >= 1");
  if (static_cast<int>(t.answer_boxes.size()) > t.candidate_count)
    return make_error("candidate_count", "answer_boxes exceed candidate_count");
  int last = -1;
  for (const StageRecord& r : t.stage_log) {
    if (static_cast<int>(r.stage) <= last)
      return make_error("stage_order", "stage_log out of pipeline order");
    last = static_cast<int>(r.stage);
  }
  return std::nullopt;
}

inline Json box_to_json(const NormBox& b) {
  return Json::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

inline Json triplet_to_json(const ReferringTriplet& t) {
  Json j;
  j["id"] = t.id;
  j["dataset"] = t.image.dataset;
  j["image"] = t.image.path;
  j["width"] = t.image.width;
  j["height"] = t.image.height;
  j["modality"] = std::string(to_string(t.image.modality));
  j["query"] = t.query;
  Json boxes = Json::array();
  for (const NormBox& b : t.answer_boxes) boxes.push_back(box_to_json(b));
  j["boxes"] = std::move(boxes);
  j["candidate_count"] = t.candidate_count;
  j["generator"] = t.generator;
  Json log = Json::array();
  for (const StageRecord& r : t.stage_log) {
    Json e;
    e["stage"] = std::string(to_string(r.stage));
    e["passed"] = r.passed;
    e["reason"] = r.reason;
    log.push_back(std::move(e));
  }
  j["stage_log"] = std::move(log);
  return j;
}

inline std::string dump_compact(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

/// One JSONL line, fixed key order, no trailing newline.
inline std::string serialize_triplet(const ReferringTriplet& t) {
  return dump_compact(triplet_to_json(t));
}

namespace detail {

inline const Json* require_key(const Json& j, const char* key, Error& err) {
  auto it = j.find(key);
  if (it == j.end()) {
    err = make_error("missing_key", std::string("missing key: ") + key);
    return nullptr;
  }
  return &*it;
}

}  // namespace detail

/// Reads a four-integer JSON array into a box without checking ordering.
inline std::optional<NormBox> box_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) return std::nullopt;
  std::array<int, 4> v{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j[i].is_number_integer()) return std::nullopt;
    const auto raw = j[i].get<std::int64_t>();
    if (raw < -1'000'000 || raw > 1'000'000) return std::nullopt;
    v[i] = static_cast<int>(raw);
  }
  return NormBox{v[0], v[1], v[2], v[3]};
}

inline Result<ReferringTriplet> triplet_from_json(const Json& j) {
  if (!j.is_object()) return make_error("syntax", "malformed syntax: record is not an object");
  static constexpr std::array<const char*, 11> kKeys = {
      "id", "dataset", "image", "width", "height", "modality",
      "query", "boxes", "candidate_count", "generator", "stage_log"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::find(kKeys.begin(), kKeys.end(), it.key()) != kKeys.end();
    if (!known && it.key() != "audit")
      return make_error("unknown_key", "unknown key: " + it.key());
  }
  Error err;
  const Json* v = nullptr;
  ReferringTriplet t;
  auto get_string = [&](const char* key, std::string& out) {
    if (!(v = detail::require_key(j, key, err))) return false;
    if (!v->is_string()) {
      err = make_error("type", std::string("key ") + key + " must be a string");
      return false;
    }
    out = v->get<std::string>();
    return true;
  };
  auto get_int = [&](const char* key, int& out) {
    if (!(v = detail::require_key(j, key, err))) return false;
    if (!v->is_number_integer()) {
      err = make_error("type", std::string("key ") + key + " must be an integer");
      return false;
    }
    out = v->get<int>();
    return true;
  };
  std::string modality;
  if (!get_string("id", t.id) || !get_string("dataset", t.image.dataset) ||
      !get_string("image", t.image.path) || !get_int("width", t.image.width) ||
      !get_int("height", t.image.height) || !get_string("modality", modality) ||
      !get_string("query", t.query)) {
    return err;
  }
  auto m = parse_modality(modality);
  if (!m) return make_error("modality", "unknown modality: " + modality);
  t.image.modality = *m;

  if (!(v = detail::require_key(j, "boxes", err))) return err;
  if (!v->is_array()) return make_error("type", "key boxes must be an array");
  for (const Json& jb : *v) {
    auto b = box_from_json(jb);
    if (!b) return make_error("box_shape", "box must be four integers");
    t.answer_boxes.push_back(*b);
  }
  if (!get_int("candidate_count", t.candidate_count) || !get_string("generator", t.generator))
    return err;

  if (!(v = detail::require_key(j, "stage_log", err))) return err;
  if (!v->is_array()) return make_error("type", "key stage_log must be an array");
  for (const Json& e : *v) {
    if (!e.is_object() || !e.contains("stage") || !e.contains("passed") ||
        !e.contains("reason") || !e["stage"].is_string() || !e["passed"].is_boolean() ||
        !e["reason"].is_string())
      return make_error("stage_log", "malformed stage_log entry");
    auto st = parse_stage(e["stage"].get<std::string>());
    if (!st) return make_error("stage_log", "unknown stage: " + e["stage"].get<std::string>());
    t.stage_log.push_back({*st, e["passed"].get<bool>(), e["reason"].get<std::string>()});
  }
  if (auto bad = validate_triplet(t)) return *bad;
  return t;
}

inline Result<ReferringTriplet> parse_triplet(std::string_view line) {
  Json j = Json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded()) return make_error("syntax", "malformed syntax");
  return triplet_from_json(j);
}

}  // namespace medground
