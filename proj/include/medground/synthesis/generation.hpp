#pragma once

#include <set>
#include <string>
#include <vector>

#include "medground/mask/candidate_pool.hpp"

namespace medground {

struct SynthesizedQuery {
  std::string question;
  std::vector<int> target_indices;
  std::vector<NormBox> boxes;

  friend bool operator==(const SynthesizedQuery&, const SynthesizedQuery&) = default;
};

inline std::string serialize_generation(const SynthesizedQuery& q) {
  Json j;
  j["question"] = q.question;
  j["target_indices"] = q.target_indices;
  Json boxes = Json::array();
  for (const NormBox& b : q.boxes) boxes.push_back(box_to_json(b));
  j["boxes"] = std::move(boxes);
  return dump_compact(j);
}

/// Strict parse of a generator response: exactly one JSON object with exactly
/// the keys question, target_indices and boxes, where every echoed box equals
/// the pool box at the matching index.
///
/// Error codes: syntax, missing_key, extra_key, empty_question, invalid_index,
/// box_mismatch.
inline Result<SynthesizedQuery> parse_generation(std::string_view raw, const CandidatePool& pool) {
  Json j = Json::parse(raw.begin(), raw.end(), nullptr, false);
  if (j.is_discarded()) return make_error("syntax", "syntax error");
  if (!j.is_object()) return make_error("syntax", "syntax error: response is not a JSON object");
  for (const char* key : {"question", "target_indices", "boxes"}) {
    if (!j.contains(key)) return make_error("missing_key", std::string("missing key: ") + key);
  }
  if (j.size() != 3) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() != "question" && it.key() != "target_indices" && it.key() != "boxes")
        return make_error("extra_key", "extra key: " + it.key());
    }
  }
  SynthesizedQuery q;
  if (!j["question"].is_string()) return make_error("syntax", "question must be a string");
  q.question = j["question"].get<std::string>();
  if (trim(q.question).empty()) return make_error("empty_question", "empty question");

  const Json& idx = j["target_indices"];
  if (!idx.is_array()) return make_error("syntax", "target_indices must be an array");
  if (idx.empty()) return make_error("invalid_index", "no target indices");
  std::set<int> seen;
  for (const Json& v : idx) {
    if (!v.is_number_integer()) return make_error("syntax", "target index must be an integer");
    const auto i = v.get<std::int64_t>();
    if (i < 0 || i >= static_cast<std::int64_t>(pool.size()))
      return make_error("invalid_index", "index out of range");
    if (!seen.insert(static_cast<int>(i)).second)
      return make_error("invalid_index", "duplicate target index");
    q.target_indices.push_back(static_cast<int>(i));
  }

  const Json& boxes = j["boxes"];
  if (!boxes.is_array()) return make_error("syntax", "boxes must be an array");
  if (boxes.size() != q.target_indices.size())
    return make_error("box_mismatch", "box mismatch: boxes and target_indices differ in length");
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    auto b = box_from_json(boxes[k]);
    if (!b) return make_error("box_mismatch", "box mismatch: box must be four integers");
    if (*b != pool.entries[static_cast<std::size_t>(q.target_indices[k])].box)
      return make_error("box_mismatch", "box mismatch");
    q.boxes.push_back(*b);
  }
  return q;
}

}  // namespace medground
