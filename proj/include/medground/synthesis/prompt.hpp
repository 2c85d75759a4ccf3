#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "medground/core/rng.hpp"
#include "medground/mask/candidate_pool.hpp"
#include "medground/synthesis/profile.hpp"

namespace medground {

/// Seeded choice of target indices: k ~ U{1..min(max_targets, |pool|)}, then k
/// distinct indices, returned ascending.
inline std::vector<int> select_targets(std::size_t pool_size, std::uint64_t seed, int max_targets) {
  if (pool_size == 0) return {};
  SplitMix64 rng(seed);
  const auto upper = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, max_targets)),
                                           pool_size);
  const std::size_t k = 1 + rng.below(upper);
  std::vector<int> idx(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) idx[i] = static_cast<int>(i);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(pool_size - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct PromptBundle {
  std::string system_prompt;
  std::string user_prompt;
  ImageRef image;
  std::string category;
  std::string candidates_json;  // [{"index":i,"box":[...],"attributes":{...}}, ...]
  std::vector<int> target_indices;
  std::vector<std::string> preferred_terms;
  std::string target_noun;
  std::string target_noun_plural;
  std::vector<std::uint8_t> image_png;  // attached only for backends that send pixels
};

inline std::string candidates_to_json(const CandidatePool& pool) {
  Json arr = Json::array();
  for (std::size_t i = 0; i < pool.entries.size(); ++i) {
    Json e;
    e["index"] = i;
    e["box"] = box_to_json(pool.entries[i].box);
    e["attributes"] = attributes_to_json(pool.entries[i].attributes);
    arr.push_back(std::move(e));
  }
  return dump_compact(arr);
}

namespace detail {

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

}  // namespace detail

inline std::string describe_candidate(std::size_t index, const CandidateEntry& e) {
  const RegionAttributes& a = e.attributes;
  std::ostringstream os;
  os << '[' << index << "] box=[" << e.box.x_min << ',' << e.box.y_min << ',' << e.box.x_max << ','
     << e.box.y_max << "] area=" << detail::fixed(100.0 * a.area_ratio, 2)
     << "% size=" << to_string(a.size_bucket) << " width=" << a.width_px
     << "px height=" << a.height_px << "px aspect=" << detail::fixed(a.aspect_ratio, 2)
     << " elongation=" << detail::fixed(a.elongation, 2)
     << " compactness=" << detail::fixed(a.compactness, 2) << " centroid=("
     << detail::fixed(a.centroid_x, 3) << ',' << detail::fixed(a.centroid_y, 3)
     << ") position=" << to_string(a.horiz_bin) << '/' << to_string(a.vert_bin);
  return os.str();
}

/// Assembles the generation prompt: role, task, authoring constraints,
/// terminology guidance with the deny list, examples, and the response schema.
inline PromptBundle build_prompt(const CandidatePool& pool, const std::vector<int>& targets,
                                 const ModalityProfile& profile) {
  const std::string modality(to_string(pool.image.modality));
  std::ostringstream sys;
  sys << "You are an expert in " << modality
      << " medical image analysis who writes referring questions for a visual grounding "
         "dataset.\n\n"
      << "## Task\n"
      << "You receive one " << modality
      << " image and a numbered list of candidate target regions derived from expert "
         "segmentation masks. Each candidate has a bounding box [x_min, y_min, x_max, y_max] on a "
         "1000 x 1000 grid and mask-derived attributes. Write one question that refers to the "
         "selected target region(s) so that a reader can locate exactly those regions and no "
         "others.\n\n"
      << "## Requirements\n"
      << "1. Reflect visible properties of the target only: shape, texture and boundary "
         "appearance.\n"
      << "2. Incorporate location cues (for example upper left, near another region) when they "
         "are needed to tell the target apart from the other candidates.\n"
      << "3. Use appropriate medical terminology and avoid claims that cannot be justified from "
         "the image, such as etiology, pathology stage or non-visible symptoms.\n"
      << "4. Size words must agree with the target's size bucket and location words with its "
         "position bins.\n\n"
      << "## Terminology\n"
      << profile.terminology_guidance << "\n"
      << "Preferred descriptors: " << detail::join_list(profile.allowed_keywords) << "\n"
      << "Never use these terms: " << detail::join_list(profile.denied_keywords) << "\n\n"
      << "## Example phrasings\n";
  for (const auto& ex : profile.example_phrasings) sys << "- " << ex << "\n";
  sys << "\n## Output format\n"
      << "Respond with a single JSON object and nothing else:\n"
      << R"({"question": "<referring question>", "target_indices": [<selected indices>], )"
      << R"("boxes": [[x_min, y_min, x_max, y_max], ...]})" << "\n"
      << "Copy each box exactly from the selected candidates, in the same order as "
         "target_indices.\n";

  std::ostringstream user;
  user << "Modality: " << modality << "\n"
       << "Dataset: " << pool.image.dataset << "\n";
  if (!pool.category.empty()) user << "Category: " << pool.category << "\n";
  user << "Candidates (" << pool.entries.size() << "):\n";
  for (std::size_t i = 0; i < pool.entries.size(); ++i)
    user << describe_candidate(i, pool.entries[i]) << "\n";
  user << "Selected targets: [";
  for (std::size_t i = 0; i < targets.size(); ++i) user << (i ? "," : "") << targets[i];
  user << "]\nWrite the question for the selected target(s).";

  PromptBundle b;
  b.system_prompt = sys.str();
  b.user_prompt = user.str();
  b.image = pool.image;
  b.category = pool.category;
  b.candidates_json = candidates_to_json(pool);
  b.target_indices = targets;
  b.preferred_terms = profile.allowed_keywords;
  b.target_noun = profile.target_noun;
  b.target_noun_plural = profile.target_noun_plural;
  return b;
}

}  // namespace medground
