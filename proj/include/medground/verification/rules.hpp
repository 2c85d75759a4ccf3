#pragma once

#include <string>
#include <vector>

#include "medground/synthesis/generation.hpp"
#include "medground/verification/lexicon.hpp"

namespace medground {

namespace reason {
inline constexpr const char* kOk = "ok";
inline constexpr const char* kSizeMismatch = "size_mismatch";
inline constexpr const char* kLocationMismatch = "location_mismatch";
inline constexpr const char* kDomainLeak = "domain_leak";
inline constexpr const char* kNotGrounded = "not_grounded";
inline constexpr const char* kAmbiguous = "ambiguous";
inline constexpr const char* kJudgeMalformed = "judge_malformed";
inline constexpr const char* kJudgeUnavailable = "judge_unavailable";
}  // namespace reason

struct StageOutcome {
  Stage stage = Stage::kFormat;
  bool passed = false;
  std::string reason;
  std::string detail;

  static StageOutcome pass(Stage s) { return {s, true, reason::kOk, ""}; }
  static StageOutcome fail(Stage s, std::string code, std::string detail) {
    return {s, false, std::move(code), std::move(detail)};
  }

  friend bool operator==(const StageOutcome&, const StageOutcome&) = default;
};

/// Stage I: the response must survive parse_generation; the reason code is the
/// parse error code.
inline StageOutcome stage1_format(std::string_view raw, const CandidatePool& pool) {
  auto q = parse_generation(raw, pool);
  if (q) return StageOutcome::pass(Stage::kFormat);
  return StageOutcome::fail(Stage::kFormat, q.error().code, q.error().message);
}

/// True when the phrase names the opposite extreme of a target bin. Center and
/// middle targets never contradict.
inline bool contradicts(const SpatialConstraint& c, const RegionAttributes& a) {
  if (c.horiz && a.horiz_bin != HorizBin::kCenter && a.horiz_bin != *c.horiz) return true;
  if (c.vert && a.vert_bin != VertBin::kMiddle && a.vert_bin != *c.vert) return true;
  return false;
}

/// Stage II: size adjectives and spatial phrases must each be satisfiable by
/// at least one selected target, and no deny-list term may appear.
inline StageOutcome stage2_rules(const SynthesizedQuery& q, const CandidatePool& pool,
                                 const LexiconSet& lex) {
  const auto tokens = match_tokens(q.question);
  std::vector<const RegionAttributes*> targets;
  for (int i : q.target_indices) targets.push_back(&pool.entries.at(static_cast<std::size_t>(i)).attributes);

  for (const auto& hit : lex.size_terms().find(tokens)) {
    bool ok = false;
    for (const auto* a : targets) ok = ok || a->size_bucket == hit.value;
    if (!ok) {
      std::string got;
      for (const auto* a : targets) got += (got.empty() ? "" : ",") + std::string(to_string(a->size_bucket));
      return StageOutcome::fail(Stage::kRules, reason::kSizeMismatch,
                                "'" + hit.phrase + "' implies " + std::string(to_string(hit.value)) +
                                    " but target size is " + got);
    }
  }
  for (const auto& hit : lex.spatial_terms().find(tokens)) {
    bool ok = false;
    for (const auto* a : targets) ok = ok || !contradicts(hit.value, *a);
    if (!ok) {
      std::string got;
      for (const auto* a : targets)
        got += (got.empty() ? "" : ",") + std::string(to_string(a->horiz_bin)) + "/" +
               std::string(to_string(a->vert_bin));
      return StageOutcome::fail(Stage::kRules, reason::kLocationMismatch,
                                "'" + hit.phrase + "' contradicts target position " + got);
    }
  }
  auto leaks = lex.deny_terms(pool.image.modality).find(tokens);
  if (!leaks.empty())
    return StageOutcome::fail(Stage::kRules, reason::kDomainLeak,
                              "'" + leaks.front().phrase + "' is not a " +
                                  std::string(to_string(pool.image.modality)) + " term");
  return StageOutcome::pass(Stage::kRules);
}

}  // namespace medground
