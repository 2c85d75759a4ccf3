#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medground/core/text.hpp"
#include "medground/core/triplet.hpp"
#include "medground/mask/attributes.hpp"

namespace medground {

/// Bin requirement of a spatial phrase; an empty axis is unconstrained.
struct SpatialConstraint {
  std::optional<HorizBin> horiz;
  std::optional<VertBin> vert;
};

/// Term-list matcher that keeps one payload per phrase.
template <class Payload>
class TermTable {
 public:
  void add(const std::string& phrase, Payload value) {
    const std::size_t id = matcher_.add(phrase);
    if (id == PhraseMatcher::npos) return;
    if (id >= payloads_.size()) payloads_.resize(id + 1);
    payloads_[id] = std::move(value);
  }

  struct Hit {
    std::string phrase;
    Payload value;
  };

  [[nodiscard]] std::vector<Hit> find(const std::vector<std::string>& tokens) const {
    std::vector<Hit> out;
    for (const PhraseMatch& m : matcher_.find_all(tokens))
      out.push_back({matcher_.phrase(m.phrase_id), payloads_[m.phrase_id]});
    return out;
  }

  [[nodiscard]] std::size_t size() const { return matcher_.size(); }
  [[nodiscard]] std::vector<std::string> phrases() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < matcher_.size(); ++i) out.push_back(matcher_.phrase(i));
    return out;
  }

 private:
  PhraseMatcher matcher_;
  std::vector<Payload> payloads_;
};

/// Word lists driving the rule-based checks. Loaded from plain-text files:
///   size_adjectives.txt     term = tiny|small|medium|large
///   spatial_phrases.txt     phrase = left|center|right|*,upper|middle|lower|*
///   deny_<modality>.txt     one term per line
///   morphology_<modality>.txt
class LexiconSet {
 public:
  static LexiconSet load(const std::filesystem::path& dir) {
    LexiconSet lex;
    for (const std::string& line : read_data_lines((dir / "size_adjectives.txt").string())) {
      auto [term, value] = split_mapping(line, "size_adjectives.txt");
      auto bucket = parse_size_bucket(value);
      if (!bucket) throw ConfigError("size_adjectives.txt: unknown bucket '" + value + "'");
      lex.size_terms_.add(term, *bucket);
    }
    for (const std::string& line : read_data_lines((dir / "spatial_phrases.txt").string())) {
      auto [term, value] = split_mapping(line, "spatial_phrases.txt");
      const auto comma = value.find(',');
      if (comma == std::string::npos)
        throw ConfigError("spatial_phrases.txt: expected 'horiz,vert' for '" + term + "'");
      const std::string h = trim(value.substr(0, comma));
      const std::string v = trim(value.substr(comma + 1));
      SpatialConstraint c;
      if (h != "*") {
        c.horiz = parse_horiz_bin(h);
        if (!c.horiz) throw ConfigError("spatial_phrases.txt: unknown bin '" + h + "'");
      }
      if (v != "*") {
        c.vert = parse_vert_bin(v);
        if (!c.vert) throw ConfigError("spatial_phrases.txt: unknown bin '" + v + "'");
      }
      lex.spatial_terms_.add(term, c);
    }
    for (Modality m : kAllModalities) {
      const std::string slug = modality_slug(m);
      auto& deny = lex.deny_[m];
      for (const std::string& t : read_data_lines((dir / ("deny_" + slug + ".txt")).string()))
        deny.add(t, t);
      auto& morph = lex.morphology_[m];
      for (const std::string& t :
           read_data_lines((dir / ("morphology_" + slug + ".txt")).string()))
        morph.add(t, t);
    }
    if (auto err = lex.check_disjoint()) throw ConfigError(*err);
    return lex;
  }

  [[nodiscard]] const TermTable<SizeBucket>& size_terms() const { return size_terms_; }
  [[nodiscard]] const TermTable<SpatialConstraint>& spatial_terms() const { return spatial_terms_; }
  [[nodiscard]] const TermTable<std::string>& deny_terms(Modality m) const { return deny_.at(m); }
  [[nodiscard]] const TermTable<std::string>& morphology_terms(Modality m) const {
    return morphology_.at(m);
  }

  /// Error text when any modality's deny list intersects its own morphology terms.
  [[nodiscard]] std::optional<std::string> check_disjoint() const {
    for (Modality m : kAllModalities) {
      for (const std::string& t : morphology_.at(m).phrases()) {
        auto hits = deny_.at(m).find(match_tokens(t));
        for (const auto& h : hits) {
          if (h.phrase == t)
            return "deny list for " + std::string(to_string(m)) + " contains allowed term '" + t +
                   "'";
        }
      }
    }
    return std::nullopt;
  }

 private:
  static std::pair<std::string, std::string> split_mapping(const std::string& line,
                                                           const std::string& file) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(file + ": expected 'term = value' in: " + line);
    return {trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
  }

  TermTable<SizeBucket> size_terms_;
  TermTable<SpatialConstraint> spatial_terms_;
  std::map<Modality, TermTable<std::string>> deny_;
  std::map<Modality, TermTable<std::string>> morphology_;
};

inline std::filesystem::path default_data_dir() {
#ifdef MEDGROUND_DATA_DIR
  return std::filesystem::path(MEDGROUND_DATA_DIR);
#else
  return std::filesystem::path("data");
#endif
}

inline std::filesystem::path default_lexicon_dir() { return default_data_dir() / "lexicons"; }

}  // namespace medground
