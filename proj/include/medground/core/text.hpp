#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "medground/core/result.hpp"

namespace medground {

/// The single whitespace tokenizer. Word counts, token totals and average
/// words all derive from this function.
inline std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::size_t count_words(std::string_view text) { return split_whitespace(text).size(); }

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

/// Lower-cased whitespace tokens with surrounding punctuation stripped.
/// Internal hyphens and apostrophes survive ("ground-glass" stays one token).
/// Tokens that are pure punctuation are dropped.
inline std::vector<std::string> match_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (std::string& tok : split_whitespace(text)) {
    std::size_t b = 0;
    std::size_t e = tok.size();
    auto is_word = [](char c) {
      auto u = static_cast<unsigned char>(c);
      return std::isalnum(u) || u >= 0x80;
    };
    while (b < e && !is_word(tok[b])) ++b;
    while (e > b && !is_word(tok[e - 1])) --e;
    if (e > b) out.push_back(to_lower_ascii(std::string_view(tok).substr(b, e - b)));
  }
  return out;
}

/// One occurrence of a phrase in a token stream.
struct PhraseMatch {
  std::size_t phrase_id = 0;
  std::size_t start = 0;
  std::size_t length = 0;
};

/// Longest-match, non-overlapping phrase matcher over match_tokens().
/// Phrases match whole tokens only, so "scan" never fires inside "scant".
class PhraseMatcher {
 public:
  /// Returns the id of the phrase (existing id when already present).
  std::size_t add(std::string_view phrase) {
    std::vector<std::string> toks = match_tokens(phrase);
    if (toks.empty()) return npos;
    std::string key = join(toks);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    const std::size_t id = phrases_.size();
    index_.emplace(key, id);
    phrases_.push_back(std::move(key));
    max_len_ = std::max(max_len_, toks.size());
    return id;
  }

  [[nodiscard]] std::vector<PhraseMatch> find_all(const std::vector<std::string>& tokens) const {
    std::vector<PhraseMatch> out;
    std::size_t i = 0;
    while (i < tokens.size()) {
      bool hit = false;
      const std::size_t longest = std::min(max_len_, tokens.size() - i);
      for (std::size_t len = longest; len >= 1; --len) {
        std::string key = tokens[i];
        for (std::size_t k = 1; k < len; ++k) {
          key.push_back(' ');
          key += tokens[i + k];
        }
        if (auto it = index_.find(key); it != index_.end()) {
          out.push_back({it->second, i, len});
          i += len;
          hit = true;
          break;
        }
      }
      if (!hit) ++i;
    }
    return out;
  }

  [[nodiscard]] std::vector<PhraseMatch> find_all(std::string_view text) const {
    return find_all(match_tokens(text));
  }

  [[nodiscard]] const std::string& phrase(std::size_t id) const { return phrases_.at(id); }
  [[nodiscard]] std::size_t size() const { return phrases_.size(); }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  static std::string join(const std::vector<std::string>& toks) {
    std::string key;
    for (const auto& t : toks) {
      if (!key.empty()) key.push_back(' ');
      key += t;
    }
    return key;
  }

  std::vector<std::string> phrases_;
  std::map<std::string, std::size_t> index_;
  std::size_t max_len_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

/// Non-empty lines with '#' comments and surrounding whitespace removed.
inline std::vector<std::string> read_data_lines(const std::string& path) {
  std::vector<std::string> out;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::string t = trim(line);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

/// Lines of a JSONL file; blank lines are skipped, line numbers are 1-based.
inline std::vector<std::pair<std::size_t, std::string>> read_jsonl_lines(const std::string& path) {
  std::vector<std::pair<std::size_t, std::string>> out;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    out.emplace_back(n, std::move(line));
  }
  return out;
}

}  // namespace medground
