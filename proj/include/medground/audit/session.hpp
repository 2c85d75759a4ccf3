#pragma once

#include <array>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "medground/core/text.hpp"
#include "medground/core/triplet.hpp"

namespace medground {

enum class Verdict { kGood, kBad };

inline std::string_view to_string(Verdict v) { return v == Verdict::kGood ? "good" : "bad"; }

inline std::optional<Verdict> parse_verdict(std::string_view s) {
  if (s == "good") return Verdict::kGood;
  if (s == "bad") return Verdict::kBad;
  return std::nullopt;
}

struct VoteEvent {
  std::string triplet_id;
  std::string annotator;
  Verdict verdict = Verdict::kGood;
  std::string timestamp;
  std::string comment;
};

inline std::string vote_to_line(const VoteEvent& v) {
  Json j;
  j["id"] = v.triplet_id;
  j["annotator"] = v.annotator;
  j["verdict"] = std::string(to_string(v.verdict));
  j["ts"] = v.timestamp;
  j["comment"] = v.comment;
  return dump_compact(j);
}

inline Result<VoteEvent> vote_from_line(std::string_view line) {
  Json j = Json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return make_error("syntax", "malformed vote record");
  try {
    VoteEvent v;
    v.triplet_id = j.at("id").get<std::string>();
    v.annotator = j.at("annotator").get<std::string>();
    auto verdict = parse_verdict(j.at("verdict").get<std::string>());
    if (!verdict) return make_error("verdict", "verdict must be good or bad");
    v.verdict = *verdict;
    v.timestamp = j.value("ts", "");
    v.comment = j.value("comment", "");
    return v;
  } catch (const Json::exception& e) {
    return make_error("missing_key", std::string("malformed vote record: ") + e.what());
  }
}

enum class DecisionState { kPending, kAccepted, kRejected };

inline std::string_view to_string(DecisionState d) {
  switch (d) {
    case DecisionState::kPending: return "pending";
    case DecisionState::kAccepted: return "accepted";
    case DecisionState::kRejected: return "rejected";
  }
  return "?";
}

struct AuditDecision {
  std::string triplet_id;
  int good_votes = 0;
  int votes = 0;
  DecisionState state = DecisionState::kPending;
  [[nodiscard]] bool accepted() const { return state == DecisionState::kAccepted; }
};

struct AuditReportRow {
  std::string dataset;
  long long total = 0;  // decided triplets
  std::array<long long, 4> by_good{};  // index = number of good votes
  long long pending = 0;

  [[nodiscard]] long long good() const { return by_good[3] + by_good[2]; }
};

/// 100 * num / den rounded half-up to two decimals, exactly ("94.65").
inline std::string percent_2dp(long long num, long long den) {
  if (den <= 0) return "0.00";
  const long long hundredths = (2 * num * 10000 + den) / (2 * den);
  const long long frac = hundredths % 100;
  return std::to_string(hundredths / 100) + "." + (frac < 10 ? "0" : "") + std::to_string(frac);
}

struct AuditReport {
  std::vector<AuditReportRow> rows;  // datasets by name, then "Total"
  bool complete = true;
};

inline std::string audit_report_csv(const AuditReport& r) {
  std::string out = "dataset,total,3-good,2-good,1-good,0-good,good_ratio,pending\n";
  for (const auto& row : r.rows)
    out += row.dataset + "," + std::to_string(row.total) + "," + std::to_string(row.by_good[3]) +
           "," + std::to_string(row.by_good[2]) + "," + std::to_string(row.by_good[1]) + "," +
           std::to_string(row.by_good[0]) + "," + percent_2dp(row.good(), row.total) + "%," +
           std::to_string(row.pending) + "\n";
  if (!r.complete) out += "# partial: some triplets have fewer than 3 votes\n";
  return out;
}

inline Json audit_report_json(const AuditReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"dataset", row.dataset},
                    {"total", row.total},
                    {"good_3", row.by_good[3]},
                    {"good_2", row.by_good[2]},
                    {"good_1", row.by_good[1]},
                    {"good_0", row.by_good[0]},
                    {"good_ratio", percent_2dp(row.good(), row.total)},
                    {"pending", row.pending}});
  return {{"complete", r.complete}, {"rows", rows}};
}

/// Folds vote distributions into report rows. Exposed for callers that hold
/// counts rather than a live session.
inline AuditReport report_from_counts(const std::map<std::string, AuditReportRow>& by_dataset) {
  AuditReport r;
  AuditReportRow total{"Total"};
  for (const auto& [name, row] : by_dataset) {
    r.rows.push_back(row);
    r.rows.back().dataset = name;
    total.total += row.total;
    total.pending += row.pending;
    for (std::size_t k = 0; k < 4; ++k) total.by_good[k] += row.by_good[k];
  }
  r.rows.push_back(total);
  r.complete = total.pending == 0;
  return r;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Review state for one triplet file. The vote log is append-only and is
/// replayed on construction; decisions are a pure fold over it.
class AuditSession {
 public:
  static constexpr int kQuorum = 3;

  AuditSession(std::vector<std::string> triplet_lines, std::vector<std::string> annotators,
               std::string vote_log_path = {})
      : annotators_(std::move(annotators)), log_path_(std::move(vote_log_path)) {
    if (annotators_.size() != static_cast<std::size_t>(kQuorum))
      throw ConfigError("audit requires exactly 3 annotators");
    for (std::size_t i = 0; i < annotators_.size(); ++i) {
      if (annotators_[i].empty()) throw ConfigError("annotator id must not be empty");
      if (!annotator_rank_.emplace(annotators_[i], i).second)
        throw ConfigError("duplicate annotator id: " + annotators_[i]);
    }
    for (std::size_t i = 0; i < triplet_lines.size(); ++i) {
      auto t = parse_triplet(triplet_lines[i]);
      if (!t) throw DataError("triplet line " + std::to_string(i + 1) + ": " + t.error().message);
      if (!index_.emplace(t->id, items_.size()).second)
        throw DataError("duplicate triplet id: " + t->id);
      items_.push_back({std::move(t).value(), std::move(triplet_lines[i]), {}});
    }
    if (!log_path_.empty() && std::filesystem::exists(log_path_)) {
      for (const auto& [lineno, line] : read_jsonl_lines(log_path_)) {
        auto v = vote_from_line(line);
        if (!v) throw DataError(log_path_ + ":" + std::to_string(lineno) + ": " + v.error().message);
        if (auto err = check(*v))
          throw DataError(log_path_ + ":" + std::to_string(lineno) + ": " + err->message);
        apply(*v);
      }
    }
  }

  static AuditSession from_file(const std::string& triplets_path, std::vector<std::string> annotators,
                                std::string vote_log_path = {}) {
    std::vector<std::string> lines;
    for (auto& [_, line] : read_jsonl_lines(triplets_path)) lines.push_back(std::move(line));
    return AuditSession(std::move(lines), std::move(annotators), std::move(vote_log_path));
  }

  [[nodiscard]] const std::vector<std::string>& annotators() const { return annotators_; }
  [[nodiscard]] bool is_annotator(const std::string& a) const { return annotator_rank_.count(a) > 0; }
  [[nodiscard]] std::size_t size() const { return items_.size(); }

  [[nodiscard]] std::optional<ReferringTriplet> find(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return items_[it->second].triplet;
  }

  struct NextItem {
    ReferringTriplet triplet;
    std::size_t ordinal = 0;
    std::size_t voted = 0;  // by this annotator
  };

  /// Lowest-ordinal triplet the annotator has not voted on.
  Result<std::optional<NextItem>> next_item(const std::string& annotator) const {
    if (!is_annotator(annotator)) return make_error("unknown_annotator", "unknown annotator: " + annotator);
    std::shared_lock lock(mu_);
    std::size_t voted = 0;
    for (const auto& it : items_) voted += it.votes.count(annotator);
    for (std::size_t i = 0; i < items_.size(); ++i)
      if (!items_[i].votes.count(annotator))
        return std::optional<NextItem>(NextItem{items_[i].triplet, i, voted});
    return std::optional<NextItem>();
  }

  /// Appends the vote to the log, then applies it; a re-vote supersedes.
  Result<AuditDecision> submit_vote(VoteEvent v) {
    if (auto err = check(v)) return *err;
    if (v.timestamp.empty()) v.timestamp = utc_timestamp();
    std::unique_lock lock(mu_);
    if (!log_path_.empty()) {
      std::ofstream out(log_path_, std::ios::app);
      out << vote_to_line(v) << '\n';
      out.flush();
      if (!out) throw DataError("cannot append to vote log: " + log_path_);
    }
    apply(v);
    return decide(items_[index_.at(v.triplet_id)]);
  }

  [[nodiscard]] AuditDecision aggregate(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = index_.find(id);
    if (it == index_.end()) return {id, 0, 0, DecisionState::kPending};
    return decide(items_[it->second]);
  }

  [[nodiscard]] AuditReport audit_report() const {
    std::shared_lock lock(mu_);
    std::map<std::string, AuditReportRow> rows;
    for (const auto& it : items_) {
      AuditReportRow& row = rows[it.triplet.image.dataset];
      const AuditDecision d = decide(it);
      if (d.state == DecisionState::kPending) {
        ++row.pending;
      } else {
        ++row.total;
        ++row.by_good[static_cast<std::size_t>(d.good_votes)];
      }
    }
    return report_from_counts(rows);
  }

  /// Accepted triplets in file order: the original record plus an "audit" block.
  Result<std::string> export_verified() const {
    std::shared_lock lock(mu_);
    std::string out;
    for (const auto& it : items_) {
      const AuditDecision d = decide(it);
      if (d.state == DecisionState::kPending)
        return make_error("pending", "pending decisions present (first: " + it.triplet.id + ")");
      if (!d.accepted()) continue;
      Json j = Json::parse(it.raw);
      Json votes = Json::object();
      for (const auto& a : annotators_) votes[a] = std::string(to_string(it.votes.at(a)));
      j["audit"] = {{"votes", votes}, {"good_votes", d.good_votes}, {"decision", "accepted"}};
      out += dump_compact(j) + "\n";
    }
    return out;
  }

 private:
  struct Item {
    ReferringTriplet triplet;
    std::string raw;
    std::map<std::string, Verdict> votes;
  };

  std::optional<Error> check(const VoteEvent& v) const {
    if (!is_annotator(v.annotator)) return make_error("unknown_annotator", "unknown annotator: " + v.annotator);
    if (!index_.count(v.triplet_id)) return make_error("unknown_triplet", "unknown triplet id: " + v.triplet_id);
    return std::nullopt;
  }

  void apply(const VoteEvent& v) { items_[index_.at(v.triplet_id)].votes[v.annotator] = v.verdict; }

  static AuditDecision decide(const Item& it) {
    AuditDecision d{it.triplet.id, 0, static_cast<int>(it.votes.size()), DecisionState::kPending};
    for (const auto& [_, v] : it.votes) d.good_votes += v == Verdict::kGood ? 1 : 0;
    if (d.votes >= kQuorum) d.state = d.good_votes >= 2 ? DecisionState::kAccepted : DecisionState::kRejected;
    return d;
  }

  std::vector<std::string> annotators_;
  std::map<std::string, std::size_t> annotator_rank_;
  std::string log_path_;
  std::vector<Item> items_;
  std::map<std::string, std::size_t> index_;
  mutable std::shared_mutex mu_;
};

}  // namespace medground
