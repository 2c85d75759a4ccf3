#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "medground/core/triplet.hpp"

namespace medground {

enum class MatchPolicy { kOptimal, kGreedy };

inline std::optional<MatchPolicy> parse_match_policy(std::string_view s) {
  if (s == "optimal") return MatchPolicy::kOptimal;
  if (s == "greedy") return MatchPolicy::kGreedy;
  return std::nullopt;
}

inline std::string_view to_string(MatchPolicy p) {
  return p == MatchPolicy::kOptimal ? "optimal" : "greedy";
}

struct EvalConfig {
  double tau = 0.5;
  MatchPolicy policy = MatchPolicy::kOptimal;
};

struct PredictionRecord {
  std::string id;
  std::string raw;
  std::vector<NormBox> boxes;
  bool parsed = false;  // true iff at least one box survived
};

/// Every bracketed group of four integers, clamped to the grid, with min/max
/// swapped into order; boxes that are still degenerate are dropped.
inline std::vector<NormBox> parse_prediction(std::string_view text) {
  static const std::regex kBox(
      R"(\[\s*([+-]?\d+)\s*,\s*([+-]?\d+)\s*,\s*([+-]?\d+)\s*,\s*([+-]?\d+)\s*\])");
  std::vector<NormBox> out;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kBox); it != std::sregex_iterator(); ++it) {
    std::array<int, 4> v{};
    for (std::size_t k = 0; k < 4; ++k) {
      const std::string digits = (*it)[k + 1].str();
      long long x = 0;
      try {
        x = std::stoll(digits);
      } catch (const std::out_of_range&) {
        x = digits.front() == '-' ? 0 : NormBox::kGrid;
      }
      v[k] = static_cast<int>(std::clamp<long long>(x, 0, NormBox::kGrid));
    }
    NormBox b{std::min(v[0], v[2]), std::min(v[1], v[3]), std::max(v[0], v[2]), std::max(v[1], v[3])};
    if (b.valid()) out.push_back(b);
  }
  return out;
}

inline PredictionRecord make_prediction(std::string id, std::string raw) {
  PredictionRecord p{std::move(id), std::move(raw), {}, false};
  p.boxes = parse_prediction(p.raw);
  p.parsed = !p.boxes.empty();
  return p;
}

inline double iou(const NormBox& a, const NormBox& b) {
  const long long iw = std::max(0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const long long ih = std::max(0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const long long inter = iw * ih;
  const long long uni = static_cast<long long>(a.area()) + b.area() - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

struct EvalRecord {
  std::string id;
  std::vector<double> target_iou;
  std::vector<int> assignment;  // prediction index per target, -1 when unmatched
  double mean_iou = 0.0;
};

namespace detail {

// DP over predictions with the matched-target set as state; exact for any
// prediction count and up to ~16 targets.
inline std::vector<int> optimal_assignment(const std::vector<std::vector<double>>& m,
                                           std::size_t targets) {
  const std::size_t preds = m.size();
  const std::size_t states = std::size_t{1} << targets;
  constexpr double kNone = -1.0;
  std::vector<std::vector<double>> best(preds + 1, std::vector<double>(states, kNone));
  std::vector<std::vector<int>> choice(preds + 1, std::vector<int>(states, -1));
  best[0][0] = 0.0;
  for (std::size_t p = 0; p < preds; ++p) {
    for (std::size_t mask = 0; mask < states; ++mask) {
      if (best[p][mask] < 0) continue;
      if (best[p][mask] > best[p + 1][mask]) {
        best[p + 1][mask] = best[p][mask];
        choice[p + 1][mask] = -1;
      }
      for (std::size_t t = 0; t < targets; ++t) {
        if (mask & (std::size_t{1} << t)) continue;
        const std::size_t next = mask | (std::size_t{1} << t);
        const double v = best[p][mask] + m[p][t];
        if (v > best[p + 1][next]) {
          best[p + 1][next] = v;
          choice[p + 1][next] = static_cast<int>(t);
        }
      }
    }
  }
  std::size_t mask = 0;
  for (std::size_t s = 0; s < states; ++s)
    if (best[preds][s] > best[preds][mask]) mask = s;
  std::vector<int> assign(targets, -1);
  for (std::size_t p = preds; p > 0; --p) {
    const int t = choice[p][mask];
    if (t >= 0) {
      assign[static_cast<std::size_t>(t)] = static_cast<int>(p - 1);
      mask &= ~(std::size_t{1} << t);
    }
  }
  return assign;
}

inline std::vector<int> greedy_assignment(const std::vector<std::vector<double>>& m,
                                          std::size_t targets) {
  struct Pair {
    double v;
    std::size_t p, t;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < m.size(); ++p)
    for (std::size_t t = 0; t < targets; ++t) pairs.push_back({m[p][t], p, t});
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.v > b.v; });
  std::vector<int> assign(targets, -1);
  std::vector<bool> used(m.size(), false);
  for (const Pair& x : pairs) {
    if (x.v <= 0 || used[x.p] || assign[x.t] >= 0) continue;
    used[x.p] = true;
    assign[x.t] = static_cast<int>(x.p);
  }
  return assign;
}

}  // namespace detail

/// Injective prediction-to-target assignment; unmatched targets score 0 and
/// the record's mean is over targets.
inline EvalRecord match_and_score(const std::vector<NormBox>& preds,
                                  const std::vector<NormBox>& targets, MatchPolicy policy) {
  EvalRecord r;
  if (targets.empty()) return r;
  if (targets.size() > 16) throw DataError("too many answer boxes for exact matching");
  std::vector<std::vector<double>> m(preds.size(), std::vector<double>(targets.size()));
  for (std::size_t p = 0; p < preds.size(); ++p)
    for (std::size_t t = 0; t < targets.size(); ++t) m[p][t] = iou(preds[p], targets[t]);
  r.assignment = policy == MatchPolicy::kOptimal ? detail::optimal_assignment(m, targets.size())
                                                 : detail::greedy_assignment(m, targets.size());
  double sum = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const int p = r.assignment[t];
    r.target_iou.push_back(p >= 0 ? m[static_cast<std::size_t>(p)][t] : 0.0);
    sum += r.target_iou.back();
  }
  r.mean_iou = sum / static_cast<double>(targets.size());
  return r;
}

struct EvalRow {
  std::string dataset;
  std::size_t triplets = 0;
  std::size_t predicted = 0;
  double mean_iou = 0.0;
  double acc_at_05 = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // datasets by name, then "All"
  std::vector<EvalRecord> records;  // triplet order
  std::vector<std::string> warnings;
};

inline std::map<std::string, const PredictionRecord*> index_predictions(
    const std::vector<PredictionRecord>& preds, const std::vector<ReferringTriplet>& triplets) {
  std::set<std::string> known;
  for (const auto& t : triplets) known.insert(t.id);
  std::map<std::string, const PredictionRecord*> by_id;
  for (const auto& p : preds) {
    if (!known.count(p.id)) throw DataError("prediction references unknown triplet id: " + p.id);
    if (!by_id.emplace(p.id, &p).second) throw DataError("duplicate prediction for triplet id: " + p.id);
  }
  return by_id;
}

/// Per-dataset mean IoU and Acc@0.5 (per-triplet mean IoU >= 0.5); triplets
/// without a prediction score 0.
inline EvalReport evaluate_split(const std::vector<PredictionRecord>& preds,
                                 const std::vector<ReferringTriplet>& triplets,
                                 const EvalConfig& cfg = {}) {
  const auto by_id = index_predictions(preds, triplets);
  EvalReport rep;
  std::map<std::string, EvalRow> rows;
  EvalRow all{"All"};
  for (const auto& t : triplets) {
    auto it = by_id.find(t.id);
    static const std::vector<NormBox> kNone;
    EvalRecord r = match_and_score(it == by_id.end() ? kNone : it->second->boxes, t.answer_boxes,
                                   cfg.policy);
    r.id = t.id;
    EvalRow& row = rows[t.image.dataset];
    row.dataset = t.image.dataset;
    for (EvalRow* x : {&row, &all}) {
      ++x->triplets;
      x->predicted += it != by_id.end() ? 1 : 0;
      x->mean_iou += r.mean_iou;
      x->acc_at_05 += r.mean_iou >= 0.5 ? 1.0 : 0.0;
    }
    rep.records.push_back(std::move(r));
  }
  for (auto& [_, row] : rows) rep.rows.push_back(row);
  rep.rows.push_back(all);
  for (auto& row : rep.rows) {
    if (row.triplets == 0) continue;
    row.mean_iou /= static_cast<double>(row.triplets);
    row.acc_at_05 /= static_cast<double>(row.triplets);
  }
  if (preds.empty()) rep.warnings.push_back("prediction file is empty; every triplet scores 0");
  return rep;
}

/// Value as printed in the grounding table: mean x 100, one decimal.
inline std::string table_value(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", fraction * 100.0 + 1e-9);
  return buf;
}

inline std::string eval_csv(const EvalReport& rep) {
  std::string out = "dataset,triplets,predicted,mean_iou,acc@0.5\n";
  for (const auto& r : rep.rows)
    out += r.dataset + "," + std::to_string(r.triplets) + "," + std::to_string(r.predicted) + "," +
           table_value(r.mean_iou) + "," + table_value(r.acc_at_05) + "\n";
  for (const auto& w : rep.warnings) out += "warning," + w + ",,,\n";
  return out;
}

inline Json eval_json(const EvalReport& rep) {
  Json rows = Json::array();
  for (const auto& r : rep.rows)
    rows.push_back({{"dataset", r.dataset}, {"triplets", r.triplets}, {"predicted", r.predicted},
                    {"mean_iou", r.mean_iou}, {"acc_at_0_5", r.acc_at_05}});
  return {{"rows", rows}, {"warnings", rep.warnings}};
}

// ---- Semantic Sensitivity ----

struct SsPair {
  std::string first;
  std::string second;
  std::string dataset;
};

inline bool boxes_disjoint(const std::vector<NormBox>& a, const std::vector<NormBox>& b) {
  for (const auto& x : a)
    for (const auto& y : b)
      if (x == y) return false;
  return true;
}

/// Unordered pairs of triplets on the same image whose answer-box sets share
/// no box. Images sorted by (dataset, path); pairs follow input order within.
inline std::vector<SsPair> build_pair_set(const std::vector<ReferringTriplet>& triplets) {
  std::map<std::pair<std::string, std::string>, std::vector<const ReferringTriplet*>> by_image;
  for (const auto& t : triplets) by_image[{t.image.dataset, t.image.path}].push_back(&t);
  std::vector<SsPair> out;
  for (const auto& [key, ts] : by_image)
    for (std::size_t i = 0; i < ts.size(); ++i)
      for (std::size_t j = i + 1; j < ts.size(); ++j)
        if (boxes_disjoint(ts[i]->answer_boxes, ts[j]->answer_boxes))
          out.push_back({ts[i]->id, ts[j]->id, key.first});
  return out;
}

struct SsResult {
  std::size_t pairs = 0;
  std::size_t correct = 0;
  [[nodiscard]] double score() const {
    return pairs == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(pairs);
  }
};

/// Pair scores 1 iff both queries' IoU exceed tau. Per-query IoU is the
/// matched mean IoU over that query's answer boxes.
inline std::map<std::string, SsResult> semantic_sensitivity(
    const std::vector<SsPair>& pairs, const std::vector<PredictionRecord>& preds,
    const std::vector<ReferringTriplet>& triplets, const EvalConfig& cfg) {
  if (!(cfg.tau > 0.0 && cfg.tau < 1.0)) throw ConfigError("tau out of range");
  std::map<std::string, const ReferringTriplet*> by_id;
  for (const auto& t : triplets) by_id[t.id] = &t;
  const auto pred_by_id = index_predictions(preds, triplets);
  auto query_iou = [&](const ReferringTriplet& t) {
    static const std::vector<NormBox> kNone;
    auto it = pred_by_id.find(t.id);
    return match_and_score(it == pred_by_id.end() ? kNone : it->second->boxes, t.answer_boxes,
                           cfg.policy)
        .mean_iou;
  };
  std::map<std::string, SsResult> out;
  for (const auto& p : pairs) {
    auto a = by_id.find(p.first);
    auto b = by_id.find(p.second);
    if (a == by_id.end()) throw DataError("pair references unknown triplet id: " + p.first);
    if (b == by_id.end()) throw DataError("pair references unknown triplet id: " + p.second);
    if (p.first == p.second || !boxes_disjoint(a->second->answer_boxes, b->second->answer_boxes))
      throw DataError("pair references the same target twice: " + p.first + ", " + p.second);
    const bool ok = query_iou(*a->second) > cfg.tau && query_iou(*b->second) > cfg.tau;
    for (const std::string& key : {a->second->image.dataset, std::string("All")}) {
      ++out[key].pairs;
      out[key].correct += ok ? 1 : 0;
    }
  }
  return out;
}

inline std::string ss_csv(const std::map<std::string, SsResult>& ss, double tau) {
  char t[32];
  std::snprintf(t, sizeof t, "%g", tau);
  std::string out = "dataset,pairs,correct,tau,ss\n";
  auto row = [&](const std::string& name, const SsResult& r) {
    out += name + "," + std::to_string(r.pairs) + "," + std::to_string(r.correct) + "," + t + "," +
           table_value(r.score()) + "\n";
  };
  for (const auto& [name, r] : ss)
    if (name != "All") row(name, r);
  row("All", ss.count("All") ? ss.at("All") : SsResult{});
  return out;
}

}  // namespace medground
