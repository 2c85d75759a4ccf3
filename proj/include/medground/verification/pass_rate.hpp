#pragma once

#include <map>
#include <string>
#include <vector>

#include "medground/verification/verifier.hpp"

namespace medground {

/// 100 * num / den rounded half-up to one decimal, exactly ("98.3"); "-" when den is 0.
inline std::string percent_1dp(long long num, long long den) {
  if (den <= 0) return "-";
  const long long tenths = (2 * num * 1000 + den) / (2 * den);
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

struct PassRateColumn {
  std::string dataset;  // "Total" for the per-split totals
  std::string split;
  StageLedger ledger;

  [[nodiscard]] std::string retention(int stage) const {
    return percent_1dp(ledger.survivors[static_cast<std::size_t>(stage)], ledger.initial);
  }
};

struct PassRateReport {
  std::vector<PassRateColumn> columns;
};

inline int split_rank(const std::string& s) {
  if (s == "train") return 0;
  if (s == "test") return 1;
  return 2;
}

/// Table layout: one column per (dataset, split), datasets alphabetical with
/// train before test, then a Total column per split.
inline PassRateReport pass_rate_report(const std::vector<StageLedger>& ledgers) {
  std::map<std::string, std::map<std::pair<int, std::string>, StageLedger>> by_dataset;
  std::map<std::pair<int, std::string>, StageLedger> totals;
  for (const StageLedger& l : ledgers) {
    const auto key = std::make_pair(split_rank(l.split), l.split);
    StageLedger& cell = by_dataset[l.dataset][key];
    StageLedger& total = totals[key];
    for (StageLedger* t : {&cell, &total}) {
      t->initial += l.initial;
      for (std::size_t k = 0; k < 3; ++k) t->survivors[k] += l.survivors[k];
      t->split = l.split;
    }
    cell.dataset = l.dataset;
    total.dataset = "Total";
  }
  PassRateReport r;
  for (const auto& [ds, splits] : by_dataset)
    for (const auto& [key, l] : splits) r.columns.push_back({ds, key.second, l});
  for (const auto& [key, l] : totals) r.columns.push_back({"Total", key.second, l});
  return r;
}

inline std::string pass_rate_csv(const PassRateReport& r) {
  std::string out = "stage";
  for (const auto& c : r.columns) out += "," + c.dataset + "/" + c.split;
  out += "\nInitial";
  for (const auto& c : r.columns) out += "," + std::to_string(c.ledger.initial);
  static const char* const kNames[] = {"Stage I", "Stage II", "Stage III"};
  for (int k = 0; k < 3; ++k) {
    out += "\n";
    out += kNames[k];
    for (const auto& c : r.columns) out += "," + c.retention(k);
  }
  out += "\nRemaining";
  for (const auto& c : r.columns) out += "," + std::to_string(c.ledger.remaining());
  return out + "\n";
}

inline Json pass_rate_json(const PassRateReport& r) {
  Json cols = Json::array();
  for (const auto& c : r.columns) {
    Json j;
    j["dataset"] = c.dataset;
    j["split"] = c.split;
    j["initial"] = c.ledger.initial;
    j["survivors"] = c.ledger.survivors;
    j["retention"] = {c.retention(0), c.retention(1), c.retention(2)};
    j["remaining"] = c.ledger.remaining();
    cols.push_back(std::move(j));
  }
  Json root;
  root["columns"] = std::move(cols);
  return root;
}

}  // namespace medground
