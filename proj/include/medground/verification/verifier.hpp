#pragma once

#include <atomic>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>

#include "medground/verification/judge.hpp"

namespace medground {

/// One generator response awaiting verification, with the pool it refers to.
struct DraftRecord {
  std::string id;
  CandidatePool pool;
  std::vector<int> targets;
  std::string generator;
  std::string raw_response;

  friend bool operator==(const DraftRecord&, const DraftRecord&) = default;
};

inline std::string serialize_draft(const DraftRecord& d) {
  Json j;
  j["id"] = d.id;
  j["generator"] = d.generator;
  j["targets"] = d.targets;
  j["raw"] = d.raw_response;
  j["pool"] = pool_to_json(d.pool);
  return dump_compact(j);
}

inline Result<DraftRecord> parse_draft(std::string_view line) {
  Json j = Json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return make_error("syntax", "malformed draft record");
  try {
    DraftRecord d;
    d.id = j.at("id").get<std::string>();
    d.generator = j.at("generator").get<std::string>();
    d.targets = j.at("targets").get<std::vector<int>>();
    d.raw_response = j.at("raw").get<std::string>();
    auto pool = parse_pool(dump_compact(j.at("pool")));
    if (!pool) return pool.error();
    d.pool = std::move(pool).value();
    return d;
  } catch (const Json::exception& e) {
    return make_error("missing_key", std::string("malformed draft record: ") + e.what());
  }
}

struct VerificationOutcome {
  std::string id;
  std::string dataset;
  std::string split;
  std::vector<StageOutcome> stages;
  bool accepted = false;
  bool quarantined = false;
};

/// Cumulative survivor counts for one (dataset, split) cell.
struct StageLedger {
  std::string dataset;
  std::string split;
  long long initial = 0;
  std::array<long long, 3> survivors{};

  [[nodiscard]] long long remaining() const { return survivors[2]; }
  friend bool operator==(const StageLedger&, const StageLedger&) = default;
};

struct VerificationRun {
  std::vector<VerificationOutcome> outcomes;     // input order
  std::vector<ReferringTriplet> accepted;        // input order
  std::vector<ReferringTriplet> rejected;        // with stage_log up to the failure
  std::vector<std::string> quarantined_ids;
  std::vector<StageLedger> ledgers;              // sorted by (dataset, split)
};

struct VerifyOptions {
  int concurrency = 1;
  std::filesystem::path image_root;  // used only for backends that consume pixels
};

/// Runs Stage I, II and III in order for one draft, stopping at the first failure.
inline VerificationOutcome verify_one(const DraftRecord& d, Backend& backend, const LexiconSet& lex,
                                      const RgbImage* pixels) {
  VerificationOutcome out{d.id, d.pool.image.dataset, d.pool.split, {}, false, false};
  out.stages.push_back(stage1_format(d.raw_response, d.pool));
  if (!out.stages.back().passed) return out;
  const SynthesizedQuery q = parse_generation(d.raw_response, d.pool).value();
  out.stages.push_back(stage2_rules(q, d.pool, lex));
  if (!out.stages.back().passed) return out;
  out.stages.push_back(stage3_judge(backend, d.id, d.pool.image, q.question, q.boxes, pixels));
  if (out.stages.back().reason == reason::kJudgeUnavailable) {
    out.quarantined = true;
    return out;
  }
  out.accepted = out.stages.back().passed;
  return out;
}

inline std::vector<StageLedger> build_ledgers(const std::vector<VerificationOutcome>& outcomes) {
  std::map<std::pair<std::string, std::string>, StageLedger> cells;
  for (const auto& o : outcomes) {
    if (o.quarantined) continue;
    StageLedger& c = cells[{o.dataset, o.split}];
    c.dataset = o.dataset;
    c.split = o.split;
    ++c.initial;
    for (std::size_t k = 0; k < o.stages.size() && k < 3; ++k)
      if (o.stages[k].passed) ++c.survivors[k];
  }
  std::vector<StageLedger> out;
  for (auto& [_, c] : cells) out.push_back(c);
  return out;
}

inline ReferringTriplet triplet_from_outcome(const DraftRecord& d, const VerificationOutcome& o) {
  ReferringTriplet t;
  t.id = d.id;
  t.image = d.pool.image;
  t.candidate_count = static_cast<int>(d.pool.size());
  t.generator = d.generator;
  for (const auto& s : o.stages) t.stage_log.push_back({s.stage, s.passed, s.reason});
  if (auto q = parse_generation(d.raw_response, d.pool)) {
    t.query = q->question;
    t.answer_boxes = q->boxes;
  } else {
    for (int i : d.targets)
      if (i >= 0 && static_cast<std::size_t>(i) < d.pool.size())
        t.answer_boxes.push_back(d.pool.entries[static_cast<std::size_t>(i)].box);
  }
  return t;
}

/// Verifies every draft. Workers share the backend; results keep input order.
inline VerificationRun run_verification(const std::vector<DraftRecord>& drafts, Backend& backend,
                                        const LexiconSet& lex, const VerifyOptions& opts = {}) {
  VerificationRun run;
  run.outcomes.resize(drafts.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < drafts.size(); i = next++) {
      try {
        std::optional<RgbImage> pixels;
        if (backend.wants_images() && !opts.image_root.empty()) {
          const auto path = opts.image_root / drafts[i].pool.image.path;
          auto img = decode_rgb_png(read_binary_file(path.string()));
          if (!img) throw DataError(path.string() + ": " + img.error().message);
          pixels = std::move(img).value();
        }
        run.outcomes[i] = verify_one(drafts[i], backend, lex, pixels ? &*pixels : nullptr);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = drafts.size();
      }
    }
  };
  const int n = std::max(1, std::min<int>(opts.concurrency, static_cast<int>(drafts.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < drafts.size(); ++i) {
    const auto& o = run.outcomes[i];
    if (o.quarantined) {
      run.quarantined_ids.push_back(o.id);
      continue;
    }
    auto t = triplet_from_outcome(drafts[i], o);
    (o.accepted ? run.accepted : run.rejected).push_back(std::move(t));
  }
  run.ledgers = build_ledgers(run.outcomes);
  return run;
}

/// {"id","stage","reason","detail"} for the failing stage of a rejected or
/// quarantined outcome.
inline std::string rejection_line(const VerificationOutcome& o) {
  const StageOutcome& s = o.stages.back();
  Json j;
  j["id"] = o.id;
  j["stage"] = std::string(to_string(s.stage));
  j["reason"] = s.reason;
  j["detail"] = s.detail;
  if (o.quarantined) j["quarantined"] = true;
  return dump_compact(j);
}

}  // namespace medground
