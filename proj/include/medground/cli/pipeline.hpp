#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "medground/analytics/metrics.hpp"
#include "medground/core/kv_config.hpp"
#include "medground/core/rng.hpp"
#include "medground/eval/grounding.hpp"
#include "medground/mask/candidate_pool.hpp"
#include "medground/synthesis/live_backend.hpp"
#include "medground/synthesis/prompt.hpp"
#include "medground/verification/pass_rate.hpp"
#include "medground/verification/verifier.hpp"

namespace medground {

namespace fs = std::filesystem;

namespace files {
inline constexpr const char* kPools = "pools.jsonl";
inline constexpr const char* kDrafts = "drafts.jsonl";
inline constexpr const char* kTriplets = "triplets.jsonl";
inline constexpr const char* kLedger = "ledger.csv";
inline constexpr const char* kLedgerJson = "ledger.json";
inline constexpr const char* kRejections = "rejections.jsonl";
inline constexpr const char* kQuarantine = "quarantine.jsonl";
inline constexpr const char* kMetrics = "metrics.csv";
inline constexpr const char* kMetricsJson = "metrics.json";
inline constexpr const char* kEval = "eval.csv";
inline constexpr const char* kEvalJson = "eval.json";
inline constexpr const char* kSs = "ss.csv";
inline constexpr const char* kVotes = "votes.jsonl";
inline constexpr const char* kVerified = "verified.jsonl";
}  // namespace files

struct PipelineConfig {
  fs::path manifest;
  fs::path output_dir = "out";
  fs::path backend_config;  // empty: mock backend with defaults
  fs::path lexicon_dir;     // empty: bundled lexicons
  fs::path image_root;      // empty: manifest directory
  std::uint64_t seed = 0;
  bool run_extract = true;
  bool run_synthesize = true;
  bool run_verify = true;
  bool run_analyze = true;
  int concurrency = 4;
  int max_targets = 3;
  int queries_per_image = 2;
  int min_component_pixels = 4;
  int connectivity = 8;
  double tau = 0.5;
  MatchPolicy matching = MatchPolicy::kOptimal;

  [[nodiscard]] fs::path out(const char* name) const { return output_dir / name; }
  [[nodiscard]] fs::path images() const {
    return image_root.empty() ? manifest.parent_path() : image_root;
  }
  [[nodiscard]] fs::path lexicons() const {
    return lexicon_dir.empty() ? default_lexicon_dir() : lexicon_dir;
  }
};

/// Checks ranges and stage-toggle order; throws ConfigError.
inline void check_config(const PipelineConfig& c, const std::string& origin) {
  if (!(c.tau > 0.0 && c.tau < 1.0)) throw ConfigError(origin + ": tau out of range");
  if (c.concurrency < 1) throw ConfigError(origin + ": concurrency must be >= 1");
  if (c.max_targets < 1) throw ConfigError(origin + ": max_targets must be >= 1");
  if (c.queries_per_image < 1) throw ConfigError(origin + ": queries_per_image must be >= 1");
  if (c.min_component_pixels < 1) throw ConfigError(origin + ": min_component_pixels must be >= 1");
  if (c.connectivity != 4 && c.connectivity != 8)
    throw ConfigError(origin + ": connectivity must be 4 or 8");
  const bool on[] = {c.run_extract, c.run_synthesize, c.run_verify, c.run_analyze};
  int first = -1, last = -1;
  for (int i = 0; i < 4; ++i)
    if (on[i]) {
      if (first < 0) first = i;
      last = i;
    }
  for (int i = first; i >= 0 && i <= last; ++i)
    if (!on[i]) throw ConfigError(origin + ": stage toggles must enable a contiguous run of stages");
}

/// Parses a key/value config. Relative paths resolve against `base`.
inline PipelineConfig pipeline_config_from(const KvConfig& kv, const std::string& origin,
                                           const fs::path& base) {
  PipelineConfig c;
  KvReader r(kv, origin);
  auto path = [&](const char* key, const fs::path& fallback) -> fs::path {
    const std::string v = r.get_string(key, fallback.string());
    if (v.empty()) return {};
    fs::path p(v);
    return p.is_absolute() || !kv.has(key) ? p : base / p;
  };
  c.manifest = path("manifest", c.manifest);
  c.output_dir = path("output_dir", c.output_dir);
  c.backend_config = path("backend_config", c.backend_config);
  c.lexicon_dir = path("lexicon_dir", c.lexicon_dir);
  c.image_root = path("image_root", c.image_root);
  const std::int64_t seed = r.get_int("seed", 0);
  if (seed < 0) throw ConfigError(origin + ": seed must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  c.run_extract = r.get_bool("run_extract", c.run_extract);
  c.run_synthesize = r.get_bool("run_synthesize", c.run_synthesize);
  c.run_verify = r.get_bool("run_verify", c.run_verify);
  c.run_analyze = r.get_bool("run_analyze", c.run_analyze);
  c.concurrency = static_cast<int>(r.get_int("concurrency", c.concurrency));
  c.max_targets = static_cast<int>(r.get_int("max_targets", c.max_targets));
  c.queries_per_image = static_cast<int>(r.get_int("queries_per_image", c.queries_per_image));
  c.min_component_pixels = static_cast<int>(r.get_int("min_component_pixels", c.min_component_pixels));
  c.connectivity = static_cast<int>(r.get_int("connectivity", c.connectivity));
  c.tau = r.get_double("tau", c.tau);
  const std::string policy = r.get_string("matching", std::string(to_string(c.matching)));
  auto p = parse_match_policy(policy);
  if (!p) throw ConfigError(origin + ": matching must be \"optimal\" or \"greedy\"");
  c.matching = *p;
  r.finish();
  check_config(c, origin);
  return c;
}

inline PipelineConfig validate_config(const fs::path& path) {
  return pipeline_config_from(KvConfig::load(path.string()), path.string(), path.parent_path());
}

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `workers` threads; rethrows the first failure.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const int t = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (t == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < t; ++k) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

inline std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

/// Per-record failures go to errors_<stage>.jsonl; a clean run removes the file.
inline void write_error_log(const PipelineConfig& c, const std::string& stage,
                            const std::vector<std::string>& errors) {
  const fs::path p = c.output_dir / ("errors_" + stage + ".jsonl");
  if (errors.empty()) {
    fs::remove(p);
    return;
  }
  write_file(p.string(), join_lines(errors));
}

inline std::string error_line(const std::string& stage, std::size_t line, const std::string& msg) {
  return dump_compact(Json{{"stage", stage}, {"line", line}, {"error", msg}});
}

template <typename T, typename Parse>
std::vector<T> read_records(const fs::path& path, Parse parse) {
  if (!fs::exists(path)) throw DataError("missing input file: " + path.string());
  std::vector<T> out;
  for (const auto& [lineno, line] : read_jsonl_lines(path.string())) {
    auto r = parse(line);
    if (!r) throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + r.error().message);
    out.push_back(std::move(r).value());
  }
  return out;
}

}  // namespace detail

inline std::vector<ReferringTriplet> read_triplets(const fs::path& path) {
  return detail::read_records<ReferringTriplet>(path, [](std::string_view l) { return parse_triplet(l); });
}

/// Machine-readable outcome of a subcommand. `record_errors` > 0 means exit 1.
struct StepSummary {
  Json body = Json::object();
  std::size_t record_errors = 0;
};

inline std::unique_ptr<Backend> backend_for(const PipelineConfig& c) {
  BackendConfig bc;
  if (!c.backend_config.empty()) bc = load_backend_config(c.backend_config.string());
  return make_backend(bc);
}

inline StepSummary run_extract(const PipelineConfig& c) {
  if (c.manifest.empty()) throw ConfigError("manifest path not set");
  if (!fs::exists(c.manifest)) throw DataError("missing manifest: " + c.manifest.string());
  fs::create_directories(c.output_dir);
  const auto lines = read_jsonl_lines(c.manifest.string());
  const ExtractConfig ec{static_cast<Connectivity>(c.connectivity), c.min_component_pixels};
  std::vector<std::string> pools(lines.size()), errors(lines.size());
  detail::parallel_for(lines.size(), c.concurrency, [&](std::size_t i) {
    const auto& [lineno, line] = lines[i];
    auto entry = parse_manifest_entry(line);
    if (!entry) {
      errors[i] = detail::error_line("extract", lineno, entry.error().message);
      return;
    }
    auto pool = extract_pool(*entry, c.images(), ec);
    if (!pool) {
      errors[i] = detail::error_line("extract", lineno, entry->image_path + ": " + pool.error().message);
      return;
    }
    pools[i] = serialize_pool(*pool);
  });
  std::vector<std::string> ok, bad;
  std::size_t boxes = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!errors[i].empty()) {
      bad.push_back(errors[i]);
    } else {
      ok.push_back(pools[i]);
      boxes += Json::parse(pools[i])["entries"].size();
    }
  }
  write_file(c.out(files::kPools).string(), detail::join_lines(ok));
  detail::write_error_log(c, "extract", bad);
  StepSummary s;
  s.body = {{"command", "extract"}, {"images", lines.size()}, {"pools", ok.size()},
            {"boxes", boxes}, {"errors", bad.size()}, {"output", c.out(files::kPools).string()}};
  s.record_errors = bad.size();
  return s;
}

/// Draft id: dataset:image path#k.
inline std::string draft_id(const CandidatePool& p, int k) {
  return p.image.dataset + ":" + p.image.path + "#" + std::to_string(k);
}

inline StepSummary run_synthesize(const PipelineConfig& c, Backend& backend) {
  fs::create_directories(c.output_dir);
  const auto pools = detail::read_records<CandidatePool>(c.out(files::kPools),
                                                         [](std::string_view l) { return parse_pool(l); });
  const LexiconSet lex = LexiconSet::load(c.lexicons());
  std::map<Modality, ModalityProfile> profiles;
  for (Modality m : kAllModalities) profiles.emplace(m, make_profile(m, lex));

  // Target sets are drawn up front so the draft list does not depend on scheduling.
  struct Job {
    std::size_t pool;
    int k;
    std::vector<int> targets;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    std::set<std::vector<int>> seen;
    for (int k = 0; k < c.queries_per_image; ++k) {
      // A repeated target set would only duplicate a query; redraw a few times.
      for (std::uint64_t attempt = 0; attempt < 8; ++attempt) {
        const std::uint64_t seed = mix_seed(mix_seed(mix_seed(c.seed, i), static_cast<std::uint64_t>(k)), attempt);
        auto t = select_targets(pools[i].size(), seed, c.max_targets);
        if (seen.insert(t).second) {
          jobs.push_back({i, k, std::move(t)});
          break;
        }
      }
    }
  }

  std::vector<std::string> drafts(jobs.size()), errors(jobs.size());
  detail::parallel_for(jobs.size(), c.concurrency, [&](std::size_t j) {
    const Job& job = jobs[j];
    const CandidatePool& pool = pools[job.pool];
    PromptBundle b = build_prompt(pool, job.targets, profiles.at(pool.image.modality));
    if (backend.wants_images()) b.image_png = read_binary_file((c.images() / pool.image.path).string());
    DraftRecord d{draft_id(pool, job.k), pool, job.targets, backend.tag(), {}};
    try {
      d.raw_response = backend.generate(b);
    } catch (const BackendError& e) {
      errors[j] = detail::error_line("synthesize", job.pool + 1, d.id + ": " + e.what());
      return;
    }
    drafts[j] = serialize_draft(d);
  });
  std::vector<std::string> ok, bad;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (errors[j].empty()) {
      ok.push_back(drafts[j]);
    } else {
      bad.push_back(errors[j]);
    }
  }
  write_file(c.out(files::kDrafts).string(), detail::join_lines(ok));
  detail::write_error_log(c, "synthesize", bad);
  StepSummary s;
  s.body = {{"command", "synthesize"}, {"pools", pools.size()}, {"drafts", ok.size()},
            {"generator", backend.tag()}, {"errors", bad.size()},
            {"output", c.out(files::kDrafts).string()}};
  s.record_errors = bad.size();
  return s;
}

inline StepSummary run_verify(const PipelineConfig& c, Backend& backend) {
  fs::create_directories(c.output_dir);
  const auto drafts = detail::read_records<DraftRecord>(c.out(files::kDrafts),
                                                        [](std::string_view l) { return parse_draft(l); });
  const LexiconSet lex = LexiconSet::load(c.lexicons());
  VerifyOptions opts;
  opts.concurrency = c.concurrency;
  opts.image_root = c.images();
  const VerificationRun run = run_verification(drafts, backend, lex, opts);

  std::vector<std::string> triplets, rejections, quarantine;
  for (const auto& t : run.accepted) triplets.push_back(serialize_triplet(t));
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    const auto& o = run.outcomes[i];
    if (o.accepted) continue;
    rejections.push_back(rejection_line(o));
    if (o.quarantined) quarantine.push_back(serialize_draft(drafts[i]));
  }
  const PassRateReport rep = pass_rate_report(run.ledgers);
  write_file(c.out(files::kTriplets).string(), detail::join_lines(triplets));
  write_file(c.out(files::kLedger).string(), pass_rate_csv(rep));
  write_file(c.out(files::kLedgerJson).string(), pass_rate_json(rep).dump(2) + "\n");
  write_file(c.out(files::kRejections).string(), detail::join_lines(rejections));
  write_file(c.out(files::kQuarantine).string(), detail::join_lines(quarantine));

  std::array<long long, 3> survivors{};
  for (const auto& l : run.ledgers)
    for (std::size_t k = 0; k < 3; ++k) survivors[k] += l.survivors[k];
  StepSummary s;
  s.body = {{"command", "verify"},
            {"drafts", drafts.size()},
            {"accepted", run.accepted.size()},
            {"rejected", run.rejected.size()},
            {"quarantined", run.quarantined_ids.size()},
            {"survivors", survivors},
            {"output", c.out(files::kTriplets).string()}};
  return s;
}

/// Split label per triplet id, taken from the drafts the triplets came from.
inline std::map<std::string, std::string> splits_from_drafts(const fs::path& drafts) {
  std::map<std::string, std::string> out;
  if (!fs::exists(drafts)) return out;
  for (const auto& [_, line] : read_jsonl_lines(drafts.string())) {
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("id") || !j.contains("pool")) continue;
    out[j["id"].get<std::string>()] = j["pool"].value("split", "train");
  }
  return out;
}

/// `split_override` labels every triplet; otherwise labels come from drafts.jsonl
/// when present, falling back to "all".
inline StepSummary run_analyze(const PipelineConfig& c, const std::string& split_override = {}) {
  fs::create_directories(c.output_dir);
  const auto triplets = read_triplets(c.out(files::kTriplets));
  const Gazetteer g = Gazetteer::load(c.lexicons());
  const auto draft_splits =
      split_override.empty() ? splits_from_drafts(c.out(files::kDrafts)) : std::map<std::string, std::string>{};
  std::map<std::string, std::vector<ReferringTriplet>> by_split;
  for (const auto& t : triplets) {
    std::string split = split_override;
    if (split.empty()) {
      auto it = draft_splits.find(t.id);
      split = it == draft_splits.end() ? "all" : it->second;
    }
    by_split[split].push_back(t);
  }
  std::vector<SplitStats> stats;
  for (const std::string& name : {"train", "test"})
    if (by_split.count(name)) stats.push_back(split_statistics(by_split[name], name, g));
  for (auto& [name, ts] : by_split)
    if (name != "train" && name != "test") stats.push_back(split_statistics(ts, name, g));
  write_file(c.out(files::kMetrics).string(), metrics_csv(stats));
  write_file(c.out(files::kMetricsJson).string(), metrics_json(stats).dump(2) + "\n");
  StepSummary s;
  Json splits = Json::object();
  for (const auto& st : stats) splits[st.split] = st.overall.queries;
  s.body = {{"command", "analyze"}, {"triplets", triplets.size()}, {"splits", splits},
            {"output", c.out(files::kMetrics).string()}};
  return s;
}

/// Prediction JSONL: {"id": triplet id, "output": raw model text}.
inline std::vector<PredictionRecord> read_predictions(const fs::path& path) {
  return detail::read_records<PredictionRecord>(path, [](std::string_view line) -> Result<PredictionRecord> {
    Json j = Json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return make_error("syntax", "malformed prediction record");
    if (!j.contains("id") || !j["id"].is_string()) return make_error("missing_key", "missing key: id");
    if (!j.contains("output") || !j["output"].is_string())
      return make_error("missing_key", "missing key: output");
    return make_prediction(j["id"].get<std::string>(), j["output"].get<std::string>());
  });
}

inline StepSummary run_evaluate(const PipelineConfig& c, const fs::path& predictions,
                                fs::path triplets_path = {}) {
  if (triplets_path.empty()) triplets_path = c.out(files::kTriplets);
  fs::create_directories(c.output_dir);
  const auto triplets = read_triplets(triplets_path);
  const auto preds = read_predictions(predictions);
  const EvalConfig ec{c.tau, c.matching};
  const EvalReport rep = evaluate_split(preds, triplets, ec);
  const auto ss = semantic_sensitivity(build_pair_set(triplets), preds, triplets, ec);
  write_file(c.out(files::kEval).string(), eval_csv(rep));
  write_file(c.out(files::kEvalJson).string(), eval_json(rep).dump(2) + "\n");
  write_file(c.out(files::kSs).string(), ss_csv(ss, c.tau));
  const EvalRow& all = rep.rows.back();
  const SsResult ss_all = ss.count("All") ? ss.at("All") : SsResult{};
  StepSummary s;
  s.body = {{"command", "evaluate"},
            {"triplets", triplets.size()},
            {"predictions", preds.size()},
            {"mean_iou", table_value(all.mean_iou)},
            {"acc@0.5", table_value(all.acc_at_05)},
            {"ss_pairs", ss_all.pairs},
            {"ss", table_value(ss_all.score())},
            {"tau", c.tau},
            {"matching", std::string(to_string(c.matching))},
            {"warnings", rep.warnings},
            {"output", c.out(files::kEval).string()}};
  return s;
}

/// Enabled stages in order; one backend instance serves synthesis and verification.
inline StepSummary run_pipeline(const PipelineConfig& c) {
  StepSummary s;
  s.body = {{"command", "run"}, {"steps", Json::array()}};
  std::unique_ptr<Backend> backend;
  auto need_backend = [&]() -> Backend& {
    if (!backend) backend = backend_for(c);
    return *backend;
  };
  auto add = [&](StepSummary step) {
    s.record_errors += step.record_errors;
    s.body["steps"].push_back(std::move(step.body));
  };
  if (c.run_extract) add(run_extract(c));
  if (c.run_synthesize) add(run_synthesize(c, need_backend()));
  if (c.run_verify) add(run_verify(c, need_backend()));
  if (c.run_analyze) add(run_analyze(c));
  return s;
}

}  // namespace medground
