#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "medground/core/kv_config.hpp"
#include "medground/core/rng.hpp"
#include "medground/synthesis/generation.hpp"
#include "medground/synthesis/prompt.hpp"

namespace medground {

enum class BackendFailure { kExhaustedRetries, kAuth, kPayloadTooLarge };

inline const char* to_string(BackendFailure f) {
  switch (f) {
    case BackendFailure::kExhaustedRetries: return "exhausted_retries";
    case BackendFailure::kAuth: return "authentication_failure";
    case BackendFailure::kPayloadTooLarge: return "payload_too_large";
  }
  return "?";
}

class BackendError : public std::runtime_error {
 public:
  BackendError(BackendFailure kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  [[nodiscard]] BackendFailure kind() const { return kind_; }

 private:
  BackendFailure kind_;
};

/// Everything the judge sees for one triplet.
struct JudgeRequest {
  std::string triplet_id;
  Modality modality = Modality::kCT;
  std::string query;
  std::vector<NormBox> boxes;
  std::string system_prompt;
  std::string user_prompt;
  std::vector<std::uint8_t> overlay_png;
  int attempt = 0;  // 0 for the first ask, 1 for the re-ask
};

struct BackendConfig {
  std::string kind = "mock";  // mock | live
  std::string endpoint = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.7;
  double judge_temperature = 0.0;
  int max_retries = 3;
  int concurrency = 4;
  double rate_limit = 0.0;  // requests per second, 0 = unlimited
  int backoff_ms = 500;
  int timeout_s = 120;
  std::string transcript_log;

  double mock_corruption_rate = 0.0;
  double mock_rule_violation_rate = 0.0;  // wrong size or location word
  std::string mock_judge_reject_token = "AMBIG";
  double mock_judge_reject_rate = 0.0;
  int mock_judge_malformed_replies = 0;
  std::string mock_judge_unavailable_token;
};

inline BackendConfig backend_config_from(const KvConfig& kv, const std::string& origin) {
  BackendConfig c;
  KvReader r(kv, origin);
  c.kind = r.get_string("kind", c.kind);
  c.endpoint = r.get_string("endpoint", c.endpoint);
  c.model = r.get_string("model", c.model);
  c.api_key_env = r.get_string("api_key_env", c.api_key_env);
  c.temperature = r.get_double("temperature", c.temperature);
  c.judge_temperature = r.get_double("judge_temperature", c.judge_temperature);
  c.max_retries = static_cast<int>(r.get_int("max_retries", c.max_retries));
  c.concurrency = static_cast<int>(r.get_int("concurrency", c.concurrency));
  c.rate_limit = r.get_double("rate_limit", c.rate_limit);
  c.backoff_ms = static_cast<int>(r.get_int("backoff_ms", c.backoff_ms));
  c.timeout_s = static_cast<int>(r.get_int("timeout_s", c.timeout_s));
  c.transcript_log = r.get_string("transcript_log", c.transcript_log);
  c.mock_corruption_rate = r.get_double("mock_corruption_rate", c.mock_corruption_rate);
  c.mock_rule_violation_rate = r.get_double("mock_rule_violation_rate", c.mock_rule_violation_rate);
  c.mock_judge_reject_token = r.get_string("mock_judge_reject_token", c.mock_judge_reject_token);
  c.mock_judge_reject_rate = r.get_double("mock_judge_reject_rate", c.mock_judge_reject_rate);
  c.mock_judge_malformed_replies =
      static_cast<int>(r.get_int("mock_judge_malformed_replies", c.mock_judge_malformed_replies));
  c.mock_judge_unavailable_token =
      r.get_string("mock_judge_unavailable_token", c.mock_judge_unavailable_token);
  r.finish();

  if (c.kind != "mock" && c.kind != "live")
    throw ConfigError(origin + ": kind must be \"mock\" or \"live\"");
  if (c.max_retries < 0) throw ConfigError(origin + ": max_retries must be >= 0");
  if (c.concurrency < 1) throw ConfigError(origin + ": concurrency must be >= 1");
  if (c.rate_limit < 0) throw ConfigError(origin + ": rate_limit must be >= 0");
  if (c.mock_corruption_rate < 0 || c.mock_corruption_rate > 1)
    throw ConfigError(origin + ": mock_corruption_rate out of range");
  if (c.mock_rule_violation_rate < 0 || c.mock_rule_violation_rate > 1)
    throw ConfigError(origin + ": mock_rule_violation_rate out of range");
  if (c.mock_judge_reject_rate < 0 || c.mock_judge_reject_rate > 1)
    throw ConfigError(origin + ": mock_judge_reject_rate out of range");
  return c;
}

inline BackendConfig load_backend_config(const std::string& path) {
  return backend_config_from(KvConfig::load(path), path);
}

/// Generation and judging service. Implementations are internally
/// synchronized; callers may share one instance across threads.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string generate(const PromptBundle& bundle) = 0;
  virtual std::string judge(const JudgeRequest& request) = 0;
  [[nodiscard]] virtual std::string tag() const = 0;
  [[nodiscard]] virtual bool wants_images() const { return false; }
};

/// Offline backend. Responses are a pure function of (image, targets) for
/// generation and of (triplet id, query, attempt) for judging.
class MockBackend final : public Backend {
 public:
  explicit MockBackend(BackendConfig cfg = {}) : cfg_(std::move(cfg)) {}

  std::string generate(const PromptBundle& b) override {
    Fnv1a h;
    h.add(b.image.dataset).add(b.image.path);
    for (int t : b.target_indices) h.add(static_cast<std::uint64_t>(t));
    SplitMix64 rng(h.value());

    const Json cands = Json::parse(b.candidates_json);
    SynthesizedQuery q;
    q.target_indices = b.target_indices;
    for (int t : b.target_indices) {
      auto box = box_from_json(cands.at(static_cast<std::size_t>(t)).at("box"));
      q.boxes.push_back(box ? *box : NormBox{});
    }
    const auto& first = cands.at(static_cast<std::size_t>(b.target_indices.front()));
    auto attrs = attributes_from_json(first.at("attributes"));
    const RegionAttributes a = attrs ? *attrs : RegionAttributes{};
    const SplitMix64 before = rng;
    q.question = compose_question(b, a, rng);
    // Separate stream so the violation knob leaves every other draw unchanged.
    SplitMix64 vrng(mix_seed(h.value(), 0x5EED));
    if (vrng.unit() < cfg_.mock_rule_violation_rate) {
      SplitMix64 replay = before;
      q.question = compose_question(b, violate(a, vrng), replay);
    }

    const bool corrupt = rng.unit() < cfg_.mock_corruption_rate;
    if (!corrupt) return serialize_generation(q);
    return corrupt_response(q, cands.size(), rng);
  }

  std::string judge(const JudgeRequest& r) override {
    const std::vector<std::string> tokens = split_whitespace(r.query);
    auto contains = [&](const std::string& tok) {
      if (tok.empty()) return false;
      for (const auto& t : tokens)
        if (t == tok) return true;
      return false;
    };
    if (contains(cfg_.mock_judge_unavailable_token))
      throw BackendError(BackendFailure::kExhaustedRetries, "mock judge unavailable");
    if (r.attempt < cfg_.mock_judge_malformed_replies) return "grounded: yes";

    bool grounded = true;
    bool unambiguous = !contains(cfg_.mock_judge_reject_token);
    if (cfg_.mock_judge_reject_rate > 0) {
      Fnv1a h;
      h.add(r.triplet_id).add(r.query);
      if (SplitMix64(h.value()).unit() < cfg_.mock_judge_reject_rate) grounded = false;
    }
    Json j;
    j["grounded"] = grounded;
    j["unambiguous"] = unambiguous;
    j["restatement"] = "The question asks for the highlighted region(s).";
    j["reason"] = !grounded      ? "the highlighted boxes do not match the description"
                  : !unambiguous ? "the description fits more than one region"
                                 : "the description singles out the highlighted region(s)";
    return dump_compact(j);
  }

  [[nodiscard]] std::string tag() const override { return "mock"; }

 private:
  static const char* size_word(SizeBucket s) {
    switch (s) {
      case SizeBucket::kTiny: return "tiny";
      case SizeBucket::kSmall: return "small";
      case SizeBucket::kMedium: return "medium-sized";
      case SizeBucket::kLarge: return "large";
    }
    return "";
  }

  static std::string location_words(HorizBin h, VertBin v) {
    std::string vert = v == VertBin::kUpper ? "upper" : v == VertBin::kLower ? "lower" : "";
    std::string horiz = h == HorizBin::kLeft ? "left" : h == HorizBin::kRight ? "right" : "";
    if (!vert.empty() && !horiz.empty()) return vert + " " + horiz;
    if (!vert.empty()) return vert + " part";
    if (!horiz.empty()) return horiz + " side";
    return "central area";
  }

  static std::string compose_question(const PromptBundle& b, const RegionAttributes& a,
                                      SplitMix64& rng) {
    std::string morph;
    if (!b.preferred_terms.empty())
      morph = b.preferred_terms[rng.below(b.preferred_terms.size())] + " ";
    const std::string size = size_word(a.size_bucket);
    const std::string loc = location_words(a.horiz_bin, a.vert_bin);
    const std::size_t n = b.target_indices.size();
    std::string noun = b.category.empty() ? b.target_noun : b.category;
    if (noun.empty()) noun = "region";

    if (n == 1) {
      switch (rng.below(3)) {
        case 0: return "Where is the " + size + " " + morph + noun + " in the " + loc + "?";
        case 1: return "Locate the " + size + " " + morph + noun + " found in the " + loc + ".";
        default:
          return "Which " + noun + " is the " + size + " " + morph + "one in the " + loc + "?";
      }
    }
    std::string plural = b.category.empty() ? b.target_noun_plural : b.category + " regions";
    if (plural.empty()) plural = "regions";
    static const char* const kCount[] = {"", "one", "two", "three", "four", "five"};
    const std::string count = n < 6 ? kCount[n] : std::to_string(n);
    if (rng.below(2) == 0)
      return "Locate the " + count + " " + morph + plural + ", including the " + size +
             " one in the " + loc + ".";
    return "Where are the " + count + " " + morph + plural + ", one of them " + size +
           " and in the " + loc + "?";
  }

  /// Attributes the question will contradict: a distant size bucket or a mirrored position.
  static RegionAttributes violate(RegionAttributes a, SplitMix64& rng) {
    if (rng.below(2) == 0) {
      a.size_bucket = a.size_bucket == SizeBucket::kTiny || a.size_bucket == SizeBucket::kSmall
                          ? SizeBucket::kLarge
                          : SizeBucket::kTiny;
      return a;
    }
    if (a.horiz_bin == HorizBin::kCenter && a.vert_bin == VertBin::kMiddle) {
      a.horiz_bin = HorizBin::kLeft;
      a.vert_bin = VertBin::kUpper;
      return a;
    }
    if (a.horiz_bin != HorizBin::kCenter)
      a.horiz_bin = a.horiz_bin == HorizBin::kLeft ? HorizBin::kRight : HorizBin::kLeft;
    if (a.vert_bin != VertBin::kMiddle)
      a.vert_bin = a.vert_bin == VertBin::kUpper ? VertBin::kLower : VertBin::kUpper;
    return a;
  }

  static std::string corrupt_response(const SynthesizedQuery& q, std::size_t pool_size,
                                      SplitMix64& rng) {
    SynthesizedQuery bad = q;
    switch (rng.below(5)) {
      case 0: {
        const std::string s = serialize_generation(q);
        return s.substr(0, s.size() / 2);
      }
      case 1:
        bad.target_indices.back() = static_cast<int>(pool_size);
        return serialize_generation(bad);
      case 2:
        bad.boxes.front().x_min = bad.boxes.front().x_min > 0 ? bad.boxes.front().x_min - 1 : 1;
        return serialize_generation(bad);
      case 3: {
        Json j = Json::parse(serialize_generation(q));
        j.erase("boxes");
        return dump_compact(j);
      }
      default:
        bad.question = "";
        return serialize_generation(bad);
    }
  }

  BackendConfig cfg_;
};

}  // namespace medground
