#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <thread>

#include "fixtures.hpp"
#include "medground/synthesis/live_backend.hpp"

using namespace medground;

namespace {

const LexiconSet& lexicons() {
  static const LexiconSet lex = LexiconSet::load(default_lexicon_dir());
  return lex;
}

CandidatePool three_entry_pool(Modality m = Modality::kDermoscopy) {
  RegionAttributes a;
  a.size_bucket = SizeBucket::kSmall;
  return fixture::pool_of({{NormBox{0, 0, 100, 100}, a},
                           {NormBox{200, 200, 400, 400}, a},
                           {NormBox{500, 500, 900, 900}, a}},
                          m);
}

std::size_t count_of(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(SelectTargets, SingletonPoolAlwaysZero) {
  for (std::uint64_t seed = 0; seed < 200; ++seed)
    EXPECT_EQ(select_targets(1, seed, 3), std::vector<int>{0});
}

TEST(SelectTargets, DeterministicPerSeed) {
  for (std::uint64_t seed = 0; seed < 200; ++seed)
    EXPECT_EQ(select_targets(10, seed, 3), select_targets(10, seed, 3));
}

TEST(SelectTargets, SubsetWithoutDuplicatesAndCoverage) {
  std::set<int> seen;
  std::array<int, 4> k_hist{};
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    auto t = select_targets(10, seed, 3);
    ASSERT_GE(t.size(), 1U);
    ASSERT_LE(t.size(), 3U);
    ++k_hist[t.size()];
    std::set<int> uniq(t.begin(), t.end());
    ASSERT_EQ(uniq.size(), t.size());
    for (int i : t) {
      ASSERT_GE(i, 0);
      ASSERT_LT(i, 10);
      seen.insert(i);
    }
  }
  EXPECT_EQ(seen.size(), 10U);
  // k uniform on {1,2,3}: each count within 5 sigma of 10000/3.
  for (int k = 1; k <= 3; ++k) EXPECT_NEAR(k_hist[k], 10000.0 / 3, 5 * 47.2);
}

TEST(SelectTargets, CapsAtPoolSize) {
  for (std::uint64_t seed = 0; seed < 500; ++seed) EXPECT_LE(select_targets(2, seed, 3).size(), 2U);
}

TEST(BuildPrompt, ListsEveryCandidateOnce) {
  auto pool = three_entry_pool();
  auto b = build_prompt(pool, {1}, make_profile(Modality::kDermoscopy, lexicons()));
  EXPECT_NE(b.user_prompt.find("Candidates (3):"), std::string::npos);
  EXPECT_EQ(count_of(b.user_prompt, "] box=["), 3U);
  for (int i = 0; i < 3; ++i)
    EXPECT_NE(b.user_prompt.find("[" + std::to_string(i) + "] box="), std::string::npos);
  EXPECT_NE(b.user_prompt.find("Selected targets: [1]"), std::string::npos);
  EXPECT_EQ(b.candidates_json, candidates_to_json(pool));
}

TEST(BuildPrompt, DermoscopyProfileInjection) {
  auto b = build_prompt(three_entry_pool(), {0}, make_profile(Modality::kDermoscopy, lexicons()));
  EXPECT_NE(b.system_prompt.find("skin lesion"), std::string::npos);
  const auto never = b.system_prompt.find("Never use these terms:");
  ASSERT_NE(never, std::string::npos);
  const std::string deny_line = b.system_prompt.substr(never, b.system_prompt.find('\n', never) - never);
  EXPECT_NE(deny_line.find("pleural"), std::string::npos);
  EXPECT_NE(b.system_prompt.find("Dermoscopy"), std::string::npos);
  EXPECT_NE(b.system_prompt.find("\"target_indices\""), std::string::npos);
  EXPECT_NE(b.system_prompt.find("location cues"), std::string::npos);
  EXPECT_NE(b.system_prompt.find("cannot be justified"), std::string::npos);
}

TEST(BuildPrompt, Deterministic) {
  auto prof = make_profile(Modality::kDermoscopy, lexicons());
  auto a = build_prompt(three_entry_pool(), {0, 2}, prof);
  auto b = build_prompt(three_entry_pool(), {0, 2}, prof);
  EXPECT_EQ(a.system_prompt, b.system_prompt);
  EXPECT_EQ(a.user_prompt, b.user_prompt);
}

TEST(Profiles, AllowAndDenyDisjointForEveryModality) {
  for (Modality m : kAllModalities) {
    auto p = make_profile(m, lexicons());
    EXPECT_FALSE(p.allowed_keywords.empty());
    EXPECT_FALSE(p.denied_keywords.empty());
    std::set<std::string> deny(p.denied_keywords.begin(), p.denied_keywords.end());
    for (const auto& t : p.allowed_keywords) EXPECT_FALSE(deny.count(t)) << t;
  }
}

TEST(ParseGeneration, FixturePoolAcceptsEchoedBox) {
  auto pool = fixture::five_by_five_pool();
  auto q = parse_generation(
      R"({"question":"Where is the upper block?","target_indices":[0],"boxes":[[200,0,600,400]]})",
      pool);
  ASSERT_TRUE(q.ok()) << q.error().message;
  EXPECT_EQ(q->target_indices, std::vector<int>{0});
  EXPECT_EQ(q->boxes.front(), (NormBox{200, 0, 600, 400}));
}

TEST(ParseGeneration, IndexOutOfRange) {
  auto pool = fixture::five_by_five_pool();
  auto q = parse_generation(
      R"({"question":"q","target_indices":[5],"boxes":[[200,0,600,400]]})", pool);
  ASSERT_FALSE(q.ok());
  EXPECT_EQ(q.error().code, "invalid_index");
  EXPECT_EQ(q.error().message, "index out of range");
}

TEST(ParseGeneration, BoxOffByOne) {
  auto pool = fixture::five_by_five_pool();
  for (const char* raw :
       {R"({"question":"q","target_indices":[0],"boxes":[[201,0,600,400]]})",
        R"({"question":"q","target_indices":[0],"boxes":[[200,1,600,400]]})",
        R"({"question":"q","target_indices":[0],"boxes":[[200,0,599,400]]})",
        R"({"question":"q","target_indices":[0],"boxes":[[200,0,600,401]]})"}) {
    auto q = parse_generation(raw, pool);
    ASSERT_FALSE(q.ok());
    EXPECT_EQ(q.error().message, "box mismatch");
  }
}

TEST(ParseGeneration, StructuralErrors) {
  auto pool = fixture::five_by_five_pool();
  auto code = [&](const char* raw) { return parse_generation(raw, pool).error().code; };
  EXPECT_EQ(code(R"({"question":"q","target_indices":[0],)"), "syntax");
  EXPECT_EQ(code(R"([1,2])"), "syntax");
  EXPECT_EQ(code(R"({"question":"q","target_indices":[0]})"), "missing_key");
  EXPECT_EQ(code(R"({"question":"q","target_indices":[0],"boxes":[[200,0,600,400]],"x":1})"),
            "extra_key");
  EXPECT_EQ(code(R"({"question":"  ","target_indices":[0],"boxes":[[200,0,600,400]]})"),
            "empty_question");
  EXPECT_EQ(code(R"({"question":"q","target_indices":[0,0],"boxes":[[200,0,600,400],[200,0,600,400]]})"),
            "invalid_index");
  EXPECT_EQ(code(R"({"question":"q","target_indices":[0,1],"boxes":[[200,0,600,400]]})"),
            "box_mismatch");
}

TEST(ParseGeneration, RoundTripOverRandomQueries) {
  SplitMix64 rng(17);
  for (int iter = 0; iter < 1000; ++iter) {
    CandidatePool pool;
    pool.image = {"d", "p.png", 64, 64, Modality::kCT};
    const std::size_t n = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) {
      const int x0 = static_cast<int>(rng.below(999));
      const int y0 = static_cast<int>(rng.below(999));
      NormBox b{x0, y0, x0 + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(1000 - x0))),
                y0 + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(1000 - y0)))};
      pool.entries.push_back({b, {}});
    }
    SynthesizedQuery q;
    q.question = "query \"" + std::to_string(iter) + "\" \xC3\xA9\n";
    q.target_indices = select_targets(n, rng.next(), 3);
    for (int t : q.target_indices) q.boxes.push_back(pool.entries[static_cast<std::size_t>(t)].box);
    auto back = parse_generation(serialize_generation(q), pool);
    ASSERT_TRUE(back.ok()) << back.error().message;
    EXPECT_EQ(*back, q);
  }
}

class MockGeneration : public ::testing::Test {
 protected:
  std::vector<PromptBundle> bundles() {
    std::vector<PromptBundle> out;
    for (Modality m : kAllModalities) {
      for (int v = 0; v < 20; ++v) {
        auto pool = three_entry_pool(m);
        pool.image.path = "img" + std::to_string(v) + ".png";
        out.push_back(build_prompt(pool, select_targets(3, static_cast<std::uint64_t>(v), 3),
                                   make_profile(m, lexicons())));
        pools.push_back(pool);
      }
    }
    return out;
  }
  std::vector<CandidatePool> pools;
};

TEST_F(MockGeneration, CleanOutputAlwaysParses) {
  MockBackend mock;
  auto bs = bundles();
  for (std::size_t i = 0; i < bs.size(); ++i) {
    auto q = parse_generation(mock.generate(bs[i]), pools[i]);
    ASSERT_TRUE(q.ok()) << q.error().message;
    EXPECT_EQ(q->target_indices, bs[i].target_indices);
  }
}

TEST_F(MockGeneration, FullCorruptionNeverParses) {
  BackendConfig cfg;
  cfg.mock_corruption_rate = 1.0;
  MockBackend mock(cfg);
  auto bs = bundles();
  std::set<std::string> codes;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    auto q = parse_generation(mock.generate(bs[i]), pools[i]);
    ASSERT_FALSE(q.ok());
    codes.insert(q.error().code);
  }
  EXPECT_GE(codes.size(), 4U);
}

TEST_F(MockGeneration, ByteIdenticalRepeats) {
  MockBackend a;
  MockBackend b;
  for (const auto& bundle : bundles()) EXPECT_EQ(a.generate(bundle), b.generate(bundle));
}

TEST(MockJudge, AcceptRejectAndMalformed) {
  BackendConfig cfg;
  cfg.mock_judge_malformed_replies = 1;
  MockBackend mock(cfg);
  JudgeRequest r{"t1", Modality::kCT, "Where is the lesion?", {}, "", "", {}, 0};
  EXPECT_TRUE(Json::parse(mock.judge(r), nullptr, false).is_discarded());
  r.attempt = 1;
  auto ok = Json::parse(mock.judge(r));
  EXPECT_TRUE(ok["grounded"].get<bool>());
  EXPECT_TRUE(ok["unambiguous"].get<bool>());
  r.query = "Where is the AMBIG lesion?";
  EXPECT_FALSE(Json::parse(mock.judge(r))["unambiguous"].get<bool>());
}

TEST(MockJudge, UnavailableTokenThrows) {
  BackendConfig cfg;
  cfg.mock_judge_unavailable_token = "OUTAGE";
  MockBackend mock(cfg);
  JudgeRequest r{"t1", Modality::kCT, "OUTAGE lesion", {}, "", "", {}, 0};
  EXPECT_THROW(mock.judge(r), BackendError);
}

TEST(BackendConfigFile, ParsesAndRejectsUnknownKeys) {
  auto cfg = backend_config_from(KvConfig::parse("kind = \"live\"\nmodel = \"m\"  # comment\n"
                                                 "temperature = 0.2\nmax_retries = 5\n"),
                                 "b.toml");
  EXPECT_EQ(cfg.kind, "live");
  EXPECT_EQ(cfg.model, "m");
  EXPECT_DOUBLE_EQ(cfg.temperature, 0.2);
  EXPECT_EQ(cfg.max_retries, 5);
  EXPECT_DOUBLE_EQ(cfg.judge_temperature, 0.0);
  try {
    backend_config_from(KvConfig::parse("temprature = 0.1\n"), "b.toml");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("temprature"), std::string::npos);
  }
  EXPECT_THROW(KvConfig::parse("model = unquoted\n"), ConfigError);
  EXPECT_THROW(backend_config_from(KvConfig::parse("kind = \"other\"\n"), "b"), ConfigError);
}

class LiveServer : public ::testing::Test {
 protected:
  void SetUp() override {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      const int n = calls++;
      if (n < failures_before_success) {
        res.status = failure_status;
        return;
      }
      Json env = {{"choices", Json::array({{{"message", {{"role", "assistant"},
                                                        {"content", R"({"ok":true})"}}}}})}};
      res.set_content(env.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  void TearDown() override {
    server.stop();
    thread.join();
  }

  BackendConfig config() {
    BackendConfig c;
    c.kind = "live";
    c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    c.api_key_env = "";
    c.backoff_ms = 1;
    c.max_retries = 2;
    return c;
  }

  PromptBundle bundle() {
    auto b = build_prompt(three_entry_pool(), {0}, make_profile(Modality::kDermoscopy, lexicons()));
    b.image_png = {0x89, 'P', 'N', 'G'};
    return b;
  }

  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> calls{0};
  int failures_before_success = 0;
  int failure_status = 500;
  std::string last_body;
  std::string last_auth;
};

TEST_F(LiveServer, RetriesTransientThenSucceeds) {
  failures_before_success = 1;
  const auto log = std::filesystem::temp_directory_path() / "medground_transcript_test.jsonl";
  std::filesystem::remove(log);
  auto cfg = config();
  cfg.transcript_log = log.string();
  LiveBackend live(cfg);
  EXPECT_EQ(live.generate(bundle()), R"({"ok":true})");
  EXPECT_EQ(calls.load(), 2);
  auto body = Json::parse(last_body);
  EXPECT_EQ(body["temperature"].get<double>(), 0.7);
  const std::string url = body["messages"][1]["content"][1]["image_url"]["url"];
  EXPECT_EQ(url.rfind("data:image/png;base64,", 0), 0U);
  auto lines = read_jsonl_lines(log.string());
  ASSERT_EQ(lines.size(), 2U);
  EXPECT_EQ(Json::parse(lines[0].second)["status"].get<int>(), 500);
  EXPECT_EQ(lines[1].second.find("base64"), std::string::npos);
  std::filesystem::remove(log);
}

TEST_F(LiveServer, ExhaustsRetries) {
  failures_before_success = 100;
  failure_status = 503;
  LiveBackend live(config());
  try {
    live.generate(bundle());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendFailure::kExhaustedRetries);
  }
  EXPECT_EQ(calls.load(), 3);
}

TEST_F(LiveServer, AuthFailureIsNotRetried) {
  failures_before_success = 100;
  failure_status = 401;
  ::setenv("MEDGROUND_TEST_KEY", "secret", 1);
  auto cfg = config();
  cfg.api_key_env = "MEDGROUND_TEST_KEY";
  LiveBackend live(cfg);
  try {
    live.generate(bundle());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendFailure::kAuth);
  }
  EXPECT_EQ(calls.load(), 1);
  EXPECT_EQ(last_auth, "Bearer secret");
}

TEST_F(LiveServer, PayloadTooLarge) {
  failures_before_success = 100;
  failure_status = 413;
  LiveBackend live(config());
  try {
    live.generate(bundle());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendFailure::kPayloadTooLarge);
  }
}

TEST_F(LiveServer, JudgeUsesJudgeTemperature) {
  LiveBackend live(config());
  JudgeRequest r{"t", Modality::kCT, "q", {}, "sys", "user", {}, 0};
  live.judge(r);
  EXPECT_EQ(Json::parse(last_body)["temperature"].get<double>(), 0.0);
}

TEST(LiveBackendConfig, MissingKeyVariableIsConfigError) {
  BackendConfig c;
  c.kind = "live";
  c.api_key_env = "MEDGROUND_SURELY_UNSET_VARIABLE";
  EXPECT_THROW(LiveBackend{c}, ConfigError);
}

TEST(RateLimiterTest, NeverExceedsConcurrency) {
  RateLimiter lim(2, 0);
  std::atomic<int> live{0};
  std::atomic<int> worst{0};
  std::vector<std::thread> ts;
  for (int i = 0; i < 8; ++i) {
    ts.emplace_back([&] {
      auto p = lim.acquire();
      const int now = ++live;
      int w = worst.load();
      while (now > w && !worst.compare_exchange_weak(w, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --live;
    });
  }
  for (auto& t : ts) t.join();
  EXPECT_LE(worst.load(), 2);
  EXPECT_LE(lim.peak(), 2);
}
