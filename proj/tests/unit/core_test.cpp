#include <gtest/gtest.h>

#include <cstdint>
#include <random>
#include <set>

#include "medground/core/box.hpp"
#include "medground/core/rng.hpp"
#include "medground/core/text.hpp"
#include "medground/core/triplet.hpp"

using namespace medground;

namespace {

// Independent rounding oracle: quotient/remainder form of round-half-up.
int oracle_scale(int c, int from, int to) {
  const std::int64_t num = static_cast<std::int64_t>(c) * to;
  std::int64_t q = num / from;
  const std::int64_t r = num % from;
  if (2 * r >= from) ++q;
  return static_cast<int>(q);
}

ReferringTriplet sample_triplet() {
  ReferringTriplet t;
  t.id = "isic:0001:0";
  t.image = {"ISIC2016", "images/isic_0001.png", 512, 384, Modality::kDermoscopy};
  t.query = "the pigmented lesion with irregular borders";
  t.answer_boxes = {{0, 0, 1000, 1000}};
  t.candidate_count = 1;
  t.generator = "mock";
  t.stage_log = {{Stage::kFormat, true, "ok"}, {Stage::kRules, true, "ok"}};
  return t;
}

}  // namespace

TEST(NormalizeBox, SpecExamples) {
  EXPECT_EQ(normalize_box({10, 20, 110, 220}, 512, 512), (NormBox{20, 39, 215, 430}));
  EXPECT_EQ(normalize_box({0, 0, 512, 512}, 512, 512), (NormBox{0, 0, 1000, 1000}));
  EXPECT_EQ(normalize_box({0, 0, 1, 1}, 1000, 1000), (NormBox{0, 0, 1, 1}));
}

TEST(NormalizeBox, MatchesRationalOracle) {
  const PixelBox b{10, 20, 110, 220};
  EXPECT_EQ(normalize_box(b, 512, 512),
            (NormBox{oracle_scale(10, 512, 1000), oracle_scale(20, 512, 1000),
                     oracle_scale(110, 512, 1000), oracle_scale(220, 512, 1000)}));
}

TEST(NormalizeBox, CollapseIsRepaired) {
  // One pixel in a 4000-wide image is a quarter grid unit.
  NormBox n = normalize_box({1, 1, 2, 2}, 4000, 4000);
  EXPECT_TRUE(n.valid());
  EXPECT_EQ(n, (NormBox{0, 0, 1, 1}));
  NormBox edge = normalize_box({3999, 3999, 4000, 4000}, 4000, 4000);
  EXPECT_TRUE(edge.valid());
  EXPECT_EQ(edge, (NormBox{999, 999, 1000, 1000}));
}

TEST(DenormalizeBox, SpecExamples) {
  EXPECT_EQ(denormalize_box({0, 0, 1000, 1000}, 512, 512), (PixelBox{0, 0, 512, 512}));
  EXPECT_EQ(denormalize_box({20, 39, 215, 430}, 512, 512), (PixelBox{10, 20, 110, 220}));
  EXPECT_EQ(denormalize_box({500, 500, 501, 501}, 10, 10), (PixelBox{5, 5, 6, 6}));
}

TEST(DenormalizeBox, CollapseAtFarEdgeShiftsLowEdge) {
  PixelBox p = denormalize_box({999, 999, 1000, 1000}, 10, 10);
  EXPECT_TRUE(p.valid_in(10, 10));
  EXPECT_EQ(p, (PixelBox{9, 9, 10, 10}));
}

TEST(BoxRoundTrip, ExactWhenGridIsFinerThanPixels) {
  std::mt19937 gen(7);
  for (int dim : {5, 37, 256, 512, 999, 1000}) {
    std::uniform_int_distribution<int> coord(0, dim);
    for (int i = 0; i < 2000; ++i) {
      int a = coord(gen), b = coord(gen), c = coord(gen), d = coord(gen);
      if (a == b || c == d) continue;
      PixelBox p{std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
      EXPECT_EQ(denormalize_box(normalize_box(p, dim, dim), dim, dim), p) << dim;
    }
  }
}

TEST(BoxRoundTrip, WithinQuantizationBoundForLargeImages) {
  std::mt19937 gen(11);
  for (int dim : {1333, 2048, 4096}) {
    const int bound = (dim + 999) / 1000;
    std::uniform_int_distribution<int> coord(0, dim);
    for (int i = 0; i < 2000; ++i) {
      int a = coord(gen), b = coord(gen), c = coord(gen), d = coord(gen);
      if (a == b || c == d) continue;
      PixelBox p{std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
      PixelBox r = denormalize_box(normalize_box(p, dim, dim), dim, dim);
      EXPECT_LE(std::abs(r.x_min - p.x_min), bound);
      EXPECT_LE(std::abs(r.y_min - p.y_min), bound);
      EXPECT_LE(std::abs(r.x_max - p.x_max), bound);
      EXPECT_LE(std::abs(r.y_max - p.y_max), bound);
    }
  }
}

TEST(SerializeTriplet, FixedKeyOrderAndBoxes) {
  const std::string line = serialize_triplet(sample_triplet());
  EXPECT_NE(line.find(R"("boxes":[[0,0,1000,1000]])"), std::string::npos);
  EXPECT_EQ(line.rfind(R"({"id":"isic:0001:0","dataset":"ISIC2016","image":)", 0), 0U);
  EXPECT_LT(line.find("\"candidate_count\""), line.find("\"generator\""));
  EXPECT_LT(line.find("\"generator\""), line.find("\"stage_log\""));
  EXPECT_FALSE(line.empty());
  EXPECT_NE(line.back(), ' ');
  EXPECT_NE(line.back(), '\n');
  EXPECT_EQ(line, serialize_triplet(sample_triplet()));
}

TEST(SerializeTriplet, RoundTripsRandomTriplets) {
  SplitMix64 rng(42);
  const std::vector<std::string> words = {"nodule", "lesion", "hypoechoic", "upper", "left",
                                          "margin", "\"quoted\"", "tab\tchar", "µm", "核"};
  std::set<std::string> lines;
  for (int i = 0; i < 1000; ++i) {
    ReferringTriplet t;
    t.id = "t" + std::to_string(i);
    t.image.dataset = "ds" + std::to_string(rng.below(8));
    t.image.path = "img/" + std::to_string(rng.next() % 100000) + ".png";
    t.image.width = 1 + static_cast<int>(rng.below(4096));
    t.image.height = 1 + static_cast<int>(rng.below(4096));
    t.image.modality = kAllModalities[rng.below(5)];
    const auto nwords = 1 + rng.below(12);
    for (std::uint64_t w = 0; w < nwords; ++w) {
      if (w) t.query += ' ';
      t.query += words[rng.below(words.size())];
    }
    const int nboxes = 1 + static_cast<int>(rng.below(4));
    for (int b = 0; b < nboxes; ++b) {
      int x0 = static_cast<int>(rng.below(1000)), y0 = static_cast<int>(rng.below(1000));
      int x1 = x0 + 1 + static_cast<int>(rng.below(1000 - x0));
      int y1 = y0 + 1 + static_cast<int>(rng.below(1000 - y0));
      t.answer_boxes.push_back({x0, y0, x1, y1});
    }
    t.candidate_count = nboxes + static_cast<int>(rng.below(5));
    t.generator = rng.below(2) ? "mock" : "live:gpt";
    const int stages = static_cast<int>(rng.below(5));
    for (int s = 0; s < stages; ++s)
      t.stage_log.push_back({static_cast<Stage>(s), rng.below(2) == 1, "ok"});
    ASSERT_FALSE(validate_triplet(t).has_value());
    const std::string line = serialize_triplet(t);
    auto back = parse_triplet(line);
    ASSERT_TRUE(back.ok()) << back.error().message << "\n" << line;
    EXPECT_EQ(back.value(), t);
    lines.insert(line);
  }
  EXPECT_EQ(lines.size(), 1000U);  // injective over distinct triplets
}

TEST(ParseTriplet, RejectsOutOfRangeBox) {
  std::string line = serialize_triplet(sample_triplet());
  line.replace(line.find("[[0,0,1000,1000]]"), 17, "[[0,0,1001,500]]");
  auto r = parse_triplet(line);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.error().message, "box coordinate out of range");
}

TEST(ParseTriplet, RejectsEmptyQueryAndBoxes) {
  ReferringTriplet t = sample_triplet();
  t.query.clear();
  auto r = parse_triplet(dump_compact(triplet_to_json(t)));
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.error().message, "empty query");

  t = sample_triplet();
  t.answer_boxes.clear();
  r = parse_triplet(dump_compact(triplet_to_json(t)));
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.error().message, "empty answer_boxes");
}

TEST(ParseTriplet, RejectsSyntaxAndMissingKeys) {
  EXPECT_EQ(parse_triplet("{\"id\":").error().code, "syntax");
  Json j = triplet_to_json(sample_triplet());
  j.erase("boxes");
  auto r = parse_triplet(dump_compact(j));
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.error().message, "missing key: boxes");
  j = triplet_to_json(sample_triplet());
  j["temprature"] = 1;
  EXPECT_EQ(parse_triplet(dump_compact(j)).error().code, "unknown_key");
}

TEST(ParseTriplet, RejectsOutOfOrderStageLog) {
  ReferringTriplet t = sample_triplet();
  t.stage_log = {{Stage::kRules, true, "ok"}, {Stage::kFormat, true, "ok"}};
  EXPECT_EQ(parse_triplet(dump_compact(triplet_to_json(t))).error().code, "stage_order");
}

TEST(ParseTriplet, AcceptsTrailingAuditBlock) {
  Json j = triplet_to_json(sample_triplet());
  j["audit"] = {{"good_votes", 3}, {"accepted", true}};
  auto r = parse_triplet(dump_compact(j));
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.value(), sample_triplet());
}

TEST(Text, PhraseMatcherIsWordBounded) {
  PhraseMatcher m;
  m.add("scan");
  m.add("upper left");
  m.add("left");
  EXPECT_TRUE(m.find_all("a scant amount").empty());
  auto hits = m.find_all("CT Scan, upper-left? no: Upper Left corner, left.");
  ASSERT_EQ(hits.size(), 3U);
  EXPECT_EQ(m.phrase(hits[0].phrase_id), "scan");
  EXPECT_EQ(m.phrase(hits[1].phrase_id), "upper left");
  EXPECT_EQ(m.phrase(hits[2].phrase_id), "left");
}

TEST(Text, WhitespaceTokenizer) {
  EXPECT_EQ(count_words("  a  b\tc\n"), 3U);
  EXPECT_EQ(count_words(""), 0U);
}

TEST(Rng, SplitMixIsStable) {
  SplitMix64 a(1), b(1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next(), b.next());
  SplitMix64 c(0);
  EXPECT_EQ(c.next(), 0xE220A8397B1DCDAFULL);  // reference SplitMix64 output for seed 0
}
