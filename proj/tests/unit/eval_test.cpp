#include <gtest/gtest.h>

#include "medground/core/rng.hpp"
#include "medground/eval/grounding.hpp"
#include "oracles.hpp"

using namespace medground;

namespace {

ReferringTriplet triplet(const std::string& id, const std::string& image,
                         std::vector<NormBox> boxes, const std::string& dataset = "D") {
  ReferringTriplet t;
  t.id = id;
  t.image = {dataset, image, 100, 100, Modality::kCT};
  t.query = "q";
  t.answer_boxes = std::move(boxes);
  t.candidate_count = static_cast<int>(t.answer_boxes.size()) + 2;
  return t;
}

std::string box_text(const NormBox& b) {
  return "[" + std::to_string(b.x_min) + ", " + std::to_string(b.y_min) + ", " +
         std::to_string(b.x_max) + ", " + std::to_string(b.y_max) + "]";
}

NormBox random_box(SplitMix64& rng) {
  const int x0 = static_cast<int>(rng.below(1000));
  const int y0 = static_cast<int>(rng.below(1000));
  return {x0, y0, x0 + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(1000 - x0))),
          y0 + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(1000 - y0)))};
}

std::array<int, 4> arr(const NormBox& b) { return {b.x_min, b.y_min, b.x_max, b.y_max}; }

const NormBox kUnit{0, 0, 100, 100};

}  // namespace

TEST(ParsePrediction, Examples) {
  EXPECT_EQ(parse_prediction("The lesion is at [100, 200, 300, 400]."),
            std::vector<NormBox>{(NormBox{100, 200, 300, 400})});
  EXPECT_EQ(parse_prediction("[300,400,100,200]"), std::vector<NormBox>{(NormBox{100, 200, 300, 400})});
  EXPECT_TRUE(parse_prediction("no box found").empty());
  EXPECT_FALSE(make_prediction("x", "no box found").parsed);
}

TEST(ParsePrediction, ClampsDropsAndCollectsAll) {
  EXPECT_EQ(parse_prediction("[-5, 0, 2000, 10] and [ 1 ,2, 3 ,4 ]"),
            (std::vector<NormBox>{{0, 0, 1000, 10}, {1, 2, 3, 4}}));
  EXPECT_TRUE(parse_prediction("[5,5,5,9] [1,2,3]").empty());
  EXPECT_TRUE(parse_prediction("[1.5, 2, 3, 4]").empty());
  EXPECT_EQ(parse_prediction("[99999999999999999999, 0, 10, 10]"),
            std::vector<NormBox>{(NormBox{10, 0, 1000, 10})});
}

TEST(Iou, Examples) {
  EXPECT_EQ(iou(kUnit, kUnit), 1.0);
  EXPECT_EQ(iou(kUnit, NormBox{200, 200, 300, 300}), 0.0);
  EXPECT_EQ(iou(kUnit, NormBox{100, 0, 200, 100}), 0.0);  // touching edges
  EXPECT_DOUBLE_EQ(iou(kUnit, NormBox{50, 50, 150, 150}), 2500.0 / 17500.0);
  EXPECT_NEAR(iou(kUnit, NormBox{50, 50, 150, 150}), 0.142857, 1e-6);
  EXPECT_DOUBLE_EQ(iou(kUnit, NormBox{25, 25, 75, 75}), 0.25);  // nested
}

TEST(Iou, MatchesRationalOracleAndProperties) {
  SplitMix64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    const NormBox a = random_box(rng);
    NormBox b = random_box(rng);
    if (i % 4 == 1) b = {a.x_max, a.y_min, std::min(1000, a.x_max + 5), a.y_max};  // touching
    if (i % 4 == 2 && a.x_max - a.x_min > 2 && a.y_max - a.y_min > 2)
      b = {a.x_min + 1, a.y_min + 1, a.x_max - 1, a.y_max - 1};  // nested
    if (!b.valid()) b = a;
    const auto f = oracle::iou_fraction(arr(a), arr(b));
    const double v = iou(a, b);
    ASSERT_NEAR(v, static_cast<double>(f.num) / static_cast<double>(f.den), 1e-12);
    ASSERT_EQ(v, iou(b, a));
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
    ASSERT_EQ(v == 1.0, a == b);
  }
}

TEST(MatchAndScore, TrivialCases) {
  EXPECT_EQ(match_and_score({kUnit}, {kUnit}, MatchPolicy::kOptimal).mean_iou, 1.0);
  auto r = match_and_score({}, {kUnit, NormBox{200, 200, 300, 300}}, MatchPolicy::kOptimal);
  EXPECT_EQ(r.mean_iou, 0.0);
  EXPECT_EQ(r.assignment, (std::vector<int>{-1, -1}));
}

// Targets T0=(0,0,100,100), T1=(50,0,150,100); P0 straddles both at 0.6 each,
// P1=(0,0,50,100) covers half of T0 only. Greedy takes P0-T0 first.
TEST(MatchAndScore, OptimalBeatsGreedyOnCrosswiseCounterexample) {
  const std::vector<NormBox> targets = {kUnit, NormBox{50, 0, 150, 100}};
  const std::vector<NormBox> preds = {NormBox{25, 0, 125, 100}, NormBox{0, 0, 50, 100}};
  std::vector<std::vector<double>> score(2, std::vector<double>(2));
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t t = 0; t < 2; ++t) score[p][t] = iou(preds[p], targets[t]);
  const double brute = oracle::best_assignment(score, 2);
  auto opt = match_and_score(preds, targets, MatchPolicy::kOptimal);
  auto greedy = match_and_score(preds, targets, MatchPolicy::kGreedy);
  EXPECT_DOUBLE_EQ(opt.mean_iou * 2, brute);
  EXPECT_DOUBLE_EQ(opt.mean_iou, (0.5 + 0.6) / 2);
  EXPECT_DOUBLE_EQ(greedy.mean_iou, 0.6 / 2);
  EXPECT_EQ(opt.assignment, (std::vector<int>{1, 0}));
}

TEST(MatchAndScore, OptimalEqualsBruteForceAndDominatesGreedy) {
  SplitMix64 rng(23);
  for (int i = 0; i < 3000; ++i) {
    std::vector<NormBox> targets, preds;
    const std::size_t nt = 1 + rng.below(4);
    const std::size_t np = rng.below(5);
    for (std::size_t k = 0; k < nt; ++k) targets.push_back(random_box(rng));
    for (std::size_t k = 0; k < np; ++k) preds.push_back(random_box(rng));
    std::vector<std::vector<double>> score(np, std::vector<double>(nt));
    for (std::size_t p = 0; p < np; ++p)
      for (std::size_t t = 0; t < nt; ++t) score[p][t] = iou(preds[p], targets[t]);
    auto opt = match_and_score(preds, targets, MatchPolicy::kOptimal);
    auto greedy = match_and_score(preds, targets, MatchPolicy::kGreedy);
    ASSERT_NEAR(opt.mean_iou * static_cast<double>(nt), oracle::best_assignment(score, nt), 1e-12);
    ASSERT_GE(opt.mean_iou + 1e-15, greedy.mean_iou);
    std::set<int> used;
    for (int p : opt.assignment)
      if (p >= 0) ASSERT_TRUE(used.insert(p).second);
  }
}

TEST(EvaluateSplit, FortyPercentFixture) {
  std::vector<ReferringTriplet> ts = {triplet("a", "1.png", {kUnit}), triplet("b", "2.png", {kUnit}),
                                      triplet("c", "3.png", {kUnit}), triplet("d", "4.png", {kUnit})};
  std::vector<PredictionRecord> preds = {make_prediction("a", box_text(kUnit)),
                                         make_prediction("b", "[0,0,60,100]"),
                                         make_prediction("c", "[500,500,600,600]")};
  auto rep = evaluate_split(preds, ts);
  ASSERT_EQ(rep.records.size(), 4U);
  EXPECT_EQ(rep.records[1].target_iou, std::vector<double>{0.6});
  EXPECT_EQ(table_value(rep.rows.back().mean_iou), "40.0");
  EXPECT_EQ(table_value(rep.rows.back().acc_at_05), "50.0");
  EXPECT_EQ(rep.rows.front().dataset, "D");
  EXPECT_EQ(rep.rows.back().predicted, 3U);
}

TEST(EvaluateSplit, PerfectEmptyAndUnknown) {
  std::vector<ReferringTriplet> ts = {triplet("a", "1.png", {kUnit}, "X"),
                                      triplet("b", "2.png", {NormBox{1, 2, 3, 4}}, "Y")};
  auto perfect = evaluate_split({make_prediction("a", box_text(kUnit)),
                                 make_prediction("b", "[1,2,3,4]")},
                                ts);
  for (const auto& r : perfect.rows) EXPECT_EQ(table_value(r.mean_iou), "100.0");
  auto empty = evaluate_split({}, ts);
  for (const auto& r : empty.rows) EXPECT_EQ(r.mean_iou, 0.0);
  ASSERT_EQ(empty.warnings.size(), 1U);
  EXPECT_NE(eval_csv(empty).find("warning,"), std::string::npos);
  try {
    evaluate_split({make_prediction("zzz", "[0,0,1,1]")}, ts);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("zzz"), std::string::npos);
  }
  EXPECT_THROW(evaluate_split({make_prediction("a", ""), make_prediction("a", "")}, ts), DataError);
}

TEST(EvaluateSplit, InvariantToPredictionOrder) {
  SplitMix64 rng(31);
  std::vector<ReferringTriplet> ts;
  std::vector<PredictionRecord> preds;
  for (int i = 0; i < 60; ++i) {
    const std::string id = "t" + std::to_string(i);
    ts.push_back(triplet(id, std::to_string(i % 7) + ".png", {random_box(rng), random_box(rng)},
                         i % 3 ? "A" : "B"));
    if (i % 5) preds.push_back(make_prediction(id, box_text(random_box(rng)) + box_text(random_box(rng))));
  }
  const std::string base = eval_csv(evaluate_split(preds, ts));
  for (int iter = 0; iter < 20; ++iter) {
    for (std::size_t i = preds.size(); i > 1; --i) std::swap(preds[i - 1], preds[rng.below(i)]);
    ASSERT_EQ(eval_csv(evaluate_split(preds, ts)), base);
  }
}

TEST(PairSet, Examples) {
  EXPECT_TRUE(build_pair_set({triplet("a", "1.png", {kUnit})}).empty());
  const NormBox b2{200, 200, 300, 300}, b3{400, 400, 500, 500};
  auto three = build_pair_set({triplet("a", "1.png", {kUnit}), triplet("b", "1.png", {b2}),
                               triplet("c", "1.png", {b3}), triplet("z", "2.png", {b3})});
  ASSERT_EQ(three.size(), 3U);
  EXPECT_EQ(three[0].first, "a");
  EXPECT_EQ(three[0].second, "b");
  EXPECT_EQ(three[2].first, "b");
  auto shared = build_pair_set({triplet("a", "1.png", {kUnit, b2}), triplet("b", "1.png", {b2})});
  EXPECT_TRUE(shared.empty());
}

class SsFixture : public ::testing::Test {
 protected:
  // Pair IoUs: (1.0, 1.0), (0.6, 0.7), (0.6, 0.4).
  void SetUp() override {
    const NormBox other{500, 500, 600, 600};
    ts = {triplet("a1", "A.png", {kUnit}), triplet("a2", "A.png", {other}),
          triplet("b1", "B.png", {kUnit}), triplet("b2", "B.png", {other}),
          triplet("c1", "C.png", {kUnit}), triplet("c2", "C.png", {other})};
    preds = {make_prediction("a1", "[0,0,100,100]"), make_prediction("a2", "[500,500,600,600]"),
             make_prediction("b1", "[0,0,60,100]"),  make_prediction("b2", "[500,500,570,600]"),
             make_prediction("c1", "[0,0,60,100]"),  make_prediction("c2", "[500,500,540,600]")};
  }
  std::vector<ReferringTriplet> ts;
  std::vector<PredictionRecord> preds;
};

TEST_F(SsFixture, HandComputedAtHalf) {
  auto pairs = build_pair_set(ts);
  ASSERT_EQ(pairs.size(), 3U);
  auto ss = semantic_sensitivity(pairs, preds, ts, {0.5, MatchPolicy::kOptimal});
  EXPECT_EQ(ss.at("All").pairs, 3U);
  EXPECT_EQ(ss.at("All").correct, 2U);
  EXPECT_EQ(table_value(ss.at("All").score()), "66.7");
  EXPECT_NE(ss_csv(ss, 0.5).find("All,3,2,0.5,66.7"), std::string::npos);
}

TEST_F(SsFixture, SinglePairs) {
  auto one = [&](const std::string& a, const std::string& b) {
    return semantic_sensitivity({{a, b, "D"}}, preds, ts, {0.5, MatchPolicy::kOptimal}).at("All").correct;
  };
  EXPECT_EQ(one("b1", "b2"), 1U);
  EXPECT_EQ(one("c1", "c2"), 0U);
}

TEST_F(SsFixture, MonotoneInTau) {
  auto pairs = build_pair_set(ts);
  double prev = 2.0;
  for (int k = 1; k <= 9; ++k) {
    const double s = semantic_sensitivity(pairs, preds, ts, {k / 10.0, MatchPolicy::kOptimal}).at("All").score();
    EXPECT_LE(s, prev) << k;
    prev = s;
  }
}

TEST_F(SsFixture, RejectsSameTargetAndBadTau) {
  EXPECT_THROW(semantic_sensitivity({{"a1", "a1", "D"}}, preds, ts, {}), DataError);
  EXPECT_THROW(semantic_sensitivity({}, preds, ts, {1.5, MatchPolicy::kOptimal}), ConfigError);
}
