#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "oracles.hpp"
#include "test_support.hpp"

using namespace revcf::corpus;
using testing_support::review;
using testing_support::TempDir;

namespace {

const char* kLine1 = R"({"review_id":"r1","user_id":"u1","business_id":"b1","stars":4.0,"text":"Great tacos","date":"2019-01-01 10:00:00"})";
const char* kLine2 = R"({"review_id":"r2","user_id":"u2","business_id":"b1","stars":2,"text":"Meh"})";
const char* kLine3 = R"({"review_id":"r3","user_id":"u1","business_id":"b2","stars":5.0,"text":"Yes","useful":3})";

SampleThresholds no_thresholds(std::size_t sample_size = 1000000) {
  SampleThresholds t;
  t.min_user_reviews = t.min_business_reviews = t.min_review_words = 0;
  t.sample_size = sample_size;
  t.region_filter.reset();
  t.restaurants_only = false;
  return t;
}

std::size_t no_words(const RawReview&) { return 0; }

std::vector<RawReview> numbered(std::size_t n) {
  std::vector<RawReview> out;
  for (std::size_t k = 0; k < n; ++k)
    out.push_back(review("r" + std::to_string(k), "u" + std::to_string(k % 7), "b" + std::to_string(k % 5), 3));
  return out;
}

SampleSet as_sample(std::vector<RawReview> reviews) {
  SampleSet s;
  s.reviews = std::move(reviews);
  return s;
}

}  // namespace

TEST(LoadReviews, ThreeGoodLines) {
  TempDir tmp("load");
  auto loaded = load_reviews(tmp.write("r.jsonl", std::string(kLine1) + "\n" + kLine2 + "\n" + kLine3 + "\n"));
  ASSERT_EQ(loaded.records.size(), 3u);
  EXPECT_EQ(loaded.stats.skipped, 0u);
  EXPECT_EQ(loaded.records[0].review_id, "r1");
  EXPECT_EQ(loaded.records[0].stars, 4);
  EXPECT_EQ(loaded.records[0].date, "2019-01-01 10:00:00");
  EXPECT_EQ(loaded.records[2].business_id, "b2");
}

TEST(LoadReviews, TruncatedLineSkipped) {
  TempDir tmp("load");
  std::string truncated(kLine3, 40);
  auto loaded = load_reviews(tmp.write("r.jsonl", std::string(kLine1) + "\n" + truncated + "\n" + kLine2 + "\n"));
  EXPECT_EQ(loaded.records.size(), 2u);
  EXPECT_EQ(loaded.stats.skipped, 1u);
  ASSERT_EQ(loaded.stats.diagnostics.size(), 1u);
  EXPECT_EQ(loaded.stats.diagnostics[0].rfind("line 2:", 0), 0u);
}

TEST(LoadReviews, EmptyFile) {
  TempDir tmp("load");
  auto loaded = load_reviews(tmp.write("r.jsonl", ""));
  EXPECT_TRUE(loaded.records.empty());
  EXPECT_EQ(loaded.stats.skipped, 0u);
}

TEST(LoadReviews, SchemaMismatchSkipped) {
  TempDir tmp("load");
  auto loaded = load_reviews(tmp.write(
      "r.jsonl", std::string(R"({"review_id":"x","user_id":"u","business_id":"b","stars":7,"text":""})") + "\n" +
                     R"({"review_id":"y","user_id":"u","stars":3,"text":""})" + "\n" +
                     R"({"review_id":"z","user_id":"u","business_id":"b","stars":3.5,"text":""})" + "\n[1,2]\n" + kLine1 +
                     "\n"));
  EXPECT_EQ(loaded.records.size(), 1u);
  EXPECT_EQ(loaded.stats.skipped, 4u);
}

TEST(LoadReviews, UnreadableFileIsFatal) {
  EXPECT_THROW(load_reviews("/nonexistent/reviews.jsonl"), revcf::DataError);
}

TEST(LoadBusinesses, StateAndRestaurantFlag) {
  TempDir tmp("biz");
  auto loaded = load_businesses(tmp.write(
      "b.jsonl", R"({"business_id":"a","state":"MA","categories":"Food, Restaurants, Pizza"})"
                 "\n"
                 R"({"business_id":"b","state":"","categories":"Restaurants"})"
                 "\n"
                 R"({"business_id":"c","state":"MA","categories":null})"
                 "\n"));
  ASSERT_EQ(loaded.records.size(), 3u);
  auto index = build_business_index(loaded.records);
  EXPECT_TRUE(index.at("a").restaurant);
  EXPECT_EQ(index.at("a").state, "MA");
  EXPECT_FALSE(index.at("b").state);
  EXPECT_FALSE(index.at("c").restaurant);
  EXPECT_FALSE(is_restaurant("Restaurants Supply"));
  EXPECT_FALSE(is_restaurant("restaurants"));
  EXPECT_TRUE(is_restaurant("Bars,Restaurants"));
}

TEST(FilterSample, NoOpThresholdsReturnInput) {
  auto reviews = numbered(40);
  auto s = filter_sample(reviews, {}, no_thresholds(), 1, no_words);
  EXPECT_EQ(s.reviews, reviews);
  EXPECT_EQ(s.population, 40u);
}

TEST(FilterSample, ToyFixedPointMatchesOracle) {
  // 10 users x 10 items, nearly dense; u9 owns a single review.
  std::vector<RawReview> reviews;
  std::vector<oracle::Triple> triples;
  std::mt19937_64 rng(4);
  std::bernoulli_distribution keep(0.3);
  int id = 0;
  for (int u = 0; u < 9; ++u)
    for (int i = 0; i < 10; ++i)
      if (!(u >= 6 && keep(rng))) {
        reviews.push_back(review("r" + std::to_string(id++), "u" + std::to_string(u), "b" + std::to_string(i), 4));
        triples.push_back({reviews.back().user_id, reviews.back().business_id});
      }
  reviews.push_back(review("r" + std::to_string(id++), "u9", "b3", 2));
  triples.push_back({"u9", "b3"});

  for (auto [mu, mb] : {std::pair<std::size_t, std::size_t>{2, 1}, {8, 8}, {9, 7}, {10, 9}}) {
    auto t = no_thresholds();
    t.min_user_reviews = mu;
    t.min_business_reviews = mb;
    auto expected = oracle::fixed_point(triples, mu, mb);
    if (expected.empty()) {
      EXPECT_THROW(filter_sample(reviews, {}, t, 1, no_words), revcf::DataError);
      continue;
    }
    auto s = filter_sample(reviews, {}, t, 1, no_words);
    ASSERT_EQ(s.reviews.size(), expected.size()) << mu << "/" << mb;
    for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_EQ(s.reviews[k], reviews[expected[k]]);
    for (const auto& r : s.reviews) EXPECT_NE(r.user_id, "u9");
    // re-running on the output changes nothing
    EXPECT_EQ(filter_sample(s.reviews, {}, t, 1, no_words).reviews, s.reviews);
  }
}

TEST(FilterSample, RegionRestaurantAndWordFilters) {
  BusinessIndex index{{"ma_rest", {"MA", true}}, {"ma_bar", {"MA", false}}, {"nv_rest", {"NV", true}},
                      {"nostate", {std::nullopt, true}}};
  std::vector<RawReview> reviews{review("1", "u", "ma_rest", 4, "one two three"), review("2", "u", "ma_bar", 4, "a b c"),
                                 review("3", "u", "nv_rest", 4, "a b c"), review("4", "u", "nostate", 4, "a b c"),
                                 review("5", "u", "unknown", 4, "a b c"), review("6", "u", "ma_rest", 4, "short")};
  auto t = no_thresholds();
  t.region_filter = "MA";
  t.restaurants_only = true;
  t.min_review_words = 2;
  auto words = [](const RawReview& r) { return revcf::textprep::normalize(r.text, {}).size(); };
  auto s = filter_sample(reviews, index, t, 1, words);
  ASSERT_EQ(s.reviews.size(), 1u);
  EXPECT_EQ(s.reviews[0].review_id, "1");
}

TEST(FilterSample, EverythingFilteredIsAnError) {
  auto t = no_thresholds();
  t.min_user_reviews = 1000;
  try {
    filter_sample(numbered(10), {}, t, 1, no_words);
    FAIL();
  } catch (const revcf::DataError& e) {
    EXPECT_STREQ(e.what(), "thresholds eliminate all data");
  }
}

TEST(FilterSample, SubsampleIsSeededAndBounded) {
  auto reviews = numbered(500);
  auto t = no_thresholds(120);
  auto a = filter_sample(reviews, {}, t, 42, no_words);
  auto b = filter_sample(reviews, {}, t, 42, no_words);
  auto c = filter_sample(reviews, {}, t, 43, no_words);
  EXPECT_EQ(a.reviews.size(), 120u);
  EXPECT_EQ(a.population, 500u);
  EXPECT_EQ(a.reviews, b.reviews);
  EXPECT_NE(a.reviews, c.reviews);
  std::set<std::string> ids;
  for (const auto& r : a.reviews) EXPECT_TRUE(ids.insert(r.review_id).second);
}

TEST(FilterSample, SubsampleKeepsThresholdsJointly) {
  auto reviews = numbered(700);
  auto t = no_thresholds(300);
  t.min_user_reviews = 30;
  t.min_business_reviews = 45;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = filter_sample(reviews, {}, t, seed, no_words);
    EXPECT_LE(s.reviews.size(), 300u);
    std::map<std::string, std::size_t> users, items;
    for (const auto& r : s.reviews) {
      ++users[r.user_id];
      ++items[r.business_id];
    }
    for (auto& [u, n] : users) EXPECT_GE(n, 30u);
    for (auto& [i, n] : items) EXPECT_GE(n, 45u);
    EXPECT_EQ(filter_sample(s.reviews, {}, t, seed, no_words).reviews, s.reviews);
  }
}

TEST(Split, SmallestExact) {
  auto split = split_train_test(as_sample(numbered(5)), {4, 1}, 7);
  EXPECT_EQ(split.train.reviews.size(), 4u);
  EXPECT_EQ(split.test.reviews.size(), 1u);
}

TEST(Split, FullScaleCounts) {
  auto split = split_train_test(as_sample(numbered(125000)), {4, 1}, 7);
  EXPECT_EQ(split.train.reviews.size(), 100000u);
  EXPECT_EQ(split.test.reviews.size(), 25000u);
}

TEST(Split, DeterministicDisjointAndProportional) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> size(5, 400);
  for (int trial = 0; trial < 200; ++trial) {
    auto sample = as_sample(numbered(size(rng)));
    std::uint64_t seed = rng();
    auto a = split_train_test(sample, {4, 1}, seed);
    auto b = split_train_test(sample, {4, 1}, seed);
    EXPECT_EQ(a.train.reviews, b.train.reviews);
    EXPECT_EQ(a.test.reviews, b.test.reviews);
    std::set<std::string> train_ids;
    for (const auto& r : a.train.reviews) train_ids.insert(r.review_id);
    for (const auto& r : a.test.reviews) EXPECT_FALSE(train_ids.count(r.review_id));
    EXPECT_EQ(a.train.reviews.size() + a.test.reviews.size(), sample.reviews.size());
    double exact = sample.reviews.size() * 0.8;
    EXPECT_LE(std::fabs(static_cast<double>(a.train.reviews.size()) - exact), 1.0);
  }
}

TEST(Split, Errors) {
  EXPECT_THROW(split_train_test(as_sample(numbered(4)), {4, 1}, 1), revcf::DataError);
  EXPECT_THROW(split_train_test(as_sample(numbered(10)), {0, 1}, 1), revcf::UsageError);
  EXPECT_EQ(parse_ratio("4:1"), (std::pair<std::size_t, std::size_t>{4, 1}));
  EXPECT_THROW(parse_ratio("4-1"), revcf::UsageError);
  EXPECT_THROW(parse_ratio("4:0"), revcf::UsageError);
  EXPECT_THROW(parse_ratio("4:1x"), revcf::UsageError);
}

TEST(Persistence, SampleRoundTrip) {
  TempDir tmp("sample");
  auto s = as_sample(numbered(12));
  s.seed = 77;
  s.population = 30;
  s.thresholds.region_filter.reset();
  write_sample(tmp.file("s.jsonl"), s, "sample");
  auto back = read_sample(tmp.file("s.jsonl"));
  EXPECT_EQ(back.reviews, s.reviews);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(back.population, 30u);
  EXPECT_EQ(back.thresholds, s.thresholds);
}

TEST(Sampling, UniformBelowAndPermutation) {
  std::mt19937_64 rng(1);
  for (std::uint64_t bound : {1ull, 2ull, 3ull, 1000ull, (1ull << 63) + 5})
    for (int k = 0; k < 1000; ++k) EXPECT_LT(uniform_below(rng, bound), bound);
  auto p = seeded_permutation(100, 5);
  std::sort(p.begin(), p.end());
  for (std::size_t k = 0; k < 100; ++k) EXPECT_EQ(p[k], k);
}
