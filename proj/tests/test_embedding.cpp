#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "test_support.hpp"

using namespace revcf::embedding;
using testing_support::TempDir;

namespace {

VectorStore two_by_two() {
  VectorStore s("toy", 2);
  s.insert("a", std::vector<double>{1, 0});
  s.insert("b", std::vector<double>{0, 1});
  return s;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g(0, 1);
  std::vector<double> v(dim);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST(LoadVectors, SmallFile) {
  TempDir tmp("vec");
  auto s = load_word_vectors(tmp.write("w.vec", "2 3\nfood 0.1 0.2 0.3\ngood -1 0 1e-3\n"), "w");
  EXPECT_EQ(s.dim(), 3u);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.name(), "w");
  EXPECT_DOUBLE_EQ((*s.find("good"))[2], 1e-3);
  EXPECT_FALSE(s.find("bad"));
}

TEST(LoadVectors, ArityErrorNamesLine) {
  TempDir tmp("vec");
  std::string body = "2 300\nok";
  for (int k = 0; k < 300; ++k) body += " 0.5";
  body += "\nshort";
  for (int k = 0; k < 299; ++k) body += " 0.5";
  body += "\n";
  try {
    load_word_vectors(tmp.write("w.vec", body));
    FAIL();
  } catch (const revcf::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("w.vec:3:"), std::string::npos) << e.what();
  }
}

TEST(LoadVectors, EmptyVocabulary) {
  TempDir tmp("vec");
  auto s = load_word_vectors(tmp.write("w.vec", "0 300\n"));
  EXPECT_EQ(s.dim(), 300u);
  EXPECT_TRUE(s.empty());
}

TEST(LoadVectors, RejectsDuplicatesBadNumbersAndCountMismatch) {
  TempDir tmp("vec");
  EXPECT_THROW(load_word_vectors(tmp.write("d.vec", "2 1\na 1\na 2\n")), revcf::DataError);
  EXPECT_THROW(load_word_vectors(tmp.write("n.vec", "1 1\na x\n")), revcf::DataError);
  EXPECT_THROW(load_word_vectors(tmp.write("i.vec", "1 1\na inf\n")), revcf::DataError);
  EXPECT_THROW(load_word_vectors(tmp.write("c.vec", "3 1\na 1\n")), revcf::DataError);
  EXPECT_THROW(load_word_vectors(tmp.write("h.vec", "a 1\n")), revcf::DataError);
  EXPECT_THROW(load_word_vectors(tmp.file("missing.vec")), revcf::DataError);
}

TEST(LoadSentenceVectors, Basic) {
  TempDir tmp("svec");
  std::string body = "3 768\n";
  for (auto id : {"r1", "r2", "r_not_in_corpus"}) {
    body += id;
    for (int k = 0; k < 768; ++k) body += " 0.25";
    body += "\n";
  }
  auto s = load_sentence_vectors(tmp.write("s.vec", body));
  EXPECT_EQ(s.size(), 3u);
  EXPECT_EQ(s.dim(), 768u);
  EXPECT_TRUE(s.find("r_not_in_corpus"));
}

TEST(LoadSentenceVectors, DuplicateNamesId) {
  TempDir tmp("svec");
  try {
    load_sentence_vectors(tmp.write("s.vec", "2 2\nr9 1 2\nr9 3 4\n"));
    FAIL();
  } catch (const revcf::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("r9"), std::string::npos);
  }
}

TEST(Compose, MeanMaxAbsent) {
  auto s = two_by_two();
  std::vector<std::string> ab{"a", "b"};
  EXPECT_EQ(*compose_sentence(ab, s, PoolingMode::mean), (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(*compose_sentence(ab, s, PoolingMode::max), (std::vector<double>{1, 1}));
  std::vector<std::string> oov{"x", "y"};
  EXPECT_FALSE(compose_sentence(oov, s, PoolingMode::mean));
  EXPECT_FALSE(compose_sentence(std::vector<std::string>{}, s, PoolingMode::max));
}

TEST(Compose, SkipsOutOfVocabulary) {
  auto s = two_by_two();
  revcf::textprep::TokenList t{"r", {"zzz", "a", "a", "b", "qq"}, 0, 0};
  auto v = *compose_sentence(t, s, PoolingMode::mean);
  EXPECT_DOUBLE_EQ(v[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(v[1], 1.0 / 3.0);
}

TEST(Compose, SingleTokenMeanIsExact) {
  std::mt19937_64 rng(3);
  VectorStore s("r", 7);
  s.insert("w", random_vector(rng, 7));
  auto v = *compose_sentence(std::vector<std::string>{"w"}, s, PoolingMode::mean);
  auto expect = *s.find("w");
  EXPECT_TRUE(std::equal(v.begin(), v.end(), expect.begin(), expect.end()));
}

TEST(Compose, PermutationInvariant) {
  std::mt19937_64 rng(9);
  VectorStore s("r", 5);
  std::vector<std::string> words;
  for (int k = 0; k < 12; ++k) {
    words.push_back("w" + std::to_string(k));
    s.insert(words.back(), random_vector(rng, 5));
  }
  for (int trial = 0; trial < 50; ++trial) {
    auto tokens = words;
    tokens.push_back("oov");
    tokens.push_back(words[trial % 12]);
    auto base_mean = *compose_sentence(tokens, s, PoolingMode::mean);
    auto base_max = *compose_sentence(tokens, s, PoolingMode::max);
    std::shuffle(tokens.begin(), tokens.end(), rng);
    EXPECT_EQ(*compose_sentence(tokens, s, PoolingMode::mean), base_mean);
    EXPECT_EQ(*compose_sentence(tokens, s, PoolingMode::max), base_max);
  }
}

TEST(Cosine, Examples) {
  std::vector<double> a{1, 2, 3};
  EXPECT_DOUBLE_EQ(cosine(a, a), 1.0);
  EXPECT_DOUBLE_EQ(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(cosine(std::vector<double>{1, 1}, std::vector<double>{-1, -1}), -1.0);
}

TEST(Cosine, Errors) {
  EXPECT_THROW(cosine(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  EXPECT_THROW(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 2}), std::domain_error);
}

TEST(Cosine, SymmetryAndScaleInvariance) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> lambda(1e-3, 1e3);
  for (int n = 0; n < 2000; ++n) {
    auto a = random_vector(rng, 16), b = random_vector(rng, 16);
    double c = cosine(a, b);
    EXPECT_NEAR(c, cosine(b, a), 1e-12);
    EXPECT_LE(std::fabs(c), 1.0);
    double l = lambda(rng);
    auto la = a;
    for (auto& x : la) x *= l;
    EXPECT_NEAR(cosine(la, b), c, 1e-9);
  }
}

TEST(WriteVectors, RoundTripWithinTextPrecision) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0, 3);
  VectorStore s("rt", 10);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> v(10);
    for (auto& x : v) x = g(rng);
    s.insert("w" + std::to_string(k), v);
  }
  TempDir tmp("rt");
  revcf::io::write_file_atomic(tmp.file("rt.vec"), [&](std::ostream& out) { write_vectors(out, s); });
  auto back = load_word_vectors(tmp.file("rt.vec"));
  ASSERT_EQ(back.dim(), s.dim());
  ASSERT_EQ(back.keys(), s.keys());
  for (std::size_t r = 0; r < s.size(); ++r)
    for (std::size_t k = 0; k < s.dim(); ++k) {
      double x = s.at(r)[k];
      // half a unit in the sixth significant digit
      EXPECT_LE(std::fabs(back.at(r)[k] - x), 5e-6 * std::fabs(x));
      if (std::fabs(x) < 0.2) {
        EXPECT_LE(std::fabs(back.at(r)[k] - x), 1e-6);
      }
    }
}

TEST(WriteVectors, FixtureFilesLoad) {
  auto words = load_word_vectors(testing_support::fixture("toy/words.vec"));
  auto sentences = load_sentence_vectors(testing_support::fixture("toy/sentences.vec"));
  EXPECT_EQ(words.dim(), 8u);
  EXPECT_EQ(sentences.dim(), 8u);
  EXPECT_EQ(sentences.size(), 273u);
}

TEST(Pooling, Parse) {
  EXPECT_EQ(parse_pooling("mean"), PoolingMode::mean);
  EXPECT_EQ(parse_pooling("max"), PoolingMode::max);
  EXPECT_THROW(parse_pooling("sum"), revcf::UsageError);
}
