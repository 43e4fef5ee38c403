#include <gtest/gtest.h>

#include <sstream>

#include "kgcurate/common.hpp"
#include "kgcurate/embedding.hpp"
#include "kgcurate/ontology.hpp"
#include "kgcurate/tokenizer.hpp"

using namespace kgc;

TEST(Tokenizer, LongChemicalName) {
  EXPECT_EQ(tokenize("Androsta-4,9(11)-diene-3,17-dione"),
            (TokenList{"androsta", "4", "9", "11", "diene", "3", "17", "dione"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(tokenize("(2S,6R)-x"), (TokenList{"2s", "6r", "x"}));
}

TEST(Tokenizer, CustomPatternMatchesDefaultFastPath) {
  const Tokenizer fast;
  EXPECT_EQ(Tokenizer("[a-z]+").tokenize("ab1cd"), (TokenList{"ab", "cd"}));
  for (const char* s : {"N-acetyl-L-alpha-aspartic acid", "5'-ATP(4-)", ""})
    EXPECT_EQ(fast.tokenize(s), Tokenizer("[a-z0-9]+").tokenize(s));
}

TEST(TokenFrequency, SingleTripleAndAdditivity) {
  const auto kg = KnowledgeGraph::build({{"A", "ab"}, {"B", "cd"}}, {{"A", "is a", "B"}});
  const auto& pos = kg.triples();
  const auto heads = token_frequency_report(kg, pos, TokenPopulation::Heads);
  const auto tails = token_frequency_report(kg, pos, TokenPopulation::Tails);
  const auto both = token_frequency_report(kg, pos, TokenPopulation::Both);
  EXPECT_EQ(heads.counts, (std::map<std::string, std::size_t>{{"ab", 1}}));
  EXPECT_EQ(tails.counts, (std::map<std::string, std::size_t>{{"cd", 1}}));
  EXPECT_EQ(both.counts.at("ab") + both.counts.at("cd"), 2u);
}

TEST(TokenFrequency, RankedOrder) {
  TokenFrequency f;
  f.counts = {{"b", 2}, {"a", 2}, {"c", 5}};
  const auto r = f.ranked();
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].first, "c");
  EXPECT_EQ(r[1].first, "a");
}

TEST(Embedding, LoadTextVectors) {
  std::istringstream in("a 1 2 3 4\nb 0 0 0 1\nc 1 1 1 1\n");
  const auto r = load_text_vectors(in, 4);
  EXPECT_EQ(r.model.vocabulary_size(), 3u);
  EXPECT_EQ(r.model.dimension(), 4u);
  const auto v = r.model.lookup("a");
  EXPECT_EQ(std::vector<float>(v.begin(), v.end()), (std::vector<float>{1, 2, 3, 4}));
}

TEST(Embedding, DuplicateLastWinsWithWarning) {
  std::istringstream in("a 1 1\na 2 2\n");
  const auto r = load_text_vectors(in);
  EXPECT_EQ(r.model.lookup("a")[0], 2.0f);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Embedding, HeaderLineSkippedAndDimMismatchFails) {
  std::istringstream with_header("2 3\nx 1 2 3\ny 4 5 6\n");
  EXPECT_EQ(load_text_vectors(with_header).model.vocabulary_size(), 2u);
  std::istringstream ragged("x 1 2 3\ny 4 5\n");
  EXPECT_THROW(load_text_vectors(ragged), Error);
  std::istringstream wrong("x 1 2 3\n");
  EXPECT_THROW(load_text_vectors(wrong, 4), Error);
}

TEST(Embedding, RandomModelDistribution) {
  const auto m = EmbeddingModel::random(300, 1);
  double sum = 0, lo = 1, hi = -1;
  std::size_t n = 0;
  for (int t = 0; n < 100000; ++t) {
    for (float x : m.lookup("tok" + std::to_string(t))) {
      sum += x;
      lo = std::min<double>(lo, x);
      hi = std::max<double>(hi, x);
      ++n;
    }
  }
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_GE(lo, -1.0);
  EXPECT_LE(hi, 1.0);
}

TEST(Embedding, RandomLookupDeterministicAndSeeded) {
  const auto a = EmbeddingModel::random(16, 1), b = EmbeddingModel::random(16, 2);
  const auto x = a.lookup("foo"), y = a.lookup("foo"), z = b.lookup("foo");
  EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
  EXPECT_FALSE(std::equal(x.begin(), x.end(), z.begin()));
  EXPECT_EQ(EmbeddingModel::random(16, 1).lookup("foo")[3], x[3]);
}

TEST(Embedding, OovVectorsStableAndBounded) {
  EmbeddingModel::Table t{{"known", {0.5f, 0.5f}}};
  const auto m = EmbeddingModel::from_table(2, t, 3);
  EXPECT_EQ(m.lookup("known")[0], 0.5f);
  const auto a = m.lookup("unknown");
  const std::vector<float> first(a.begin(), a.end());
  const auto b = m.lookup("unknown");
  EXPECT_EQ(first, std::vector<float>(b.begin(), b.end()));
  for (float x : first) {
    EXPECT_GE(x, -1.0f);
    EXPECT_LE(x, 1.0f);
  }
}

TEST(Embedding, OovStats) {
  TokenFrequency vocab;
  for (int i = 0; i < 10; ++i) vocab.counts["t" + std::to_string(i)] = 1;
  EmbeddingModel::Table t;
  for (int i = 0; i < 6; ++i) t["t" + std::to_string(i)] = {0.f};
  EXPECT_DOUBLE_EQ(oov_stats(EmbeddingModel::from_table(1, t), vocab).fraction, 0.4);
  EXPECT_DOUBLE_EQ(oov_stats(EmbeddingModel::from_table(1, {}), vocab).fraction, 1.0);
  EXPECT_DOUBLE_EQ(oov_stats(EmbeddingModel::random(4, 0), vocab).fraction, 0.0);
}

TEST(Embedding, SaveTextRoundTrip) {
  EmbeddingModel::Table t{{"b", {1.5f, -2.f}}, {"a", {0.25f, 3.f}}};
  std::stringstream io;
  EmbeddingModel::from_table(2, t).save_text(io);
  const auto back = load_text_vectors(io, 2).model;
  EXPECT_EQ(back.table(), t);
}
