#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "bm25_oracle.hpp"
#include "synthrel/random.hpp"
#include "synthrel/retrieval.hpp"
#include "test_util.hpp"

using namespace synthrel;
using synthrel::testing::BruteForce;
using synthrel::testing::random_corpus;
using synthrel::testing::random_word;

namespace {

Document doc(std::string id, std::string content) {
  Document d;
  d.id = std::move(id);
  d.content = std::move(content);
  return d;
}

}  // namespace

TEST(Bm25, DefaultsAreCanonical) {
  Bm25Params p;
  EXPECT_EQ(p.k1, 1.2);
  EXPECT_EQ(p.b, 0.75);
}

TEST(Bm25, InvalidParamsRejected) {
  Corpus c({doc("a", "x")});
  EXPECT_THROW(Bm25Index::build(c, {-0.1, 0.75}), ConfigError);
  EXPECT_THROW(Bm25Index::build(c, {1.2, 1.5}), ConfigError);
}

TEST(Bm25, EmptyCorpusRejected) { EXPECT_THROW(Bm25Index::build(Corpus{}), DataError); }

TEST(Bm25, PostingsSortedByDocIndex) {
  Corpus c({doc("d0", "budget plan"), doc("d1", "travel"), doc("d2", "budget budget")});
  const auto idx = Bm25Index::build(c);
  const auto* p = idx.postings("budget");
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(*p, (std::vector<Posting>{{0, 1}, {2, 2}}));
  EXPECT_EQ(idx.n_docs(), 3u);
  EXPECT_DOUBLE_EQ(idx.avg_doc_length(), 5.0 / 3.0);
}

TEST(Bm25, MetadataIsIndexed) {
  Document d = doc("d0", "");
  d.author = "Lisa Morrison";
  d.extra["project"] = "atlas";
  const auto idx = Bm25Index::build(Corpus({d, doc("d1", "other")}));
  EXPECT_EQ(idx.document_frequency("lisa"), 1u);
  EXPECT_EQ(idx.document_frequency("atlas"), 1u);
}

TEST(Bm25, SingleEmptyDocumentIsGuarded) {
  const auto idx = Bm25Index::build(Corpus({doc("d0", "")}));
  EXPECT_EQ(idx.doc_lengths()[0], 0u);
  EXPECT_EQ(idx.avg_doc_length(), 0.0);
  EXPECT_EQ(idx.score({"anything"}, 0), 0.0);
  EXPECT_TRUE(idx.top_k({"anything"}, 3).empty());
}

TEST(Bm25, ClosedFormSingleDoc) {
  for (int tf = 1; tf <= 4; ++tf) {
    std::string content;
    for (int i = 0; i < tf; ++i) content += "budget ";
    const auto idx = Bm25Index::build(Corpus({doc("d0", content)}));
    const double expect = std::log(1.0 + 0.5 / 1.5) * (tf * 2.2 / (tf + 1.2));
    EXPECT_NEAR(idx.score({"budget"}, 0), expect, 1e-12);
  }
}

TEST(Bm25, AbsentTermContributesZero) {
  const auto idx = Bm25Index::build(Corpus({doc("d0", "budget"), doc("d1", "travel")}));
  EXPECT_EQ(idx.score({"travel"}, 0), 0.0);
  EXPECT_EQ(idx.score({"budget", "travel"}, 0), idx.score({"budget"}, 0));
}

TEST(Bm25, DuplicateQueryTokensCountTwice) {
  const auto idx = Bm25Index::build(Corpus({doc("d0", "budget plan"), doc("d1", "travel")}));
  EXPECT_DOUBLE_EQ(idx.score({"budget", "budget"}, 0), 2 * idx.score({"budget"}, 0));
}

TEST(Bm25, IdfPositiveForAllDf) {
  for (std::size_t n : {1u, 2u, 10u, 1000u}) {
    for (std::size_t df = 0; df <= n; ++df) EXPECT_GT(bm25_idf(n, df), 0.0);
  }
}

TEST(TopK, EmptyQueryRejected) {
  const auto idx = Bm25Index::build(Corpus({doc("d0", "budget")}));
  try {
    idx.top_k({}, 4);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "empty query");
  }
  EXPECT_THROW(idx.top_k({"budget"}, 0), ConfigError);
}

TEST(TopK, FewerHitsThanK) {
  const auto idx = Bm25Index::build(
      Corpus({doc("d0", "budget"), doc("d1", "travel"), doc("d2", "budget plan"), doc("d3", "hiring")}));
  EXPECT_EQ(idx.top_k({"budget"}, 4).size(), 2u);
}

TEST(TopK, ExcludesSource) {
  const auto idx = Bm25Index::build(Corpus({doc("src", "budget report"), doc("d1", "budget"), doc("d2", "report")}));
  const auto hits = idx.top_k({"budget", "report"}, 4, {"src"});
  ASSERT_EQ(hits.size(), 2u);
  for (const auto& h : hits) EXPECT_NE(h.doc_id, "src");
  EXPECT_EQ(hits[0].rank, 1u);
  EXPECT_EQ(hits[1].rank, 2u);
}

TEST(TopK, TiesBreakByDocId) {
  const auto idx = Bm25Index::build(Corpus({doc("c", "budget"), doc("a", "budget"), doc("b", "budget")}));
  const auto hits = idx.top_k({"budget"}, 3);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].doc_id, "a");
  EXPECT_EQ(hits[1].doc_id, "b");
  EXPECT_EQ(hits[2].doc_id, "c");
}

TEST(TopK, MatchesBruteForceOn20RandomCorpora) {
  const auto start = std::chrono::steady_clock::now();
  auto rng = make_rng(4);
  std::size_t compared = 0;
  for (int c = 0; c < 20; ++c) {
    const std::size_t n_docs = 1 + uniform_below(rng, 1000);
    const std::size_t vocab = 5 + uniform_below(rng, 300);
    const auto corpus = random_corpus(rng, n_docs, vocab);
    Bm25Params params{0.1 + 2.9 * uniform01(rng), uniform01(rng)};
    const auto idx = Bm25Index::build(corpus, params);
    const BruteForce oracle(corpus, params);
    for (int q = 0; q < 10; ++q) {
      TokenList query;
      const auto qlen = 1 + uniform_below(rng, 5);
      for (std::uint64_t i = 0; i < qlen; ++i) query.push_back(random_word(rng, vocab + 20));
      const std::size_t k = 1 + uniform_below(rng, 60);
      const auto got = idx.top_k(query, k);
      const auto want = oracle.top(query, k);
      ASSERT_EQ(got.size(), want.size()) << "corpus " << c << " query " << q;
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].doc_id, want[i].first) << "corpus " << c << " rank " << i + 1;
        EXPECT_NEAR(got[i].score, want[i].second, 1e-12 * std::max(1.0, want[i].second));
        EXPECT_EQ(got[i].rank, i + 1);
        ++compared;
      }
    }
  }
  EXPECT_GT(compared, 500u);
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(secs, 30.0);
}

TEST(TopK, SmallerKIsPrefix) {
  auto rng = make_rng(11);
  const auto corpus = random_corpus(rng, 300, 20);
  const auto idx = Bm25Index::build(corpus);
  const TokenList q = {"w1", "w2", "w3"};
  const auto big = idx.top_k(q, 100);
  for (std::size_t k = 1; k < 100; k += 7) {
    const auto small = idx.top_k(q, k);
    ASSERT_LE(small.size(), big.size());
    for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small[i].doc_id, big[i].doc_id);
  }
}

TEST(Bm25, StrictlyIncreasingInTf) {
  auto rng = make_rng(1000);
  for (int draw = 0; draw < 1000; ++draw) {
    Bm25Params p{1e-3 + 5.0 * uniform01(rng), uniform01(rng)};
    const double idf = bm25_idf(1 + uniform_below(rng, 1000), 0) * (0.01 + uniform01(rng));
    const double dl = static_cast<double>(uniform_below(rng, 500));
    const double avgdl = 0.5 + 300.0 * uniform01(rng);
    const double tf = 1.0 + static_cast<double>(uniform_below(rng, 50));
    EXPECT_LT(bm25_term(idf, tf, dl, avgdl, p), bm25_term(idf, tf + 1.0, dl, avgdl, p))
        << "k1=" << p.k1 << " b=" << p.b << " tf=" << tf;
  }
}

TEST(Bm25, IndexScoreIncreasesWithTf) {
  // Same length, one more occurrence of the query term.
  auto rng = make_rng(3);
  for (int draw = 0; draw < 50; ++draw) {
    const int len = 3 + static_cast<int>(uniform_below(rng, 10));
    const int tf = 1 + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(len - 1)));
    std::string a, b;
    for (int i = 0; i < len; ++i) {
      a += (i < tf ? "budget " : "filler" + std::to_string(i) + " ");
      b += (i <= tf ? "budget " : "filler" + std::to_string(i) + " ");
    }
    const auto idx = Bm25Index::build(Corpus({doc("a", a), doc("b", b), doc("c", "other words here")}),
                                      {0.1 + 2.0 * uniform01(rng), uniform01(rng)});
    EXPECT_LT(idx.score({"budget"}, 0), idx.score({"budget"}, 1));
  }
}

TEST(Bm25, ThousandDocBuildUnderOneSecond) {
  auto rng = make_rng(8);
  const auto corpus = random_corpus(rng, 1000, 500);
  const auto start = std::chrono::steady_clock::now();
  const auto idx = Bm25Index::build(corpus);
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(idx.n_docs(), 1000u);
  EXPECT_LT(secs, 1.0);
}

TEST(Bm25, SnapshotRoundTripIsBitwise) {
  synthrel::testing::TempDir dir;
  auto rng = make_rng(21);
  const auto corpus = random_corpus(rng, 200, 50);
  const auto idx = Bm25Index::build(corpus, {0.9, 0.4});
  idx.save(dir / "index.json");
  const auto back = Bm25Index::load(dir / "index.json");
  EXPECT_EQ(back.params().k1, 0.9);
  EXPECT_EQ(back.n_terms(), idx.n_terms());
  for (std::size_t d = 0; d < idx.n_docs(); ++d) {
    EXPECT_EQ(back.score({"w1", "w7", "pdf"}, d), idx.score({"w1", "w7", "pdf"}, d));
  }
}

TEST(Bm25, MalformedSnapshotRejected) {
  synthrel::testing::TempDir dir;
  EXPECT_THROW(Bm25Index::load(dir.write("bad.json", "{not json")), DataError);
  EXPECT_THROW(Bm25Index::load(dir.write("v.json", R"({"version":99})")), DataError);
}
