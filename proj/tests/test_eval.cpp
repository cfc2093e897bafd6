#include <gtest/gtest.h>

#include <chrono>

#include "eval_oracles.hpp"
#include "synthrel/eval/metrics.hpp"
#include "synthrel/eval/report.hpp"
#include "synthrel/eval/wilcoxon.hpp"
#include "synthrel/llm/client.hpp"
#include "synthrel/pipeline/assemble.hpp"
#include "test_util.hpp"

using namespace synthrel;
using namespace synthrel::eval;
using synthrel::testing::TempDir;

namespace {

ScoredList list3(std::vector<int> gold, std::vector<int> pred) { return {{"d1", "d2", "d3"}, gold, pred}; }

}  // namespace

TEST(Ndcg, WorkedExample) {
  // Labeler ranks d3, d2, d1: DCG = 0 + 3/log2(3) + 7/2, IDCG = 7 + 3/log2(3).
  const auto m = ndcg(list3({3, 2, 0}, {0, 1, 2}));
  ASSERT_TRUE(m.value);
  const double expect = (3.0 / std::log2(3.0) + 3.5) / (7.0 + 3.0 / std::log2(3.0));
  EXPECT_NEAR(*m.value, expect, 1e-12);
  EXPECT_NEAR(*m.value, 0.6064, 5e-4);
}

TEST(Ndcg, PerfectOrderIsOne) { EXPECT_DOUBLE_EQ(*ndcg(list3({3, 2, 0}, {4, 3, 1})).value, 1.0); }

TEST(Ndcg, AllZeroGoldSkips) {
  const auto m = ndcg(list3({0, 0, 0}, {1, 2, 3}));
  EXPECT_TRUE(m.is_skip());
  EXPECT_EQ(*m.skip, SkipReason::ZeroIdealDcg);
}

TEST(Ndcg, TiesBrokenByDocId) {
  // All predictions tied: d1, d2, d3 order is used.
  EXPECT_DOUBLE_EQ(*ndcg(list3({3, 2, 0}, {1, 1, 1})).value, 1.0);
  EXPECT_LT(*ndcg(list3({0, 2, 3}, {1, 1, 1})).value, 1.0);
}

TEST(Ndcg, InvariantToMonotoneTransform) {
  auto rng = make_rng(4);
  for (int i = 0; i < 200; ++i) {
    auto l = synthrel::testing::random_scored_list(rng);
    const auto a = ndcg(l);
    for (auto& p : l.predicted) p = 2 * p + 1;
    const auto b = ndcg(l);
    ASSERT_EQ(a.is_skip(), b.is_skip());
    if (a.value) {
      EXPECT_EQ(*a.value, *b.value);
    }
  }
}

TEST(Accuracy, WorkedExample) {
  const auto m = pairwise_accuracy(list3({3, 1, 1}, {2, 2, 0}));
  EXPECT_EQ(*m.value, 1.0 / 3.0);
}

TEST(Accuracy, SingleDocSkips) {
  const auto m = pairwise_accuracy({{"d"}, {3}, {3}});
  EXPECT_EQ(*m.skip, SkipReason::TooFewDocuments);
}

TEST(Accuracy, InvariantToDocOrder) {
  auto rng = make_rng(5);
  for (int i = 0; i < 200; ++i) {
    auto l = synthrel::testing::random_scored_list(rng);
    auto r = l;
    std::reverse(r.doc_ids.begin(), r.doc_ids.end());
    std::reverse(r.reference.begin(), r.reference.end());
    std::reverse(r.predicted.begin(), r.predicted.end());
    EXPECT_EQ(*pairwise_accuracy(l).value, *pairwise_accuracy(r).value);
  }
}

TEST(Metrics, MatchBruteForceOn100Groups) {
  const auto start = std::chrono::steady_clock::now();
  auto rng = make_rng(2024);
  for (int i = 0; i < 100; ++i) {
    const auto l = synthrel::testing::random_scored_list(rng);
    QueryGroup g{"q" + std::to_string(i), "", {}};
    for (std::size_t j = 0; j < l.doc_ids.size(); ++j) {
      g.pairs.push_back({g.query_id, l.doc_ids[j], l.reference[j], {{"slm", l.predicted[j]}}});
    }
    const auto n = ndcg_per_query(g, "slm");
    const double ref = synthrel::testing::oracle_ndcg(l);
    if (ref < 0) {
      EXPECT_TRUE(n.is_skip());
    } else {
      ASSERT_TRUE(n.value);
      EXPECT_NEAR(*n.value, ref, 1e-12);
      EXPECT_GE(*n.value, 0.0);
      EXPECT_LE(*n.value, 1.0 + 1e-15);
    }
    EXPECT_NEAR(*pairwise_accuracy_per_query(g, "slm").value, synthrel::testing::oracle_accuracy(l), 1e-12);
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 5.0);
}

TEST(MacroAverage, MeanOverNonSkipped) {
  EXPECT_EQ(macro_average(std::vector<double>{1.0, 0.5}), 0.75);
  EXPECT_EQ(macro_average({QueryMetric::of(0.6064), QueryMetric::skipped(SkipReason::ZeroIdealDcg)}), 0.6064);
  EXPECT_THROW(macro_average({QueryMetric::skipped(SkipReason::ZeroIdealDcg)}), DataError);
}

TEST(Wilcoxon, AllPositiveTenIsOneOver1024) {
  std::vector<double> d;
  for (int i = 1; i <= 10; ++i) d.push_back(0.01 * i);
  const auto r = wilcoxon_noninferiority(d, kDefaultNdcgMargin);
  EXPECT_EQ(r.method, PValueMethod::Exact);
  EXPECT_EQ(r.p_value, 0.0009765625);
  std::vector<double> shifted;
  for (double x : d) shifted.push_back(x + kDefaultNdcgMargin);
  EXPECT_EQ(r.p_value, synthrel::testing::oracle_signed_rank_p(shifted));
  EXPECT_TRUE(r.reject_h0);
  EXPECT_EQ(r.statistic, 55.0);
}

TEST(Wilcoxon, SymmetricAboutMarginFailsToReject) {
  const double m = 0.5;
  const std::vector<double> d = {1 - m, -1 - m, 2 - m, -2 - m};
  const auto r = wilcoxon_noninferiority(d, m);
  // Tied magnitudes, so the normal approximation applies.
  EXPECT_EQ(r.method, PValueMethod::NormalApprox);
  EXPECT_EQ(r.statistic, 5.0);
  EXPECT_FALSE(r.reject_h0);
  EXPECT_GT(r.p_value, 0.4);
  EXPECT_LT(r.p_value, 0.7);
}

TEST(Wilcoxon, ExactMatchesEnumerationOracle) {
  auto rng = make_rng(31);
  for (int i = 0; i < 40; ++i) {
    const auto xs = synthrel::testing::random_tie_free(rng, 1 + uniform_below(rng, 16));
    const auto r = wilcoxon_noninferiority(xs, 0.0);
    ASSERT_EQ(r.method, PValueMethod::Exact);
    EXPECT_EQ(r.p_value, synthrel::testing::oracle_signed_rank_p(xs));
  }
}

TEST(Wilcoxon, ExactAndNormalAgreeAtTwenty) {
  auto rng = make_rng(77);
  for (int i = 0; i < 50; ++i) {
    const auto xs = synthrel::testing::random_tie_free(rng, 20);
    const auto r = wilcoxon_noninferiority(xs, 0.0);
    ASSERT_EQ(r.method, PValueMethod::Exact);
    const double normal = normal_upper_tail(20, r.statistic, {});
    EXPECT_NEAR(r.p_value, normal, 0.01) << "W+ = " << r.statistic;
  }
}

TEST(Wilcoxon, TiesUseNormalApproximation) {
  const std::vector<double> d = {0.1, 0.1, 0.2, -0.05, 0.3};
  EXPECT_EQ(wilcoxon_noninferiority(d, 0.0).method, PValueMethod::NormalApprox);
  std::vector<double> big(30, 0.0);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = 0.01 * static_cast<double>(i + 1);
  EXPECT_EQ(wilcoxon_noninferiority(big, 0.0).method, PValueMethod::NormalApprox);
}

TEST(Wilcoxon, ZerosAreDropped) {
  const auto r = wilcoxon_noninferiority(std::vector<double>{0.0, 0.0, 0.2, 0.3}, 0.0);
  EXPECT_EQ(r.n_effective, 2u);
}

TEST(Wilcoxon, AllAtMinusMarginIsAnError) {
  try {
    wilcoxon_noninferiority(std::vector<double>{-0.5, -0.5}, 0.5);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "no nonzero differences");
  }
}

TEST(Wilcoxon, DefaultMargins) {
  EXPECT_EQ(kDefaultAccuracyMargin, 0.001);
  EXPECT_EQ(kDefaultNdcgMargin, 0.0001);
  const Margins m;
  EXPECT_EQ(m.accuracy, 0.001);
  EXPECT_EQ(m.ndcg, 0.0001);
}

TEST(Report, SectionsAndTests) {
  TempDir dir;
  std::string text;
  auto rng = make_rng(8);
  for (int q = 0; q < 12; ++q) {
    for (int d = 0; d < 4; ++d) {
      const int gold = static_cast<int>(uniform_below(rng, 5));
      const int llm = std::clamp(gold + static_cast<int>(uniform_below(rng, 3)) - 1, 0, 4);
      const int slm = std::clamp(gold + static_cast<int>(uniform_below(rng, 3)) - 1, 0, 4);
      text += "{\"query_id\":\"q" + std::to_string(q) + "\",\"doc_id\":\"d" + std::to_string(d) +
              "\",\"human_score\":" + std::to_string(gold) + ",\"slm_score\":" + std::to_string(slm) +
              ",\"labeler_scores\":{\"llm\":" + std::to_string(llm) + "}}\n";
    }
  }
  const auto groups = load_judged(dir.write("judged.jsonl", text));
  ASSERT_EQ(groups.size(), 12u);
  const auto j = to_json(eval_report(groups, {"slm"}, "llm"));
  EXPECT_TRUE(j["sections"].contains("slm-human"));
  EXPECT_TRUE(j["sections"].contains("slm-llm"));
  EXPECT_TRUE(j["sections"].contains("llm-human"));
  EXPECT_EQ(j["margins"]["accuracy"], 0.001);
  EXPECT_EQ(j["margins"]["ndcg"], 0.0001);
  ASSERT_EQ(j["tests"].size(), 2u);
  EXPECT_EQ(j["tests"][0]["metric"], "ndcg");
  EXPECT_EQ(j["tests"][1]["metric"], "accuracy");
  EXPECT_NE(render_table(j).find("slm-llm"), std::string::npos);
}

TEST(Report, IdenticalLabelersAreNotApplicable) {
  std::vector<QueryGroup> groups;
  for (int q = 0; q < 3; ++q) {
    QueryGroup g{"q" + std::to_string(q), "", {}};
    for (int d = 0; d < 3; ++d) g.pairs.push_back({g.query_id, "d" + std::to_string(d), d, {{"a", d}, {"b", d}}});
    groups.push_back(g);
  }
  const auto j = to_json(eval_report(groups, {"a"}, "b"));
  for (const auto& t : j["tests"]) {
    EXPECT_EQ(t["status"], "not_applicable");
    EXPECT_EQ(t["note"], "no nonzero differences");
  }
}

TEST(Report, UnknownLabelerRejected) {
  std::vector<QueryGroup> groups = {{"q", "", {{"q", "d", 1, {{"a", 1}}}}}};
  EXPECT_THROW(eval_report(groups, {"zzz"}, "a"), ConfigError);
  EXPECT_THROW(eval_report(groups, {"a"}, "zzz"), ConfigError);
}

TEST(Report, JudgedScoreOutOfRange) {
  TempDir dir;
  EXPECT_THROW(load_judged(dir.write("j.jsonl", R"({"query_id":"q","doc_id":"d","human_score":5})" "\n")), DataError);
}

TEST(Rpm, Formula) {
  EXPECT_EQ(measure_rpm(120, std::chrono::minutes(2)), 60.0);
  EXPECT_THROW(measure_rpm(5, std::chrono::seconds(0)), ConfigError);
}

TEST(Rpm, MockLatencyHarness) {
  llm::CompletionConfig cfg;
  cfg.mock = true;
  cfg.parallelism = 1;
  cfg.mock_latency = std::chrono::milliseconds(100);
  llm::CompletionClient client(cfg);
  Document d;
  d.id = "d";
  d.content = "budget report";
  const auto templates = llm::PromptTemplates::defaults();
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 60; ++i) {
    client.complete(llm::build_labeling_prompt(templates, {}, "budget " + std::to_string(i), d));
  }
  const double rpm = measure_rpm(60, std::chrono::steady_clock::now() - start);
  EXPECT_GE(rpm, 540.0);
  EXPECT_LE(rpm, 600.0);
}

TEST(TrainingManifest, Defaults) {
  const pipeline::TrainingConfig t;
  const auto j = pipeline::training_manifest_json(t);
  EXPECT_EQ(j["epochs"], 2);
  EXPECT_EQ(j["max_seq_len"], 4096);
  EXPECT_EQ(j["per_device_batch"], 4);
  EXPECT_EQ(j["grad_accum"], 8);
  EXPECT_EQ(j["effective_batch"], 32);
  EXPECT_EQ(j["log_every"], 40);
  EXPECT_EQ(j["eval_every"], 80);
}

TEST(TrainingManifest, EffectiveBatchRecomputed) {
  pipeline::TrainingConfig t;
  t.per_device_batch = 2;
  t.grad_accum = 16;
  t.epochs = 3;
  const auto j = pipeline::training_manifest_json(t);
  EXPECT_EQ(j["effective_batch"], 32);
  EXPECT_EQ(j["epochs"], 3);
  t.grad_accum = 0;
  TempDir dir;
  EXPECT_THROW(pipeline::emit_training_manifest(t, dir / "m.json"), ConfigError);
}
