// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "../bm25_oracle.hpp"
#include "../eval_oracles.hpp"
#include "../parser_fuzz.hpp"
#include "../test_util.hpp"
#include "synthrel/cli/app.hpp"
#include "synthrel/eval/metrics.hpp"
#include "synthrel/eval/report.hpp"
#include "synthrel/eval/wilcoxon.hpp"
#include "synthrel/llm/client.hpp"
#include "synthrel/llm/parsers.hpp"
#include "synthrel/pipeline/assemble.hpp"
#include "synthrel/pipeline/types.hpp"

using namespace synthrel;
namespace st = synthrel::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail.clear();
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int run_cli_quiet(std::vector<std::string> args) {
  args.insert(args.begin(), "synthrel");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

// Shared by criteria 5, 6 and 8.
struct PipelineRuns {
  st::TempDir dir;
  int code_a = -1, code_b = -1, code_rerun = -1;
  double seconds_a = 0;
  json report_a, report_rerun;
  std::string dataset_a, dataset_b, manifest_a, manifest_b, dataset_rerun;

  PipelineRuns() {
    const auto cfg = st::fixture("pipeline.json").string();
    const auto t0 = std::chrono::steady_clock::now();
    code_a = run_cli_quiet({"pipeline", "--config", cfg, "--seed", "2024", "--out", (dir / "a").string()});
    seconds_a = seconds_since(t0);
    if (code_a != 0) return;
    report_a = json::parse(st::slurp(dir / "a" / cli::files::kRunReport));
    dataset_a = st::slurp(dir / "a" / "dataset.jsonl");
    manifest_a = st::slurp(dir / "a" / "dataset.manifest.json");
    code_b = run_cli_quiet({"pipeline", "--config", cfg, "--seed", "2024", "--out", (dir / "b").string()});
    dataset_b = st::slurp(dir / "b" / "dataset.jsonl");
    manifest_b = st::slurp(dir / "b" / "dataset.manifest.json");
    code_rerun = run_cli_quiet({"pipeline", "--config", cfg, "--seed", "2024", "--out", (dir / "a").string()});
    report_rerun = json::parse(st::slurp(dir / "a" / cli::files::kRunReport));
    dataset_rerun = st::slurp(dir / "a" / "dataset.jsonl");
  }
};

PipelineRuns& runs() {
  static PipelineRuns r;
  return r;
}

Outcome metric_oracles() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  auto rng = make_rng(613);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto l = st::random_scored_list(rng);
    eval::QueryGroup g{"q", "", {}};
    for (std::size_t j = 0; j < l.doc_ids.size(); ++j) {
      g.pairs.push_back({"q", l.doc_ids[j], l.reference[j], {{"x", l.predicted[j]}}});
    }
    const auto n = eval::ndcg_per_query(g, "x");
    const double ref = st::oracle_ndcg(l);
    if (ref < 0) {
      o.check(n.is_skip(), "group " + std::to_string(i) + ": expected an NDCG skip");
    } else {
      o.check(n.value.has_value(), "group " + std::to_string(i) + ": unexpected NDCG skip");
      if (n.value) worst = std::max(worst, std::abs(*n.value - ref));
    }
    const auto a = eval::pairwise_accuracy_per_query(g, "x");
    o.check(a.value.has_value(), "group " + std::to_string(i) + ": unexpected accuracy skip");
    if (a.value) worst = std::max(worst, std::abs(*a.value - st::oracle_accuracy(l)));
  }
  const double secs = seconds_since(t0);
  o.check(worst <= 1e-12, "max deviation " + fmt("%.3g", worst));
  o.check(secs < 5.0, "runtime " + fmt("%.2f", secs) + " s");
  if (o.pass) o.detail = "100 groups, max deviation " + fmt("%.3g", worst) + ", " + fmt("%.3f", secs) + " s";
  return o;
}

Outcome worked_examples() {
  Outcome o;
  const eval::ScoredList acc{{"d1", "d2", "d3"}, {3, 1, 1}, {2, 2, 0}};
  const auto a = eval::pairwise_accuracy(acc);
  o.check(a.value && *a.value == 1.0 / 3.0, "accuracy is not exactly 1/3");
  const eval::ScoredList nd{{"d1", "d2", "d3"}, {3, 2, 0}, {0, 1, 2}};
  const auto n = eval::ndcg(nd);
  o.check(n.value && std::abs(*n.value - 0.6064) <= 5e-4, "NDCG outside 0.6064 +- 5e-4");
  if (o.pass) o.detail = "accuracy 1/3, NDCG " + fmt("%.6f", *n.value);
  return o;
}

Outcome wilcoxon() {
  Outcome o;
  std::vector<double> ten;
  for (int i = 1; i <= 10; ++i) ten.push_back(0.003 * i);
  const auto r = eval::wilcoxon_noninferiority(ten, eval::kDefaultAccuracyMargin);
  std::vector<double> shifted;
  for (double d : ten) shifted.push_back(d + eval::kDefaultAccuracyMargin);
  o.check(r.method == eval::PValueMethod::Exact, "n=10 did not use the exact method");
  o.check(r.p_value == 0.0009765625, "n=10 p = " + fmt("%.17g", r.p_value));
  o.check(r.p_value == st::oracle_signed_rank_p(shifted), "n=10 p differs from the enumeration oracle");

  auto rng = make_rng(20);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto xs = st::random_tie_free(rng, 20);
    const auto e = eval::wilcoxon_noninferiority(xs, 0.0);
    o.check(e.method == eval::PValueMethod::Exact, "tie-free n=20 did not use the exact method");
    worst = std::max(worst, std::abs(e.p_value - eval::normal_upper_tail(20, e.statistic, {})));
  }
  o.check(worst <= 0.01, "exact vs normal max gap " + fmt("%.4f", worst));

  o.check(eval::kDefaultAccuracyMargin == 0.001 && eval::kDefaultNdcgMargin == 0.0001, "default margins");
  const auto groups = eval::load_judged(st::fixture("gold.jsonl"));
  const auto j = eval::to_json(eval::eval_report(groups, {"slm"}, "llm"));
  o.check(j["margins"]["accuracy"] == 0.001 && j["margins"]["ndcg"] == 0.0001, "margins not recorded in report");
  if (o.pass) {
    o.detail = "p = 1/1024 exactly; exact vs normal max gap " + fmt("%.4f", worst) + "; margins 0.001 / 0.0001";
  }
  return o;
}

Outcome bm25() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  auto rng = make_rng(404);
  std::size_t compared = 0;
  double worst = 0.0;
  for (int c = 0; c < 20; ++c) {
    const std::size_t n_docs = 1 + uniform_below(rng, 1000);
    const std::size_t vocab = 5 + uniform_below(rng, 300);
    const auto corpus = st::random_corpus(rng, n_docs, vocab);
    Bm25Params p{0.1 + 2.9 * uniform01(rng), uniform01(rng)};
    const auto idx = Bm25Index::build(corpus, p);
    const st::BruteForce oracle(corpus, p);
    for (int q = 0; q < 10; ++q) {
      TokenList query;
      const auto qlen = 1 + uniform_below(rng, 5);
      for (std::uint64_t i = 0; i < qlen; ++i) query.push_back(st::random_word(rng, vocab + 20));
      const std::size_t k = 1 + uniform_below(rng, 60);
      const auto got = idx.top_k(query, k);
      const auto want = oracle.top(query, k);
      if (got.size() != want.size()) {
        o.check(false, "corpus " + std::to_string(c) + ": hit count differs");
        continue;
      }
      for (std::size_t i = 0; i < got.size(); ++i) {
        o.check(got[i].doc_id == want[i].first, "corpus " + std::to_string(c) + ": order differs");
        worst = std::max(worst, std::abs(got[i].score - want[i].second) / std::max(1.0, want[i].second));
        ++compared;
      }
    }
  }
  o.check(worst <= 1e-12, "max relative score deviation " + fmt("%.3g", worst));

  auto prng = make_rng(1000);
  std::size_t violations = 0;
  for (int draw = 0; draw < 1000; ++draw) {
    Bm25Params p{1e-3 + 5.0 * uniform01(prng), uniform01(prng)};
    const double idf = bm25_idf(1 + uniform_below(prng, 1000), 0) * (0.01 + uniform01(prng));
    const double dl = static_cast<double>(uniform_below(prng, 500));
    const double avgdl = 0.5 + 300.0 * uniform01(prng);
    const double tf = 1.0 + static_cast<double>(uniform_below(prng, 50));
    if (!(bm25_term(idf, tf, dl, avgdl, p) < bm25_term(idf, tf + 1.0, dl, avgdl, p))) ++violations;
  }
  o.check(violations == 0, std::to_string(violations) + " tf-monotonicity violations");
  const double secs = seconds_since(t0);
  o.check(secs < 30.0, "runtime " + fmt("%.2f", secs) + " s");
  if (o.pass) {
    o.detail = std::to_string(compared) + " ranked hits matched, max relative deviation " + fmt("%.2g", worst) +
               ", 1000 tf draws monotone, " + fmt("%.2f", secs) + " s";
  }
  return o;
}

Outcome end_to_end() {
  Outcome o;
  auto& r = runs();
  o.check(r.code_a == 0, "pipeline exit code " + std::to_string(r.code_a));
  if (!o.pass) return o;
  o.check(r.seconds_a < 60.0, "runtime " + fmt("%.2f", r.seconds_a) + " s");
  const auto triplets = pipeline::read_rows<pipeline::LabeledTriplet>(r.dir / "a" / cli::files::kTriplets,
                                                                      pipeline::triplet_from_json);
  const auto dist = pipeline::LabelDistribution::of(triplets);
  for (int l = 0; l < pipeline::kNumLevels; ++l) {
    o.check(dist.counts[static_cast<std::size_t>(l)] > 0, "level " + std::to_string(l) + " is empty");
  }
  const double ratio = dist.max_min_ratio();
  o.check(ratio <= 3.0, "max/min level ratio " + fmt("%.3f", ratio));
  std::size_t single_low = 0;
  for (const auto& t : triplets) {
    if (t.origin == pipeline::Origin::PositiveGen && t.score <= 1 && t.attempts.size() < 2) ++single_low;
  }
  o.check(single_low == 0, std::to_string(single_low) + " low positives without a second label");
  o.check(r.report_a.at("config").at("k") == 4, "k is not 4");
  if (o.pass) {
    std::string counts;
    for (auto c : dist.counts) counts += (counts.empty() ? "" : "/") + std::to_string(c);
    o.detail = std::to_string(triplets.size()) + " triplets, levels " + counts + ", ratio " + fmt("%.3f", ratio) +
               " (before rebalance " + fmt("%.3f", r.report_a["rebalance"]["before"]["max_min_ratio"].get<double>()) +
               "), " + fmt("%.2f", r.seconds_a) + " s";
  }
  return o;
}

Outcome determinism() {
  Outcome o;
  auto& r = runs();
  o.check(r.code_a == 0 && r.code_b == 0 && r.code_rerun == 0, "a pipeline run failed");
  if (!o.pass) return o;
  o.check(!r.dataset_a.empty() && r.dataset_a == r.dataset_b, "dataset differs between runs");
  o.check(r.manifest_a == r.manifest_b, "manifest differs between runs");
  const auto calls = r.report_rerun["client"]["endpoint_calls"].get<std::size_t>();
  o.check(calls == 0, "rerun issued " + std::to_string(calls) + " completion calls");
  o.check(r.dataset_rerun == r.dataset_a, "rerun changed the dataset");
  if (o.pass) {
    o.detail = "dataset and manifest byte-identical; rerun replayed " +
               std::to_string(r.report_rerun["client"]["replayed"].get<std::size_t>()) + " responses, 0 new calls";
  }
  return o;
}

Outcome rpm() {
  Outcome o;
  o.check(eval::measure_rpm(120, std::chrono::minutes(2)) == 60.0, "measure_rpm(120, 2 min) != 60");
  llm::CompletionConfig cfg;
  cfg.mock = true;
  cfg.parallelism = 1;
  cfg.mock_latency = std::chrono::milliseconds(100);
  llm::CompletionClient client(cfg);
  Document d;
  d.id = "d";
  d.content = "quarterly budget report";
  const auto templates = llm::PromptTemplates::defaults();
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 60; ++i) {
    client.complete(llm::build_labeling_prompt(templates, {}, "budget " + std::to_string(i), d));
  }
  const double measured = eval::measure_rpm(60, std::chrono::steady_clock::now() - t0);
  o.check(measured >= 540.0 && measured <= 600.0, "measured RPM " + fmt("%.1f", measured));
  if (o.pass) o.detail = "60.0 exactly; mock harness " + fmt("%.1f", measured) + " RPM";
  return o;
}

Outcome training_manifest() {
  Outcome o;
  auto expect = [&](const json& j, const std::string& where) {
    const std::vector<std::pair<const char*, int>> want = {{"epochs", 2},         {"max_seq_len", 4096},
                                                           {"per_device_batch", 4}, {"grad_accum", 8},
                                                           {"effective_batch", 32}, {"eval_every", 80}};
    for (const auto& [k, v] : want) o.check(j.at(k) == v, where + " " + k + " = " + j.at(k).dump());
  };
  expect(pipeline::training_manifest_json(pipeline::TrainingConfig{}), "defaults");
  auto& r = runs();
  if (r.code_a == 0) {
    expect(json::parse(st::slurp(r.dir / "a" / cli::files::kTrainingManifest)), "emitted");
    expect(json::parse(r.manifest_a).at("training"), "dataset manifest");
  } else {
    o.check(false, "pipeline run failed");
  }
  if (o.pass) o.detail = "epochs 2, max_seq_len 4096, batch 4 x accum 8 = 32, eval every 80";
  return o;
}

Outcome parsers() {
  Outcome o;
  auto rng = make_rng(9);
  std::size_t good_ok = 0, bad_ok = 0, silent = 0;
  auto good = [&](auto&& parse, const std::string& text, const auto& expect) {
    try {
      if (parse(text) == expect) ++good_ok;
      else ++silent;
    } catch (const ParseError&) {
    }
  };
  auto bad = [&](auto&& parse, const st::BadResponse& b) {
    try {
      parse(b.text);
      ++silent;
    } catch (const ParseError& e) {
      if (e.kind() == b.kind) ++bad_ok;
    }
  };
  auto gen = [](const std::string& t) { return llm::parse_generation(t); };
  auto rev = [](const std::string& t) { return llm::parse_revision(t); };
  auto score = [](const std::string& t) { return llm::parse_score(t); };
  for (int i = 0; i < 100; ++i) {
    const auto g = st::good_generation(rng);
    good([&](const std::string& t) { auto r = gen(t); return std::make_pair(r.keywords, r.queries); }, g.text,
         std::make_pair(g.expect.keywords, g.expect.queries));
    const auto v = st::good_revision(rng);
    good(rev, v.text, v.expect);
    const auto s = st::good_score(rng);
    good(score, s.text, s.expect);
    bad(gen, st::bad_generation(rng));
    bad(rev, st::bad_revision(rng));
    bad(score, st::bad_score(rng));
  }
  o.check(good_ok == 300, std::to_string(good_ok) + "/300 well-formed accepted");
  o.check(bad_ok == 300, std::to_string(bad_ok) + "/300 mutated rejected with the expected error kind");
  o.check(silent == 0, std::to_string(silent) + " silent misparses");
  if (o.pass) o.detail = "300/300 well-formed accepted, 300/300 mutated rejected, 0 silent misparses";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric oracle equivalence", metric_oracles},
      {"worked metric examples", worked_examples},
      {"wilcoxon exactness and margins", wilcoxon},
      {"bm25 correctness", bm25},
      {"end-to-end mock pipeline", end_to_end},
      {"determinism and resumability", determinism},
      {"rpm harness", rpm},
      {"training manifest defaults", training_manifest},
      {"parser robustness", parsers},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << criteria[i].first << " (" << o.detail
              << ")" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
