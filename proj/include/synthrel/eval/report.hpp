#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "synthrel/error.hpp"
#include "synthrel/eval/metrics.hpp"
#include "synthrel/eval/wilcoxon.hpp"
#include "synthrel/jsonl.hpp"

namespace synthrel::eval {

namespace detail {

inline int checked_score(const json& v, const std::string& what, std::size_t line) {
  if (!v.is_number_integer()) {
    throw DataError(what + " must be an integer at line " + std::to_string(line));
  }
  const int s = v.get<int>();
  if (s < 0 || s > 4) throw DataError(what + " out of range 0..4 at line " + std::to_string(line));
  return s;
}

}  // namespace detail

/// Loads gold judgments grouped by query, in order of first appearance.
/// Labeler scores come from a nested "labeler_scores" object, from
/// "<name>_score" fields, or from any other top-level integer field.
inline std::vector<QueryGroup> load_judged(const std::filesystem::path& path) {
  std::vector<QueryGroup> groups;
  std::unordered_map<std::string, std::size_t> index;
  std::unordered_map<std::string, std::set<std::string>> seen_docs;
  for_each_jsonl(path, [&](const json& row, std::size_t line) {
    for (const char* key : {"query_id", "doc_id"}) {
      if (!row.contains(key) || !row[key].is_string()) {
        throw DataError(std::string("missing string field ") + key + " at line " + std::to_string(line));
      }
    }
    if (!row.contains("human_score")) throw DataError("missing human_score at line " + std::to_string(line));
    JudgedPair pair;
    pair.query_id = row["query_id"].get<std::string>();
    pair.doc_id = row["doc_id"].get<std::string>();
    pair.gold_score = detail::checked_score(row["human_score"], "human_score", line);
    for (auto it = row.begin(); it != row.end(); ++it) {
      const std::string& key = it.key();
      if (key == "query_id" || key == "doc_id" || key == "query" || key == "human_score") continue;
      if (key == "labeler_scores" && it->is_object()) {
        for (auto s = it->begin(); s != it->end(); ++s) {
          pair.labeler_scores[s.key()] = detail::checked_score(*s, s.key(), line);
        }
        continue;
      }
      if (!it->is_number()) continue;
      std::string name = key;
      if (name.size() > 6 && name.ends_with("_score")) name.resize(name.size() - 6);
      pair.labeler_scores[name] = detail::checked_score(*it, key, line);
    }
    auto [pos, inserted] = index.emplace(pair.query_id, groups.size());
    if (inserted) {
      QueryGroup g;
      g.query_id = pair.query_id;
      g.query = row.value("query", std::string{});
      groups.push_back(std::move(g));
    }
    if (!seen_docs[pair.query_id].insert(pair.doc_id).second) {
      throw DataError("duplicate doc " + pair.doc_id + " in query " + pair.query_id + " at line " +
                      std::to_string(line));
    }
    groups[pos->second].pairs.push_back(std::move(pair));
  });
  if (groups.empty()) throw DataError("judged file has no rows: " + path.string());
  return groups;
}

struct MetricReport {
  std::string labeler;
  std::string reference;  // "human" or the baseline labeler
  std::vector<std::string> query_ids;
  std::vector<QueryMetric> ndcg;
  std::vector<QueryMetric> accuracy;
  std::optional<double> mean_ndcg;
  std::optional<double> mean_accuracy;
  std::map<std::string, std::size_t> skipped_ndcg;
  std::map<std::string, std::size_t> skipped_accuracy;

  std::string name() const { return labeler + "-" + reference; }
};

inline MetricReport compute_metrics(const std::vector<QueryGroup>& groups, const std::string& labeler,
                                    const std::string& reference = "human") {
  MetricReport r;
  r.labeler = labeler;
  r.reference = reference;
  std::vector<double> ndcg_values;
  std::vector<double> acc_values;
  for (const auto& g : groups) {
    const auto list = scored_list(g, labeler, reference);
    r.query_ids.push_back(g.query_id);
    r.ndcg.push_back(ndcg(list));
    r.accuracy.push_back(pairwise_accuracy(list));
    if (r.ndcg.back().value) ndcg_values.push_back(*r.ndcg.back().value);
    else ++r.skipped_ndcg[to_string(*r.ndcg.back().skip)];
    if (r.accuracy.back().value) acc_values.push_back(*r.accuracy.back().value);
    else ++r.skipped_accuracy[to_string(*r.accuracy.back().skip)];
  }
  if (!ndcg_values.empty()) r.mean_ndcg = macro_average(ndcg_values);
  if (!acc_values.empty()) r.mean_accuracy = macro_average(acc_values);
  return r;
}

/// Per-query candidate-minus-baseline differences over queries where both
/// have a value, in query order.
inline std::vector<double> paired_deltas(const std::vector<QueryMetric>& candidate,
                                         const std::vector<QueryMetric>& baseline) {
  std::vector<double> deltas;
  for (std::size_t i = 0; i < candidate.size() && i < baseline.size(); ++i) {
    if (candidate[i].value && baseline[i].value) deltas.push_back(*candidate[i].value - *baseline[i].value);
  }
  return deltas;
}

struct NonInferiorityEntry {
  std::string labeler;
  std::string baseline;
  std::string metric;
  double margin = 0.0;
  std::size_t n_queries = 0;
  std::optional<NonInferiorityResult> result;  // empty when not applicable
  std::string note;
};

struct Margins {
  double accuracy = kDefaultAccuracyMargin;
  double ndcg = kDefaultNdcgMargin;
};

struct EvalReport {
  std::string baseline;
  Margins margins;
  std::vector<MetricReport> sections;
  std::vector<NonInferiorityEntry> tests;
  std::optional<double> rpm;
};

inline NonInferiorityEntry run_noninferiority(const std::string& labeler, const std::string& baseline,
                                              const std::string& metric, const std::vector<double>& deltas,
                                              double margin) {
  NonInferiorityEntry e{labeler, baseline, metric, margin, deltas.size(), std::nullopt, {}};
  if (deltas.empty()) {
    e.note = "no queries with values for both labelers";
  } else if (std::all_of(deltas.begin(), deltas.end(), [](double d) { return d == 0.0; })) {
    e.note = "no nonzero differences";
  } else {
    try {
      e.result = wilcoxon_noninferiority(deltas, margin, metric);
    } catch (const DataError& err) {
      e.note = err.what();
    }
  }
  return e;
}

/// Metrics for every labeler against the human gold, each candidate
/// against the baseline labeler, and non-inferiority tests of each
/// candidate versus the baseline on both metrics.
inline EvalReport eval_report(const std::vector<QueryGroup>& groups, const std::vector<std::string>& labelers,
                              const std::string& baseline, Margins margins = {}) {
  std::set<std::string> known;
  for (const auto& g : groups) {
    for (const auto& p : g.pairs) {
      for (const auto& [name, _] : p.labeler_scores) known.insert(name);
    }
  }
  auto require = [&](const std::string& name) {
    if (!known.contains(name)) throw ConfigError("unknown labeler " + name);
  };
  require(baseline);
  for (const auto& l : labelers) require(l);

  EvalReport report;
  report.baseline = baseline;
  report.margins = margins;
  const auto base = compute_metrics(groups, baseline, "human");
  for (const auto& l : labelers) {
    if (l == baseline) continue;
    auto vs_human = compute_metrics(groups, l, "human");
    report.tests.push_back(run_noninferiority(l, baseline, "ndcg", paired_deltas(vs_human.ndcg, base.ndcg),
                                              margins.ndcg));
    report.tests.push_back(run_noninferiority(l, baseline, "accuracy",
                                              paired_deltas(vs_human.accuracy, base.accuracy),
                                              margins.accuracy));
    report.sections.push_back(std::move(vs_human));
    report.sections.push_back(compute_metrics(groups, l, baseline));
  }
  report.sections.push_back(base);
  return report;
}

namespace detail {

inline json metric_or_null(const QueryMetric& m) { return m.value ? json(*m.value) : json(nullptr); }

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace detail

inline ordered_json to_json(const EvalReport& report) {
  ordered_json out;
  out["baseline"] = report.baseline;
  out["margins"] = {{"accuracy", report.margins.accuracy}, {"ndcg", report.margins.ndcg}};
  ordered_json sections = ordered_json::object();
  for (const auto& s : report.sections) {
    ordered_json sec;
    sec["labeler"] = s.labeler;
    sec["reference"] = s.reference;
    sec["mean_ndcg"] = detail::optional_number(s.mean_ndcg);
    sec["mean_accuracy"] = detail::optional_number(s.mean_accuracy);
    ordered_json per_query = ordered_json::object();
    for (std::size_t i = 0; i < s.query_ids.size(); ++i) {
      per_query[s.query_ids[i]] = {{"ndcg", detail::metric_or_null(s.ndcg[i])},
                                   {"accuracy", detail::metric_or_null(s.accuracy[i])}};
    }
    sec["per_query"] = std::move(per_query);
    sec["skips"] = {{"ndcg", s.skipped_ndcg}, {"accuracy", s.skipped_accuracy}};
    sections[s.name()] = std::move(sec);
  }
  out["sections"] = std::move(sections);
  ordered_json tests = ordered_json::array();
  for (const auto& t : report.tests) {
    ordered_json e;
    e["labeler"] = t.labeler;
    e["baseline"] = t.baseline;
    e["metric"] = t.metric;
    e["margin"] = t.margin;
    e["n_queries"] = t.n_queries;
    if (t.result) {
      e["status"] = "tested";
      e["n_effective"] = t.result->n_effective;
      e["W"] = t.result->statistic;
      e["p"] = t.result->p_value;
      e["reject"] = t.result->reject_h0;
      e["method"] = to_string(t.result->method);
    } else {
      e["status"] = "not_applicable";
      e["note"] = t.note;
    }
    tests.push_back(std::move(e));
  }
  out["tests"] = std::move(tests);
  out["rpm"] = detail::optional_number(report.rpm);
  return out;
}

/// Plain-text rendering of a report JSON (as produced by to_json).
inline std::string render_table(const json& report) {
  std::ostringstream os;
  auto num = [](const json& v, const char* fmt) {
    if (v.is_null()) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, fmt, v.get<double>());
    return std::string(buf);
  };
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %10s %14s %8s\n", "section", "NDCG", "Accuracy(%)", "queries");
  os << line;
  for (const auto& [name, sec] : report.at("sections").items()) {
    const json acc = sec["mean_accuracy"].is_null() ? json(nullptr) : json(sec["mean_accuracy"].get<double>() * 100.0);
    std::snprintf(line, sizeof line, "%-28s %10s %14s %8zu\n", name.c_str(),
                  num(sec["mean_ndcg"], "%.4f").c_str(), num(acc, "%.2f").c_str(), sec["per_query"].size());
    os << line;
  }
  if (!report.at("tests").empty()) {
    os << '\n';
    std::snprintf(line, sizeof line, "%-22s %-9s %9s %5s %10s %12s %-8s %s\n", "non-inferiority", "metric",
                  "margin", "n", "W", "p", "reject", "method");
    os << line;
    for (const auto& t : report["tests"]) {
      const auto who = t["labeler"].get<std::string>() + " vs " + t["baseline"].get<std::string>();
      if (t["status"] == "tested") {
        std::snprintf(line, sizeof line, "%-22s %-9s %9.4g %5zu %10.1f %12.6g %-8s %s\n", who.c_str(),
                      t["metric"].get<std::string>().c_str(), t["margin"].get<double>(),
                      t["n_effective"].get<std::size_t>(), t["W"].get<double>(), t["p"].get<double>(),
                      t["reject"].get<bool>() ? "yes" : "no", t["method"].get<std::string>().c_str());
      } else {
        std::snprintf(line, sizeof line, "%-22s %-9s %9.4g %5s %10s %12s %-8s %s\n", who.c_str(),
                      t["metric"].get<std::string>().c_str(), t["margin"].get<double>(), "-", "-", "-", "n/a",
                      t["note"].get<std::string>().c_str());
      }
      os << line;
    }
  }
  if (report.contains("rpm") && !report["rpm"].is_null()) {
    os << "\nRPM: " << num(report["rpm"], "%.2f") << '\n';
  }
  return os.str();
}

}  // namespace synthrel::eval
