#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "synthrel/error.hpp"

namespace synthrel::eval {

struct JudgedPair {
  std::string query_id;
  std::string doc_id;
  int gold_score = 0;
  std::map<std::string, int> labeler_scores;
};

struct QueryGroup {
  std::string query_id;
  std::string query;
  std::vector<JudgedPair> pairs;
};

enum class SkipReason { ZeroIdealDcg, TooFewDocuments };

inline const char* to_string(SkipReason r) {
  return r == SkipReason::ZeroIdealDcg ? "zero_ideal_dcg" : "too_few_documents";
}

// A per-query metric value, or the reason the query has none.
struct QueryMetric {
  std::optional<double> value;
  std::optional<SkipReason> skip;

  static QueryMetric of(double v) { return {v, std::nullopt}; }
  static QueryMetric skipped(SkipReason r) { return {std::nullopt, r}; }
  bool is_skip() const { return !value.has_value(); }
};

// Graded scores for one query: `reference` plays the role of gold and
// `predicted` the labeler under test. Both are aligned with `doc_ids`.
struct ScoredList {
  std::vector<std::string> doc_ids;
  std::vector<int> reference;
  std::vector<int> predicted;
};

/// Extracts aligned reference/predicted scores. A reference name of "human"
/// (or empty) selects the gold score.
inline ScoredList scored_list(const QueryGroup& group, const std::string& labeler,
                              const std::string& reference = "human") {
  ScoredList out;
  for (const auto& pair : group.pairs) {
    auto lookup = [&](const std::string& name) -> int {
      if (name.empty() || name == "human") return pair.gold_score;
      auto it = pair.labeler_scores.find(name);
      if (it == pair.labeler_scores.end()) {
        throw DataError("missing " + name + " score for query " + group.query_id + " doc " + pair.doc_id);
      }
      return it->second;
    };
    out.doc_ids.push_back(pair.doc_id);
    out.reference.push_back(lookup(reference));
    out.predicted.push_back(lookup(labeler));
  }
  return out;
}

inline double gain(int relevance) { return std::exp2(static_cast<double>(relevance)) - 1.0; }

/// Full NDCG: documents ranked by predicted score (ties by doc id), gains
/// 2^rel - 1, discount log2(rank + 1). Skips when the ideal DCG is 0.
inline QueryMetric ndcg(const ScoredList& list) {
  const std::size_t n = list.doc_ids.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (list.predicted[a] != list.predicted[b]) return list.predicted[a] > list.predicted[b];
    return list.doc_ids[a] < list.doc_ids[b];
  });
  std::vector<int> ideal = list.reference;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());

  double dcg = 0.0;
  double idcg = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double discount = std::log2(static_cast<double>(r) + 2.0);
    dcg += gain(list.reference[order[r]]) / discount;
    idcg += gain(ideal[r]) / discount;
  }
  if (idcg == 0.0) return QueryMetric::skipped(SkipReason::ZeroIdealDcg);
  return QueryMetric::of(dcg / idcg);
}

inline int order_relation(int a, int b) { return (a > b) - (a < b); }

/// Fraction of unordered document pairs whose predicted relation (<, =, >)
/// matches the reference relation. Skips queries with fewer than 2 docs.
inline QueryMetric pairwise_accuracy(const ScoredList& list) {
  const std::size_t n = list.doc_ids.size();
  if (n < 2) return QueryMetric::skipped(SkipReason::TooFewDocuments);
  std::size_t matches = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (order_relation(list.reference[i], list.reference[j]) ==
          order_relation(list.predicted[i], list.predicted[j])) {
        ++matches;
      }
    }
  }
  const double total = static_cast<double>(n * (n - 1) / 2);
  return QueryMetric::of(static_cast<double>(matches) / total);
}

inline QueryMetric ndcg_per_query(const QueryGroup& group, const std::string& labeler,
                                  const std::string& reference = "human") {
  return ndcg(scored_list(group, labeler, reference));
}

inline QueryMetric pairwise_accuracy_per_query(const QueryGroup& group, const std::string& labeler,
                                               const std::string& reference = "human") {
  return pairwise_accuracy(scored_list(group, labeler, reference));
}

/// Unweighted mean over non-skipped values, summed in input order.
inline double macro_average(const std::vector<QueryMetric>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v.value) {
      sum += *v.value;
      ++n;
    }
  }
  if (n == 0) throw DataError("no non-skipped queries to average");
  return sum / static_cast<double>(n);
}

inline double macro_average(const std::vector<double>& values) {
  if (values.empty()) throw DataError("no non-skipped queries to average");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

/// Requests per minute.
template <typename Rep, typename Period>
double measure_rpm(std::size_t n_requests, std::chrono::duration<Rep, Period> elapsed) {
  const double minutes = std::chrono::duration<double, std::ratio<60>>(elapsed).count();
  if (!(minutes > 0.0)) throw ConfigError("elapsed time must be positive");
  return static_cast<double>(n_requests) / minutes;
}

}  // namespace synthrel::eval
