#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "synthrel/corpus.hpp"
#include "synthrel/error.hpp"
#include "synthrel/jsonl.hpp"

namespace synthrel::pipeline {

enum class QueryStage { Raw, Revised };
enum class Origin { PositiveGen, Bm25Mined };

inline const char* to_string(QueryStage s) { return s == QueryStage::Raw ? "raw" : "revised"; }
inline const char* to_string(Origin o) { return o == Origin::PositiveGen ? "positive_gen" : "bm25_mined"; }

inline QueryStage parse_stage(const std::string& s) {
  if (s == "raw") return QueryStage::Raw;
  if (s == "revised") return QueryStage::Revised;
  throw DataError("unknown query stage " + s);
}

inline Origin parse_origin(const std::string& s) {
  if (s == "positive_gen") return Origin::PositiveGen;
  if (s == "bm25_mined") return Origin::Bm25Mined;
  throw DataError("unknown origin " + s);
}

inline constexpr int kNumLevels = 5;

struct SyntheticQuery {
  std::string query_id;
  std::string text;
  std::string source_doc_id;
  std::string pattern_id;
  QueryStage stage = QueryStage::Raw;
  std::string metadata_string;
  TokenList keywords;
};

struct LabelAttempt {
  int score = 0;
  std::string timestamp;
};

struct LabeledTriplet {
  SyntheticQuery query;
  std::string doc_id;
  int score = 0;
  Origin origin = Origin::PositiveGen;
  std::vector<LabelAttempt> attempts;
  std::size_t bm25_rank = 0;  // 0 for the source document
  std::size_t mined_k = 0;    // BM25 depth in effect for this query
};

// A (query, document) pair waiting to be labeled.
struct Candidate {
  SyntheticQuery query;
  std::string doc_id;
  Origin origin = Origin::PositiveGen;
  std::size_t bm25_rank = 0;
  std::size_t mined_k = 0;
};

struct LabelDistribution {
  std::array<std::size_t, kNumLevels> counts{};
  std::size_t total = 0;

  void add(int score) {
    ++counts.at(static_cast<std::size_t>(score));
    ++total;
  }

  double target() const { return static_cast<double>(total) / kNumLevels; }

  /// Every level within ±tolerance (relative) of total / 5.
  bool is_uniform(double tolerance) const {
    if (total == 0) return false;
    const double t = target();
    return std::all_of(counts.begin(), counts.end(), [&](std::size_t c) {
      return std::abs(static_cast<double>(c) - t) <= tolerance * t;
    });
  }

  /// max/min level count; infinite when a level is empty.
  double max_min_ratio() const {
    const auto [mn, mx] = std::minmax_element(counts.begin(), counts.end());
    if (*mn == 0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(*mx) / static_cast<double>(*mn);
  }

  static LabelDistribution of(const std::vector<LabeledTriplet>& triplets) {
    LabelDistribution d;
    for (const auto& t : triplets) d.add(t.score);
    return d;
  }
};

/// Counters and rejected items for one run. Thread-safe.
class RunLog {
 public:
  void count(const std::string& key, std::size_t n = 1) {
    std::lock_guard lock(mu_);
    counters_[key] += n;
  }

  void reject(const std::string& stage, const std::string& reason, const std::string& unit,
              const std::string& doc_id, const std::string& detail) {
    std::lock_guard lock(mu_);
    rejects_.push_back({stage, reason, unit, doc_id, detail});
  }

  void warn(const std::string& message) {
    std::lock_guard lock(mu_);
    warnings_.push_back(message);
  }

  std::size_t counter(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = counters_.find(key);
    return it == counters_.end() ? 0 : it->second;
  }

  std::map<std::string, std::size_t> counters() const {
    std::lock_guard lock(mu_);
    return counters_;
  }

  std::vector<std::string> warnings() const {
    std::lock_guard lock(mu_);
    return warnings_;
  }

  /// Rejects in canonical (stage, unit, doc, reason) order.
  std::vector<ordered_json> reject_rows() const {
    std::lock_guard lock(mu_);
    auto rows = rejects_;
    std::sort(rows.begin(), rows.end(), [](const Reject& a, const Reject& b) {
      return std::tie(a.stage, a.unit, a.doc_id, a.reason, a.detail) <
             std::tie(b.stage, b.unit, b.doc_id, b.reason, b.detail);
    });
    std::vector<ordered_json> out;
    for (const auto& r : rows) {
      ordered_json j;
      j["stage"] = r.stage;
      j["reason"] = r.reason;
      j["unit"] = r.unit;
      j["doc_id"] = r.doc_id;
      j["detail"] = r.detail;
      out.push_back(std::move(j));
    }
    return out;
  }

 private:
  struct Reject {
    std::string stage, reason, unit, doc_id, detail;
  };

  mutable std::mutex mu_;
  std::map<std::string, std::size_t> counters_;
  std::vector<Reject> rejects_;
  std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline ordered_json query_to_json(const SyntheticQuery& q) {
  ordered_json j;
  j["query_id"] = q.query_id;
  j["query"] = q.text;
  j["source_doc_id"] = q.source_doc_id;
  j["pattern_id"] = q.pattern_id;
  j["stage"] = to_string(q.stage);
  j["metadata_string"] = q.metadata_string;
  j["keywords"] = q.keywords;
  return j;
}

inline SyntheticQuery query_from_json(const json& j) {
  SyntheticQuery q;
  q.query_id = j.at("query_id").get<std::string>();
  q.text = j.at("query").get<std::string>();
  q.source_doc_id = j.at("source_doc_id").get<std::string>();
  q.pattern_id = j.value("pattern_id", std::string{});
  q.stage = parse_stage(j.value("stage", std::string("raw")));
  q.metadata_string = j.value("metadata_string", std::string{});
  q.keywords = j.value("keywords", TokenList{});
  if (q.text.empty()) throw DataError("empty query text for " + q.query_id);
  return q;
}

inline ordered_json candidate_to_json(const Candidate& c) {
  ordered_json j = query_to_json(c.query);
  j["doc_id"] = c.doc_id;
  j["origin"] = to_string(c.origin);
  j["bm25_rank"] = c.bm25_rank;
  j["mined_k"] = c.mined_k;
  return j;
}

inline Candidate candidate_from_json(const json& j) {
  Candidate c;
  c.query = query_from_json(j);
  c.doc_id = j.at("doc_id").get<std::string>();
  c.origin = parse_origin(j.at("origin").get<std::string>());
  c.bm25_rank = j.value("bm25_rank", std::size_t{0});
  c.mined_k = j.value("mined_k", std::size_t{0});
  return c;
}

/// Output triplet row. Attempt timestamps are left out so that repeated runs
/// produce identical files.
inline ordered_json triplet_to_json(const LabeledTriplet& t) {
  ordered_json j;
  j["query_id"] = t.query.query_id;
  j["query"] = t.query.text;
  j["source_doc_id"] = t.query.source_doc_id;
  j["pattern_id"] = t.query.pattern_id;
  j["doc_id"] = t.doc_id;
  j["score"] = t.score;
  j["origin"] = to_string(t.origin);
  j["stage"] = to_string(t.query.stage);
  j["bm25_rank"] = t.bm25_rank;
  j["mined_k"] = t.mined_k;
  std::vector<int> scores;
  for (const auto& a : t.attempts) scores.push_back(a.score);
  j["attempt_scores"] = scores;
  j["metadata_string"] = t.query.metadata_string;
  j["keywords"] = t.query.keywords;
  return j;
}

inline LabeledTriplet triplet_from_json(const json& j) {
  LabeledTriplet t;
  t.query = query_from_json(j);
  t.doc_id = j.at("doc_id").get<std::string>();
  t.score = j.at("score").get<int>();
  if (t.score < 0 || t.score > 4) throw DataError("score out of range for " + t.query.query_id);
  t.origin = parse_origin(j.at("origin").get<std::string>());
  t.bm25_rank = j.value("bm25_rank", std::size_t{0});
  t.mined_k = j.value("mined_k", std::size_t{0});
  for (int s : j.value("attempt_scores", std::vector<int>{})) t.attempts.push_back({s, {}});
  return t;
}

template <typename T, typename Fn>
std::vector<T> read_rows(const std::filesystem::path& path, Fn&& from_json) {
  std::vector<T> rows;
  for_each_jsonl(path, [&](const json& j, std::size_t line) {
    try {
      rows.push_back(from_json(j));
    } catch (const json::exception& e) {
      throw DataError(path.filename().string() + " line " + std::to_string(line) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.filename().string() + " line " + std::to_string(line) + ": " + e.what());
    }
  });
  return rows;
}

/// Sorts triplets by (query id, doc id).
inline void canonical_sort(std::vector<LabeledTriplet>& triplets) {
  std::sort(triplets.begin(), triplets.end(), [](const LabeledTriplet& a, const LabeledTriplet& b) {
    return std::tie(a.query.query_id, a.doc_id) < std::tie(b.query.query_id, b.doc_id);
  });
}

}  // namespace synthrel::pipeline
