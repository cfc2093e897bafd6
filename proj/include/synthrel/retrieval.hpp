#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "synthrel/corpus.hpp"
#include "synthrel/error.hpp"
#include "synthrel/jsonl.hpp"

namespace synthrel {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;

  void validate() const {
    if (!(k1 >= 0.0)) throw ConfigError("bm25.k1 must be >= 0");
    if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("bm25.b must be in [0, 1]");
  }
};

struct Posting {
  std::uint32_t doc = 0;  // index into the corpus
  std::uint32_t tf = 0;

  bool operator==(const Posting&) const = default;
};

struct RankedHit {
  std::string doc_id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

/// Tokens indexed for a document: content followed by every metadata value,
/// all in one field.
inline TokenList index_tokens(const Document& doc) {
  TokenList tokens = tokenize(doc.content);
  auto append = [&](const std::string& s) {
    for (auto& t : tokenize(s)) tokens.push_back(std::move(t));
  };
  append(doc.file_name);
  append(doc.author);
  append(doc.title);
  append(doc.file_type);
  append(doc.parent_folder);
  for (const auto& [k, v] : doc.extra) append(v);
  return tokens;
}

/// ln(1 + (N - df + 0.5) / (df + 0.5)); positive for every df in [0, N].
inline double bm25_idf(std::size_t n_docs, std::size_t df) {
  const double n = static_cast<double>(n_docs);
  const double d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

/// One term's contribution. With avgdl == 0 the length norm is taken as 1.
inline double bm25_term(double idf, double tf, double doc_len, double avg_doc_len,
                        const Bm25Params& p) {
  const double norm = avg_doc_len > 0.0 ? (1.0 - p.b + p.b * doc_len / avg_doc_len) : 1.0;
  return idf * (tf * (p.k1 + 1.0)) / (tf + p.k1 * norm);
}

// Immutable Okapi BM25 inverted index over a corpus.
class Bm25Index {
 public:
  static constexpr int kSnapshotVersion = 1;

  /// Throws DataError on an empty corpus.
  static Bm25Index build(const Corpus& corpus, Bm25Params params = {}) {
    params.validate();
    if (corpus.empty()) throw DataError("cannot index an empty corpus");
    Bm25Index idx;
    idx.params_ = params;
    idx.doc_ids_.reserve(corpus.size());
    idx.doc_lengths_.reserve(corpus.size());
    std::unordered_map<std::string, std::uint32_t> tf;
    double total = 0.0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto& doc = corpus[i];
      idx.doc_ids_.push_back(doc.id);
      tf.clear();
      const auto tokens = index_tokens(doc);
      for (const auto& t : tokens) ++tf[t];
      idx.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
      total += static_cast<double>(tokens.size());
      for (const auto& [term, count] : tf) {
        idx.postings_[term].push_back({static_cast<std::uint32_t>(i), count});
      }
    }
    idx.avg_doc_length_ = total / static_cast<double>(corpus.size());
    return idx;
  }

  const Bm25Params& params() const noexcept { return params_; }
  std::size_t n_docs() const noexcept { return doc_ids_.size(); }
  double avg_doc_length() const noexcept { return avg_doc_length_; }
  const std::vector<std::uint32_t>& doc_lengths() const noexcept { return doc_lengths_; }
  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  std::size_t n_terms() const noexcept { return postings_.size(); }

  const std::vector<Posting>* postings(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? nullptr : &it->second;
  }

  std::size_t document_frequency(const std::string& term) const {
    auto* p = postings(term);
    return p ? p->size() : 0;
  }

  /// Score of one document. Repeated query tokens contribute once per
  /// occurrence.
  double score(const TokenList& query_tokens, std::size_t doc) const {
    double total = 0.0;
    for (const auto& term : query_tokens) {
      auto* plist = postings(term);
      if (!plist) continue;
      auto it = std::lower_bound(plist->begin(), plist->end(), doc,
                                 [](const Posting& p, std::size_t d) { return p.doc < d; });
      if (it == plist->end() || it->doc != doc) continue;
      total += bm25_term(bm25_idf(n_docs(), plist->size()), it->tf, doc_lengths_[doc],
                         avg_doc_length_, params_);
    }
    return total;
  }

  /// Up to k positive-score documents ordered by (score desc, doc id asc),
  /// skipping `exclude`.
  std::vector<RankedHit> top_k(const TokenList& query_tokens, std::size_t k,
                               const std::unordered_set<std::string>& exclude = {}) const {
    if (k == 0) throw ConfigError("k must be at least 1");
    if (query_tokens.empty()) throw DataError("empty query");
    std::vector<double> acc(n_docs(), 0.0);
    std::vector<std::uint32_t> touched;
    for (const auto& term : query_tokens) {
      auto* plist = postings(term);
      if (!plist) continue;
      const double idf = bm25_idf(n_docs(), plist->size());
      for (const auto& p : *plist) {
        if (acc[p.doc] == 0.0) touched.push_back(p.doc);
        acc[p.doc] += bm25_term(idf, p.tf, doc_lengths_[p.doc], avg_doc_length_, params_);
      }
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());

    std::vector<std::uint32_t> candidates;
    candidates.reserve(touched.size());
    for (auto d : touched) {
      if (acc[d] > 0.0 && !exclude.contains(doc_ids_[d])) candidates.push_back(d);
    }
    auto better = [&](std::uint32_t a, std::uint32_t b) {
      if (acc[a] != acc[b]) return acc[a] > acc[b];
      return doc_ids_[a] < doc_ids_[b];
    };
    const std::size_t n = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n),
                      candidates.end(), better);
    std::vector<RankedHit> hits;
    hits.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      hits.push_back({doc_ids_[candidates[i]], acc[candidates[i]], i + 1});
    }
    return hits;
  }

  json to_json() const {
    json postings = json::object();
    std::map<std::string, const std::vector<Posting>*> sorted;
    for (const auto& [term, plist] : postings_) sorted.emplace(term, &plist);
    for (const auto& [term, plist] : sorted) {
      json arr = json::array();
      for (const auto& p : *plist) arr.push_back({p.doc, p.tf});
      postings[term] = std::move(arr);
    }
    return {{"version", kSnapshotVersion},
            {"params", {{"k1", params_.k1}, {"b", params_.b}}},
            {"doc_ids", doc_ids_},
            {"doc_lengths", doc_lengths_},
            {"postings", std::move(postings)}};
  }

  static Bm25Index from_json(const json& j) {
    if (j.value("version", 0) != kSnapshotVersion) throw DataError("unsupported index snapshot version");
    Bm25Index idx;
    idx.params_.k1 = j.at("params").at("k1").get<double>();
    idx.params_.b = j.at("params").at("b").get<double>();
    idx.doc_ids_ = j.at("doc_ids").get<std::vector<std::string>>();
    idx.doc_lengths_ = j.at("doc_lengths").get<std::vector<std::uint32_t>>();
    if (idx.doc_ids_.empty() || idx.doc_ids_.size() != idx.doc_lengths_.size()) {
      throw DataError("inconsistent index snapshot");
    }
    double total = 0.0;
    for (auto len : idx.doc_lengths_) total += static_cast<double>(len);
    idx.avg_doc_length_ = total / static_cast<double>(idx.doc_lengths_.size());
    for (const auto& [term, arr] : j.at("postings").items()) {
      auto& plist = idx.postings_[term];
      for (const auto& e : arr) plist.push_back({e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>()});
    }
    return idx;
  }

  void save(const std::filesystem::path& path) const { write_text_file(path, to_json().dump()); }

  static Bm25Index load(const std::filesystem::path& path) {
    auto j = json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded()) throw DataError("malformed index snapshot " + path.string());
    return from_json(j);
  }

 private:
  Bm25Params params_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<std::uint32_t> doc_lengths_;
  std::vector<std::string> doc_ids_;
  double avg_doc_length_ = 0.0;
};

}  // namespace synthrel
