#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <unordered_set>
#include <vector>

#include "synthrel/corpus.hpp"
#include "synthrel/llm/parsers.hpp"
#include "synthrel/llm/prompts.hpp"
#include "synthrel/templates.hpp"

namespace synthrel::llm {

struct MockOptions {
  std::chrono::milliseconds latency{0};
  const StopwordSet* stopwords = nullptr;  // null = bundled list
};

/// Lexical-overlap score: round(4 * |Q ∩ D| / |Q|) over distinct query
/// tokens, 0 for an empty query.
inline int mock_overlap_score(std::string_view query, std::string_view document) {
  const auto q_tokens = tokenize(query);
  std::unordered_set<std::string> q(q_tokens.begin(), q_tokens.end());
  if (q.empty()) return 0;
  const auto d_tokens = tokenize(document);
  std::unordered_set<std::string> d(d_tokens.begin(), d_tokens.end());
  std::size_t hit = 0;
  for (const auto& t : q) hit += d.contains(t) ? 1 : 0;
  const double overlap = static_cast<double>(hit) / static_cast<double>(q.size());
  return static_cast<int>(std::clamp<long>(std::lround(4.0 * overlap), 0, 4));
}

namespace detail {

inline std::string join_tokens(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

// Segment tokens for query `variant`: all of them for short segments,
// otherwise all but the token at a rotating position.
inline std::string rotating_subset(const TokenList& tokens, std::size_t variant) {
  if (tokens.size() < 3) return join_tokens(tokens);
  const std::size_t skip = variant % tokens.size();
  TokenList kept;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i != skip) kept.push_back(tokens[i]);
  }
  return join_tokens(kept);
}

// Variant 0 keeps every token, 1 the even positions, 2 the odd positions
// (falling back to the last token).
inline std::string alternating_subset(const TokenList& tokens, std::size_t variant) {
  if (variant == 0 || tokens.size() < 2) return join_tokens(tokens);
  TokenList kept;
  for (std::size_t i = variant - 1; i < tokens.size(); i += 2) kept.push_back(tokens[i]);
  if (kept.empty()) kept.push_back(tokens.back());
  return join_tokens(kept);
}

inline std::vector<std::string> split_keywords(const std::string& joined) {
  std::vector<std::string> out;
  for (auto& k : split_list(joined)) {
    if (!k.empty()) out.push_back(std::move(k));
  }
  return out;
}

inline std::string mock_generation(const Prompt& prompt, std::uint64_t seed,
                                   const StopwordSet& stopwords) {
  Document scratch;
  scratch.content = prompt.meta("content");
  const auto keywords = extract_keywords_fallback(scratch, kMaxKeywords, stopwords);
  const auto segments = split_metadata_string(prompt.meta("metadata_string"));
  std::vector<std::string> queries;
  for (std::size_t q = 0; q < kQueriesPerPrompt; ++q) {
    const std::size_t variant = q + static_cast<std::size_t>(seed % 3);
    std::vector<std::string> parts;
    std::size_t slot = 0;  // keyword slots seen so far
    for (std::size_t s = 0; s < segments.size(); ++s) {
      if (segments[s] == kKeywordSentinel) {
        if (!keywords.empty()) parts.push_back(keywords[(q + slot++) % keywords.size()]);
      } else {
        parts.push_back(rotating_subset(tokenize(segments[s]), variant));
      }
    }
    auto query = join_tokens(parts);
    if (query.empty()) query = keywords.empty() ? "untitled document" : keywords.front();
    queries.push_back(std::move(query));
  }
  return "Keywords: " + join(keywords, ", ") + "\nQueries: " + join(queries, ", ");
}

inline std::string mock_revision(const Prompt& prompt) {
  const auto keywords = split_keywords(prompt.meta("keywords"));
  const auto segments = split_metadata_string(prompt.meta("metadata_string"));
  std::vector<std::string> revised;
  for (std::size_t q = 0; q < kQueriesPerPrompt; ++q) {
    std::vector<std::string> parts;
    std::size_t slot = 0;  // keyword slots seen so far
    for (std::size_t s = 0; s < segments.size(); ++s) {
      if (segments[s] == kKeywordSentinel) {
        if (!keywords.empty()) parts.push_back(keywords[(q + slot++) % keywords.size()]);
      } else {
        parts.push_back(alternating_subset(tokenize(segments[s]), (q + s) % 3));
      }
    }
    auto query = join_tokens(parts);
    if (query.empty()) query = prompt.meta("query_" + std::to_string(q));
    // Short metadata can collapse variants; borrow a keyword to separate them.
    if (std::find(revised.begin(), revised.end(), query) != revised.end() && !keywords.empty()) {
      query += ' ';
      query += keywords[q % keywords.size()];
    }
    revised.push_back(std::move(query));
  }
  return "Revised Queries: " + join(revised, ", ");
}

}  // namespace detail

/// Deterministic offline stand-in for the completion endpoint.
inline std::string mock_complete(const Prompt& prompt, std::uint64_t seed,
                                 const MockOptions& opts = {}) {
  if (opts.latency.count() > 0) std::this_thread::sleep_for(opts.latency);
  const StopwordSet& stopwords = opts.stopwords ? *opts.stopwords : default_stopwords();
  switch (prompt.kind) {
    case PromptKind::PositiveGen:
      return detail::mock_generation(prompt, seed, stopwords);
    case PromptKind::Revision:
      return detail::mock_revision(prompt);
    case PromptKind::Labeling: {
      const int score = mock_overlap_score(prompt.meta("query"), prompt.meta("document"));
      return "The query terms were compared with the document metadata and highlights.\nScore: " +
             std::to_string(score);
    }
  }
  return {};
}

}  // namespace synthrel::llm
