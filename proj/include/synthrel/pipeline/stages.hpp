#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "synthrel/clock.hpp"
#include "synthrel/corpus.hpp"
#include "synthrel/llm/client.hpp"
#include "synthrel/llm/parsers.hpp"
#include "synthrel/llm/prompts.hpp"
#include "synthrel/parallel.hpp"
#include "synthrel/pipeline/types.hpp"
#include "synthrel/random.hpp"
#include "synthrel/retrieval.hpp"
#include "synthrel/templates.hpp"

namespace synthrel::pipeline {

struct PipelineOptions {
  std::size_t k = 4;
  std::size_t k_max = 16;
  double tolerance = 0.2;  // per-level relative deviation from total / 5
  bool revision = true;
  std::size_t patterns_per_document = 1;
  std::uint64_t seed = 0;
  std::size_t parallelism = 4;

  void validate() const {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (k_max < k) throw ConfigError("k_max must be >= k");
    if (!(tolerance >= 0.0)) throw ConfigError("tolerance must be >= 0");
    if (patterns_per_document < 1) throw ConfigError("patterns_per_document must be >= 1");
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  }
};

// Everything a stage needs. Non-owning; outlives the stage call.
struct Context {
  const Corpus& corpus;
  llm::CompletionClient& client;
  RunLog& log;
  PipelineOptions options{};
  llm::PromptTemplates templates = llm::PromptTemplates::defaults();
  llm::PromptOptions prompt_options{};
  const PatternTable* patterns = nullptr;
  const Bm25Index* index = nullptr;
};

namespace detail {

/// Completes and parses, re-sending the identical prompt once if the first
/// response does not parse. Returns nullopt (after logging) when the second
/// response also fails or the transport gives up.
template <typename Parser>
auto complete_parsed(Context& ctx, const llm::Prompt& prompt, Parser&& parse, const std::string& stage,
                     const std::string& unit)
    -> std::optional<decltype(parse(std::string{}))> {
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string text;
    try {
      text = ctx.client.complete(prompt);
    } catch (const TransportError& e) {
      ctx.log.count("transport_failures");
      ctx.log.reject(stage, "transport", unit, prompt.meta("doc_id"), e.what());
      return std::nullopt;
    }
    try {
      return parse(text);
    } catch (const ParseError& e) {
      if (attempt == 0) {
        ctx.log.count("parse_retries");
        continue;
      }
      ctx.log.count("parse_failures");
      ctx.log.reject(stage, std::string("parse_") + to_string(e.kind()), unit, prompt.meta("doc_id"),
                     e.what());
    }
  }
  return std::nullopt;
}

inline std::string padded_id(char prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06zu", prefix, n);
  return buf;
}

}  // namespace detail

// Output of one (document, pattern) generation unit.
struct GeneratedUnit {
  std::string unit_id;
  std::string metadata_string;
  TokenList keywords;
  std::vector<SyntheticQuery> queries;  // 3, query_id not yet assigned
};

/// Builds the generation prompt from the rendered pattern and the content,
/// completes it and parses three Raw queries. nullopt when the pair is
/// skipped (logged).
inline std::optional<GeneratedUnit> generate_queries_for_doc(Context& ctx, const Document& doc,
                                                             const QueryPattern& pattern,
                                                             const std::string& unit_id) {
  GeneratedUnit unit;
  unit.unit_id = unit_id;
  try {
    unit.metadata_string = render_metadata_string(pattern, doc);
  } catch (const DataError& e) {
    ctx.log.count("skips");
    ctx.log.reject("generate", "render", unit_id, doc.id, e.what());
    return std::nullopt;
  }
  auto prompt = llm::build_positive_prompt(ctx.templates, ctx.prompt_options, unit.metadata_string, doc.content);
  prompt.metadata["doc_id"] = doc.id;
  prompt.metadata["pattern_id"] = pattern.id;
  prompt.metadata["unit_id"] = unit_id;
  auto parsed = detail::complete_parsed(ctx, prompt, [](const std::string& t) { return llm::parse_generation(t); },
                                        "generate", unit_id);
  if (!parsed) {
    ctx.log.count("skips");
    return std::nullopt;
  }
  unit.keywords = parsed->keywords;
  for (auto& text : parsed->queries) {
    SyntheticQuery q;
    q.text = std::move(text);
    q.source_doc_id = doc.id;
    q.pattern_id = pattern.id;
    q.stage = QueryStage::Raw;
    q.metadata_string = unit.metadata_string;
    q.keywords = unit.keywords;
    unit.queries.push_back(std::move(q));
  }
  return unit;
}

/// Rewrites the three Raw queries through the revision prompt. On failure
/// the Raw queries pass through unchanged.
inline void revise_queries(Context& ctx, const Document& doc, GeneratedUnit& unit) {
  if (unit.queries.size() != llm::kQueriesPerPrompt) {
    throw DataError("revision requires exactly 3 queries");
  }
  std::vector<std::string> raw;
  for (const auto& q : unit.queries) raw.push_back(q.text);
  auto prompt = llm::build_revision_prompt(ctx.templates, ctx.prompt_options, unit.metadata_string,
                                           unit.keywords, raw);
  prompt.metadata["doc_id"] = doc.id;
  prompt.metadata["pattern_id"] = unit.queries.front().pattern_id;
  prompt.metadata["unit_id"] = unit.unit_id;
  auto revised = detail::complete_parsed(ctx, prompt, [](const std::string& t) { return llm::parse_revision(t); },
                                         "revise", unit.unit_id);
  if (!revised) {
    ctx.log.count("revision_fallbacks");
    return;
  }
  for (std::size_t i = 0; i < unit.queries.size(); ++i) {
    unit.queries[i].text = (*revised)[i];
    unit.queries[i].stage = QueryStage::Revised;
  }
  const std::set<std::string> distinct(revised->begin(), revised->end());
  if (distinct.size() < revised->size()) {
    ctx.log.count("low_diversity");
    ctx.log.reject("revise", "low_diversity", unit.unit_id, doc.id, llm::join(*revised, " || "));
  }
}

/// Samples patterns for every document (in corpus order, from one seeded
/// stream), generates and optionally revises queries, and assigns query ids
/// in (document, draw, position) order.
inline std::vector<SyntheticQuery> run_generation(Context& ctx) {
  if (!ctx.patterns) throw ConfigError("generation needs a pattern table");
  struct Draw {
    std::size_t doc;
    const QueryPattern* pattern;
    std::string unit_id;
  };
  std::vector<Draw> draws;
  auto rng = make_rng(ctx.options.seed);
  for (std::size_t d = 0; d < ctx.corpus.size(); ++d) {
    for (std::size_t j = 0; j < ctx.options.patterns_per_document; ++j) {
      draws.push_back({d, &sample_pattern(*ctx.patterns, rng), detail::padded_id('u', draws.size())});
    }
  }
  std::vector<std::optional<GeneratedUnit>> units(draws.size());
  parallel_for(draws.size(), ctx.options.parallelism, [&](std::size_t i) {
    const auto& doc = ctx.corpus[draws[i].doc];
    auto unit = generate_queries_for_doc(ctx, doc, *draws[i].pattern, draws[i].unit_id);
    if (unit && ctx.options.revision) revise_queries(ctx, doc, *unit);
    units[i] = std::move(unit);
  });
  std::vector<SyntheticQuery> queries;
  for (auto& unit : units) {
    if (!unit) continue;
    for (auto& q : unit->queries) {
      q.query_id = detail::padded_id('q', queries.size());
      queries.push_back(std::move(q));
    }
  }
  ctx.log.count("queries_generated", queries.size());
  return queries;
}

/// Hits ranked (k_from, k_to] for the query, excluding the source document.
inline std::vector<RankedHit> mine_range(const Bm25Index& index, const SyntheticQuery& query, std::size_t k_from,
                                         std::size_t k_to) {
  const auto tokens = tokenize(query.text);
  if (tokens.empty()) throw DataError("empty query");
  auto hits = index.top_k(tokens, k_to, {query.source_doc_id});
  if (hits.size() <= k_from) return {};
  return {hits.begin() + static_cast<std::ptrdiff_t>(k_from), hits.end()};
}

/// The source document as a positive candidate, followed by up to k BM25
/// neighbours with the source excluded.
inline std::vector<Candidate> mine_candidates(const Bm25Index& index, const SyntheticQuery& query, std::size_t k) {
  if (k < 1) throw ConfigError("k must be >= 1");
  std::vector<Candidate> out;
  out.push_back({query, query.source_doc_id, Origin::PositiveGen, 0, k});
  for (const auto& hit : mine_range(index, query, 0, k)) {
    out.push_back({query, hit.doc_id, Origin::Bm25Mined, hit.rank, k});
  }
  return out;
}

inline std::vector<Candidate> run_mining(Context& ctx, const std::vector<SyntheticQuery>& queries) {
  if (!ctx.index) throw ConfigError("mining needs a BM25 index");
  std::vector<std::vector<Candidate>> per_query(queries.size());
  parallel_for(queries.size(), ctx.options.parallelism, [&](std::size_t i) {
    try {
      per_query[i] = mine_candidates(*ctx.index, queries[i], ctx.options.k);
    } catch (const DataError& e) {
      ctx.log.count("skips");
      ctx.log.reject("mine", "empty_query", queries[i].query_id, queries[i].source_doc_id, e.what());
    }
  });
  std::vector<Candidate> out;
  for (auto& v : per_query) {
    for (auto& c : v) out.push_back(std::move(c));
  }
  return out;
}

/// Labels one pair through the labeling prompt, with one automatic
/// re-request on an unparseable response. nullopt when the pair is dropped.
inline std::optional<LabeledTriplet> label_pair(Context& ctx, const Candidate& cand) {
  const Document& doc = ctx.corpus.at(cand.doc_id);
  auto prompt = llm::build_labeling_prompt(ctx.templates, ctx.prompt_options, cand.query.text, doc);
  prompt.metadata["unit_id"] = cand.query.query_id;
  auto score = detail::complete_parsed(ctx, prompt, [](const std::string& t) { return llm::parse_score(t); }, "label",
                                       cand.query.query_id);
  if (!score) {
    ctx.log.count("dropped_pairs");
    return std::nullopt;
  }
  LabeledTriplet t;
  t.query = cand.query;
  t.doc_id = cand.doc_id;
  t.origin = cand.origin;
  t.score = *score;
  t.bm25_rank = cand.bm25_rank;
  t.mined_k = cand.mined_k;
  t.attempts.push_back({*score, utc_timestamp()});
  return t;
}

inline std::vector<LabeledTriplet> run_labeling(Context& ctx, const std::vector<Candidate>& candidates) {
  std::vector<std::optional<LabeledTriplet>> out(candidates.size());
  parallel_for(candidates.size(), ctx.options.parallelism,
               [&](std::size_t i) { out[i] = label_pair(ctx, candidates[i]); });
  std::vector<LabeledTriplet> labeled;
  for (auto& t : out) {
    if (t) labeled.push_back(std::move(*t));
  }
  ctx.log.count("pairs_labeled", labeled.size());
  return labeled;
}

enum class QcDecision { Keep, RetainAsNegative, Discard };

inline const char* to_string(QcDecision d) {
  switch (d) {
    case QcDecision::Keep: return "keep";
    case QcDecision::RetainAsNegative: return "retain_as_negative";
    case QcDecision::Discard: return "discard";
  }
  return "unknown";
}

/// Post-labeling filter. A positive scored 0 or 1 is re-labeled once with
/// the same prompt: a persisting low score keeps it as a negative (with the
/// new score), otherwise it is discarded.
inline QcDecision qc_filter(Context& ctx, LabeledTriplet& triplet) {
  if (triplet.origin == Origin::Bm25Mined || triplet.score >= 2) return QcDecision::Keep;
  ctx.log.count("relabels");
  Candidate cand{triplet.query, triplet.doc_id, triplet.origin, triplet.bm25_rank, triplet.mined_k};
  auto relabeled = label_pair(ctx, cand);
  if (!relabeled) {
    ctx.log.count("discards");
    ctx.log.reject("qc", "relabel_failed", triplet.query.query_id, triplet.doc_id, "relabel produced no score");
    return QcDecision::Discard;
  }
  const int second = relabeled->score;
  triplet.attempts.push_back(relabeled->attempts.back());
  if (second <= 1) {
    triplet.score = second;
    ctx.log.count("retained_as_negative");
    return QcDecision::RetainAsNegative;
  }
  ctx.log.count("discards");
  ctx.log.reject("qc", "inconsistent_positive", triplet.query.query_id, triplet.doc_id,
                 "first score " + std::to_string(triplet.score) + ", relabel " + std::to_string(second));
  return QcDecision::Discard;
}

/// Applies qc_filter to every triplet. A discarded positive removes its
/// whole query from the output.
inline std::vector<LabeledTriplet> run_qc(Context& ctx, std::vector<LabeledTriplet> triplets) {
  std::vector<QcDecision> decisions(triplets.size(), QcDecision::Keep);
  parallel_for(triplets.size(), ctx.options.parallelism,
               [&](std::size_t i) { decisions[i] = qc_filter(ctx, triplets[i]); });
  std::unordered_set<std::string> discarded;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    if (decisions[i] == QcDecision::Discard) discarded.insert(triplets[i].query.query_id);
  }
  std::vector<LabeledTriplet> kept;
  for (auto& t : triplets) {
    if (!discarded.contains(t.query.query_id)) kept.push_back(std::move(t));
  }
  ctx.log.count("queries_discarded", discarded.size());
  return kept;
}

}  // namespace synthrel::pipeline
