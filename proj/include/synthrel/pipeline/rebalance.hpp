#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "synthrel/pipeline/stages.hpp"

namespace synthrel::pipeline {

struct RebalanceSummary {
  std::size_t rounds = 0;
  std::size_t pairs_added = 0;
  LabelDistribution before;
  LabelDistribution after;
  bool reached_uniform = false;
};

/// Deepens BM25 mining for queries that lack an under-represented label
/// level until every level is within tolerance of total / 5 or no query can
/// be deepened further.
///
/// Each round raises k by one for the selected queries and labels only the
/// newly reached ranks (k_old, k_new]; existing triplets are never
/// re-labeled or modified. A query stops being deepened at k_max, when BM25
/// runs out of hits, or once its newest pair lands on a level that was not
/// under-represented.
inline std::vector<LabeledTriplet> rebalance(Context& ctx, std::vector<LabeledTriplet> triplets,
                                             RebalanceSummary* summary = nullptr) {
  if (!ctx.index) throw ConfigError("rebalance needs a BM25 index");
  RebalanceSummary sum;
  sum.before = LabelDistribution::of(triplets);

  struct QueryState {
    SyntheticQuery query;
    std::size_t k = 0;
    bool exhausted = false;
    bool stalled = false;  // last deepening landed on a level already at target
    std::array<bool, kNumLevels> levels{};
  };
  std::map<std::string, QueryState> states;
  for (const auto& t : triplets) {
    auto& st = states[t.query.query_id];
    st.query = t.query;
    st.k = std::max({st.k, t.mined_k, ctx.options.k});
    st.levels[static_cast<std::size_t>(t.score)] = true;
  }

  while (true) {
    const auto dist = LabelDistribution::of(triplets);
    if (dist.is_uniform(ctx.options.tolerance)) {
      sum.reached_uniform = true;
      break;
    }
    std::vector<std::size_t> under;
    for (std::size_t l = 0; l < kNumLevels; ++l) {
      if (static_cast<double>(dist.counts[l]) < dist.target()) under.push_back(l);
    }

    std::vector<QueryState*> selected;
    for (auto& [id, st] : states) {
      if (st.exhausted || st.stalled || st.k >= ctx.options.k_max) continue;
      const bool lacks = std::any_of(under.begin(), under.end(), [&](std::size_t l) { return !st.levels[l]; });
      if (lacks) selected.push_back(&st);
    }
    if (selected.empty()) {
      ctx.log.warn("rebalance stopped before reaching a uniform distribution: no query can be deepened (k_max " +
                   std::to_string(ctx.options.k_max) + ")");
      break;
    }

    std::vector<Candidate> fresh;
    for (auto* st : selected) {
      const std::size_t k_new = st->k + 1;
      auto hits = mine_range(*ctx.index, st->query, st->k, k_new);
      if (hits.empty()) {
        st->exhausted = true;
        continue;
      }
      for (const auto& h : hits) fresh.push_back({st->query, h.doc_id, Origin::Bm25Mined, h.rank, k_new});
    }
    if (fresh.empty()) continue;  // every selected query was exhausted; reselect

    auto labeled = run_labeling(ctx, fresh);
    ++sum.rounds;
    // Deepen k for every query that was mined this round, even when its new
    // pair was dropped by the labeler.
    for (const auto& c : fresh) states[c.query.query_id].k = c.mined_k;
    for (auto& t : labeled) {
      auto& st = states[t.query.query_id];
      const auto level = static_cast<std::size_t>(t.score);
      st.levels[level] = true;
      if (std::find(under.begin(), under.end(), level) == under.end()) st.stalled = true;
      triplets.push_back(std::move(t));
      ++sum.pairs_added;
    }
  }

  sum.after = LabelDistribution::of(triplets);
  if (!sum.reached_uniform && sum.after.is_uniform(ctx.options.tolerance)) sum.reached_uniform = true;
  ctx.log.count("rebalance_rounds", sum.rounds);
  ctx.log.count("rebalance_pairs_added", sum.pairs_added);
  if (summary) *summary = sum;
  return triplets;
}

}  // namespace synthrel::pipeline
