#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "synthrel/error.hpp"

namespace synthrel::eval {

inline constexpr double kSignificanceLevel = 0.05;
inline constexpr std::size_t kExactMaxN = 25;

// Non-inferiority margins: 0.1% on the accuracy fraction, 0.0001 on NDCG.
inline constexpr double kDefaultAccuracyMargin = 0.001;
inline constexpr double kDefaultNdcgMargin = 0.0001;

enum class PValueMethod { Exact, NormalApprox };

inline const char* to_string(PValueMethod m) {
  return m == PValueMethod::Exact ? "exact" : "normal_approx";
}

struct NonInferiorityResult {
  std::string metric;
  double margin = 0.0;
  std::size_t n_effective = 0;
  double statistic = 0.0;  // W+
  double p_value = 1.0;
  bool reject_h0 = false;
  PValueMethod method = PValueMethod::Exact;
};

struct SignedRanks {
  std::vector<double> ranks;       // average ranks of |x|, aligned with values
  std::vector<double> values;      // nonzero inputs
  std::vector<std::size_t> ties;   // sizes of tie groups with more than one member
};

/// Drops exact zeros and ranks the absolute values with average ranks.
inline SignedRanks signed_ranks(std::span<const double> xs) {
  SignedRanks sr;
  for (double x : xs) {
    if (x != 0.0) sr.values.push_back(x);
  }
  const std::size_t n = sr.values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(sr.values[a]) < std::abs(sr.values[b]); });
  sr.ranks.assign(n, 0.0);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(sr.values[order[j + 1]]) == std::abs(sr.values[order[i]])) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) sr.ranks[order[k]] = avg;
    if (j > i) sr.ties.push_back(j - i + 1);
    i = j + 1;
  }
  return sr;
}

/// P(W+ >= w) under H0 for tie-free ranks 1..n, from the exact null
/// distribution (every sign assignment equally likely).
inline double exact_upper_tail(std::size_t n, double w) {
  const std::size_t max_w = n * (n + 1) / 2;
  std::vector<double> counts(max_w + 1, 0.0);
  counts[0] = 1.0;
  for (std::size_t r = 1; r <= n; ++r) {
    for (std::size_t s = r * (r + 1) / 2; s >= r; --s) counts[s] += counts[s - r];
  }
  const auto threshold = static_cast<std::size_t>(std::ceil(w));
  double tail = 0.0;
  for (std::size_t s = threshold; s <= max_w; ++s) tail += counts[s];
  return tail / std::exp2(static_cast<double>(n));
}

/// Normal approximation to P(W+ >= w) with tie-corrected variance and a 0.5
/// continuity correction.
inline double normal_upper_tail(std::size_t n, double w, std::span<const std::size_t> ties) {
  const double nd = static_cast<double>(n);
  const double mean = nd * (nd + 1.0) / 4.0;
  double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0;
  for (auto t : ties) {
    const double td = static_cast<double>(t);
    var -= (td * td * td - td) / 48.0;
  }
  const double z = (w - mean - 0.5) / std::sqrt(var);
  return std::clamp(0.5 * std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
}

/// One-sided paired non-inferiority test. H0: location of the per-query
/// differences <= -margin; H1: location > -margin. The differences are
/// shifted by +margin and tested with the Wilcoxon signed-rank statistic.
inline NonInferiorityResult wilcoxon_noninferiority(std::span<const double> deltas, double margin,
                                                    std::string metric = {}) {
  if (deltas.empty()) throw DataError("wilcoxon test needs at least one difference");
  if (!(margin >= 0.0)) throw ConfigError("non-inferiority margin must be >= 0");
  std::vector<double> shifted;
  shifted.reserve(deltas.size());
  for (double d : deltas) shifted.push_back(d + margin);
  const auto sr = signed_ranks(shifted);
  if (sr.values.empty()) throw DataError("no nonzero differences");

  NonInferiorityResult res;
  res.metric = std::move(metric);
  res.margin = margin;
  res.n_effective = sr.values.size();
  for (std::size_t i = 0; i < sr.values.size(); ++i) {
    if (sr.values[i] > 0.0) res.statistic += sr.ranks[i];
  }
  if (res.n_effective <= kExactMaxN && sr.ties.empty()) {
    res.method = PValueMethod::Exact;
    res.p_value = exact_upper_tail(res.n_effective, res.statistic);
  } else {
    res.method = PValueMethod::NormalApprox;
    res.p_value = normal_upper_tail(res.n_effective, res.statistic, sr.ties);
  }
  res.reject_h0 = res.p_value < kSignificanceLevel;
  return res;
}

}  // namespace synthrel::eval
