#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "synthrel/corpus.hpp"
#include "synthrel/error.hpp"
#include "synthrel/jsonl.hpp"
#include "synthrel/llm/prompts.hpp"
#include "synthrel/pipeline/types.hpp"
#include "synthrel/random.hpp"

namespace synthrel::pipeline {

// Fine-tuning hyperparameters recorded next to the dataset.
struct TrainingConfig {
  std::string base_model = "microsoft/Phi-3.5-mini-instruct";
  int epochs = 2;
  int max_seq_len = 4096;
  int per_device_batch = 4;
  int per_device_eval_batch = 4;
  int grad_accum = 8;
  int log_every = 40;
  int eval_every = 80;

  int effective_batch() const { return per_device_batch * grad_accum; }

  void validate() const {
    if (epochs < 1 || max_seq_len < 1 || per_device_batch < 1 || per_device_eval_batch < 1 || grad_accum < 1 ||
        log_every < 1 || eval_every < 1) {
      throw ConfigError("training hyperparameters must be positive");
    }
  }
};

/// Training manifest. effective_batch is always recomputed from
/// per_device_batch and grad_accum.
inline ordered_json training_manifest_json(const TrainingConfig& t) {
  ordered_json j;
  j["base_model"] = t.base_model;
  j["epochs"] = t.epochs;
  j["max_seq_len"] = t.max_seq_len;
  j["per_device_batch"] = t.per_device_batch;
  j["per_device_eval_batch"] = t.per_device_eval_batch;
  j["grad_accum"] = t.grad_accum;
  j["effective_batch"] = t.effective_batch();
  j["log_every"] = t.log_every;
  j["eval_every"] = t.eval_every;
  return j;
}

inline void emit_training_manifest(const TrainingConfig& t, const std::filesystem::path& path) {
  t.validate();
  write_text_file(path, training_manifest_json(t).dump(2) + "\n");
}

struct AssembleOptions {
  std::vector<std::filesystem::path> external_files;
  // One share per source: synthetic first, then each external file. Empty
  // means equal shares.
  std::vector<double> proportions;
  std::uint64_t seed = 0;
  TrainingConfig training{};
  ordered_json config_snapshot = ordered_json::object();
  std::string created_at;  // recorded verbatim when set
};

struct AssembleResult {
  std::filesystem::path dataset_path;
  std::filesystem::path manifest_path;
  ordered_json manifest;
  std::size_t lines = 0;
};

namespace detail {

inline std::vector<ordered_json> load_external(const std::filesystem::path& path) {
  std::vector<ordered_json> rows;
  for_each_jsonl(path, [&](const json& j, std::size_t line) {
    if (!j.is_object() || !j.contains("prompt") || !j.contains("completion") || !j["prompt"].is_string() ||
        !j["completion"].is_string()) {
      throw DataError("malformed external record at " + path.string() + " line " + std::to_string(line));
    }
    ordered_json row;
    row["prompt"] = j["prompt"].get<std::string>();
    row["completion"] = j["completion"].get<std::string>();
    rows.push_back(std::move(row));
  });
  return rows;
}

// Largest total N such that floor(p_i * N) <= available_i for every source.
inline std::vector<std::size_t> source_counts(const std::vector<double>& p, const std::vector<std::size_t>& avail) {
  double n = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) n = std::min(n, static_cast<double>(avail[i]) / p[i]);
  }
  std::vector<std::size_t> counts(p.size(), 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    // Guard against p * (avail / p) landing just above avail.
    counts[i] = std::min(avail[i], static_cast<std::size_t>(std::floor(p[i] * n + 1e-9)));
  }
  return counts;
}

}  // namespace detail

/// Serializes triplets as prompt/completion records (labeling prompt without
/// the explanation instruction, completion "Score: <n>"), mixes in external
/// prompt/completion files at the requested shares, shuffles with the seed,
/// and writes the dataset plus a manifest beside it.
inline AssembleResult assemble_dataset(std::vector<LabeledTriplet> triplets, const Corpus& corpus,
                                       const llm::PromptTemplates& templates, const llm::PromptOptions& prompt_options,
                                       const AssembleOptions& opts, const std::filesystem::path& output_path) {
  opts.training.validate();
  const std::size_t n_sources = 1 + opts.external_files.size();
  std::vector<double> p = opts.proportions;
  if (p.empty()) p.assign(n_sources, 1.0 / static_cast<double>(n_sources));
  if (p.size() != n_sources) {
    throw ConfigError("proportions needs " + std::to_string(n_sources) + " entries (synthetic first, then each external file)");
  }
  double total_p = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw ConfigError("proportions must be non-negative");
    total_p += x;
  }
  if (std::abs(total_p - 1.0) > 1e-6) throw ConfigError("proportions must sum to 1");

  canonical_sort(triplets);
  std::vector<std::vector<ordered_json>> sources(n_sources);
  for (const auto& t : triplets) {
    const auto prompt =
        llm::build_labeling_prompt(templates, prompt_options, t.query.text, corpus.at(t.doc_id), /*for_training=*/true);
    ordered_json row;
    row["prompt"] = prompt.text;
    row["completion"] = "Score: " + std::to_string(t.score);
    sources[0].push_back(std::move(row));
  }
  for (std::size_t i = 0; i < opts.external_files.size(); ++i) {
    sources[i + 1] = detail::load_external(opts.external_files[i]);
  }
  std::vector<std::size_t> avail;
  for (std::size_t i = 0; i < n_sources; ++i) {
    if (p[i] > 0.0 && sources[i].empty()) {
      throw DataError(std::string("source ") + (i == 0 ? "synthetic" : opts.external_files[i - 1].string()) +
                      " has no records but a positive proportion");
    }
    avail.push_back(sources[i].size());
  }
  const auto counts = detail::source_counts(p, avail);

  auto rng = make_rng(opts.seed);
  std::vector<ordered_json> mixed;
  std::vector<std::size_t> synthetic_taken;  // indices into triplets
  for (std::size_t i = 0; i < n_sources; ++i) {
    std::vector<std::size_t> idx(sources[i].size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    if (counts[i] < idx.size()) synthrel::shuffle(std::span(idx), rng);
    idx.resize(counts[i]);
    std::sort(idx.begin(), idx.end());
    for (auto k : idx) {
      mixed.push_back(sources[i][k]);
      if (i == 0) synthetic_taken.push_back(k);
    }
  }
  synthrel::shuffle(std::span(mixed), rng);

  AssembleResult result;
  result.dataset_path = output_path;
  result.lines = mixed.size();
  write_jsonl(output_path, mixed);

  LabelDistribution dist;
  std::size_t positive = 0;
  std::size_t mined = 0;
  for (auto k : synthetic_taken) {
    dist.add(triplets[k].score);
    (triplets[k].origin == Origin::PositiveGen ? positive : mined) += 1;
  }

  ordered_json m;
  if (!opts.created_at.empty()) m["created_at"] = opts.created_at;
  m["seed"] = opts.seed;
  m["dataset"] = output_path.filename().string();
  m["lines"] = result.lines;
  m["config"] = opts.config_snapshot;
  ordered_json src = ordered_json::array();
  src.push_back({{"source", "synthetic"}, {"proportion", p[0]}, {"available", avail[0]}, {"count", counts[0]}});
  for (std::size_t i = 0; i < opts.external_files.size(); ++i) {
    src.push_back({{"source", opts.external_files[i].filename().string()},
                   {"proportion", p[i + 1]},
                   {"available", avail[i + 1]},
                   {"count", counts[i + 1]}});
  }
  m["sources"] = std::move(src);
  m["origin_counts"] = {{"positive_gen", positive}, {"bm25_mined", mined}};
  m["label_distribution"] = {{"counts", dist.counts}, {"total", dist.total}};
  m["training"] = training_manifest_json(opts.training);

  result.manifest = m;
  result.manifest_path = output_path;
  result.manifest_path.replace_extension(".manifest.json");
  write_text_file(result.manifest_path, m.dump(2) + "\n");
  return result;
}

}  // namespace synthrel::pipeline
