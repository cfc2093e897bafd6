#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <type_traits>
#include <vector>

#include "synthrel/error.hpp"
#include "synthrel/eval/wilcoxon.hpp"
#include "synthrel/jsonl.hpp"
#include "synthrel/llm/client.hpp"
#include "synthrel/pipeline/assemble.hpp"
#include "synthrel/retrieval.hpp"

namespace synthrel::cli {

struct RunConfig {
  std::uint64_t seed = 0;
  std::string corpus;
  std::string patterns;
  std::string prompt_positive_gen;  // empty = built-in prompt
  std::string prompt_revision;
  std::string prompt_labeling;
  std::string stopwords;
  std::string out = "runs/latest";

  std::size_t k = 4;
  std::size_t k_max = 16;
  double tolerance = 0.2;
  bool revision = true;
  std::size_t patterns_per_document = 1;
  std::size_t parallelism = 4;
  std::size_t highlight_chars = 0;

  Bm25Params bm25{};
  llm::CompletionConfig client{};

  std::vector<std::string> external_files;
  std::vector<double> proportions;
  std::string dataset_name = "dataset.jsonl";
  pipeline::TrainingConfig training{};

  std::string judged;
  std::vector<std::string> labelers;
  std::string baseline;
  double margin_accuracy = eval::kDefaultAccuracyMargin;
  double margin_ndcg = eval::kDefaultNdcgMargin;

  std::filesystem::path out_path(const std::string& name) const { return std::filesystem::path(out) / name; }
};

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
};

namespace detail {

template <typename T>
constexpr const char* type_name() {
  if constexpr (std::is_same_v<T, bool>) return "boolean";
  else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) return "non-negative integer";
  else if constexpr (std::is_integral_v<T>) return "integer";
  else if constexpr (std::is_floating_point_v<T>) return "number";
  else if constexpr (std::is_same_v<T, std::string>) return "string";
  else if constexpr (std::is_same_v<T, std::vector<std::string>>) return "array of strings";
  else return "array of numbers";
}

template <typename T>
bool type_matches(const json& j) {
  if constexpr (std::is_same_v<T, bool>) return j.is_boolean();
  else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) return j.is_number_unsigned();
  else if constexpr (std::is_integral_v<T>) return j.is_number_integer();
  else if constexpr (std::is_floating_point_v<T>) return j.is_number();
  else if constexpr (std::is_same_v<T, std::string>) return j.is_string();
  else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
    return j.is_array() && std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_string(); });
  } else {
    return j.is_array() && std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_number(); });
  }
}

template <typename T, typename Access>
ConfigKey key(std::string name, std::string help, Access access) {
  ConfigKey k;
  k.name = name;
  k.help = std::move(help);
  k.set = [name, access](RunConfig& c, const json& j) {
    if (!type_matches<T>(j)) throw ConfigError(name + ": expected " + type_name<T>() + ", got " + j.dump());
    access(c) = j.get<T>();
  };
  k.get = [access](const RunConfig& c) { return json(access(const_cast<RunConfig&>(c))); };
  return k;
}

template <typename Access>
ConfigKey ms_key(std::string name, std::string help, Access access) {
  ConfigKey k;
  k.name = name;
  k.help = std::move(help);
  k.set = [name, access](RunConfig& c, const json& j) {
    if (!j.is_number_integer()) throw ConfigError(name + ": expected integer milliseconds, got " + j.dump());
    access(c) = std::chrono::milliseconds(j.get<std::int64_t>());
  };
  k.get = [access](const RunConfig& c) { return json(access(const_cast<RunConfig&>(c)).count()); };
  return k;
}

template <typename Access>
ConfigKey secs_key(std::string name, std::string help, Access access) {
  ConfigKey k;
  k.name = name;
  k.help = std::move(help);
  k.set = [name, access](RunConfig& c, const json& j) {
    if (!j.is_number()) throw ConfigError(name + ": expected seconds, got " + j.dump());
    access(c) = std::chrono::milliseconds(std::llround(j.get<double>() * 1000.0));
  };
  k.get = [access](const RunConfig& c) {
    return json(static_cast<double>(access(const_cast<RunConfig&>(c)).count()) / 1000.0);
  };
  return k;
}

}  // namespace detail

#define SYNTHREL_FIELD(expr) [](RunConfig& c) -> auto& { return c.expr; }

/// Every recognized config key, in documentation order.
inline const std::vector<ConfigKey>& config_keys() {
  using detail::key;
  using detail::ms_key;
  using detail::secs_key;
  using Strings = std::vector<std::string>;
  using Numbers = std::vector<double>;
  static const std::vector<ConfigKey> keys = {
      key<std::uint64_t>("seed", "global random seed", SYNTHREL_FIELD(seed)),
      key<std::string>("corpus", "corpus JSONL path", SYNTHREL_FIELD(corpus)),
      key<std::string>("patterns", "query pattern table JSON path", SYNTHREL_FIELD(patterns)),
      key<std::string>("prompts.positive_gen", "query generation prompt file (default: built-in)",
                       SYNTHREL_FIELD(prompt_positive_gen)),
      key<std::string>("prompts.revision", "query revision prompt file (default: built-in)",
                       SYNTHREL_FIELD(prompt_revision)),
      key<std::string>("prompts.labeling", "labeling prompt file (default: built-in)", SYNTHREL_FIELD(prompt_labeling)),
      key<std::string>("stopwords", "stopword file, one word per line (default: bundled list)",
                       SYNTHREL_FIELD(stopwords)),
      key<std::string>("out", "output directory", SYNTHREL_FIELD(out)),
      key<std::size_t>("k", "BM25 negatives mined per query", SYNTHREL_FIELD(k)),
      key<std::size_t>("k_max", "largest k reached while rebalancing", SYNTHREL_FIELD(k_max)),
      key<double>("tolerance", "per-level relative tolerance around total/5", SYNTHREL_FIELD(tolerance)),
      key<bool>("revision", "run the query revision stage", SYNTHREL_FIELD(revision)),
      key<std::size_t>("patterns_per_document", "pattern draws per document", SYNTHREL_FIELD(patterns_per_document)),
      key<std::size_t>("parallelism", "concurrent completion requests", SYNTHREL_FIELD(parallelism)),
      key<std::size_t>("highlight_chars", "content characters shown to the labeler (0 = all)",
                       SYNTHREL_FIELD(highlight_chars)),
      key<double>("bm25.k1", "BM25 term saturation", SYNTHREL_FIELD(bm25.k1)),
      key<double>("bm25.b", "BM25 length normalization", SYNTHREL_FIELD(bm25.b)),
      key<std::string>("client.endpoint_url", "completion endpoint URL (empty = mock)",
                       SYNTHREL_FIELD(client.endpoint_url)),
      key<std::string>("client.model_name", "model name sent to the endpoint", SYNTHREL_FIELD(client.model_name)),
      key<int>("client.max_retries", "retries after a failed request", SYNTHREL_FIELD(client.max_retries)),
      secs_key("client.timeout_secs", "request timeout in seconds", SYNTHREL_FIELD(client.timeout)),
      ms_key("client.backoff_ms", "first retry delay in milliseconds, doubled per retry",
             SYNTHREL_FIELD(client.backoff_base)),
      key<double>("client.temperature_generation", "sampling temperature for generation and revision",
                  SYNTHREL_FIELD(client.temperature_generation)),
      key<double>("client.temperature_labeling", "sampling temperature for labeling",
                  SYNTHREL_FIELD(client.temperature_labeling)),
      key<int>("client.max_tokens", "completion token limit", SYNTHREL_FIELD(client.max_tokens)),
      key<bool>("client.mock", "use the offline mock instead of the endpoint", SYNTHREL_FIELD(client.mock)),
      ms_key("client.mock_latency_ms", "artificial mock latency per request", SYNTHREL_FIELD(client.mock_latency)),
      key<Strings>("assemble.external_files", "prompt/completion JSONL files mixed into the dataset",
                   SYNTHREL_FIELD(external_files)),
      key<Numbers>("assemble.proportions", "shares per source, synthetic first (default: equal)",
                   SYNTHREL_FIELD(proportions)),
      key<std::string>("assemble.dataset_name", "dataset file name inside the output directory",
                       SYNTHREL_FIELD(dataset_name)),
      key<std::string>("training.base_model", "model to fine-tune", SYNTHREL_FIELD(training.base_model)),
      key<int>("training.epochs", "training epochs", SYNTHREL_FIELD(training.epochs)),
      key<int>("training.max_seq_len", "maximum sequence length", SYNTHREL_FIELD(training.max_seq_len)),
      key<int>("training.per_device_batch", "per-device train batch", SYNTHREL_FIELD(training.per_device_batch)),
      key<int>("training.per_device_eval_batch", "per-device eval batch",
               SYNTHREL_FIELD(training.per_device_eval_batch)),
      key<int>("training.grad_accum", "gradient accumulation steps", SYNTHREL_FIELD(training.grad_accum)),
      key<int>("training.log_every", "logging interval in steps", SYNTHREL_FIELD(training.log_every)),
      key<int>("training.eval_every", "evaluation interval in steps", SYNTHREL_FIELD(training.eval_every)),
      key<std::string>("eval.judged", "judged JSONL with human_score and labeler columns", SYNTHREL_FIELD(judged)),
      key<Strings>("eval.labelers", "labelers to evaluate", SYNTHREL_FIELD(labelers)),
      key<std::string>("eval.baseline", "baseline labeler for non-inferiority tests", SYNTHREL_FIELD(baseline)),
      key<double>("eval.margin_accuracy", "non-inferiority margin for pairwise accuracy",
                  SYNTHREL_FIELD(margin_accuracy)),
      key<double>("eval.margin_ndcg", "non-inferiority margin for NDCG", SYNTHREL_FIELD(margin_ndcg)),
  };
  return keys;
}

#undef SYNTHREL_FIELD

inline const ConfigKey* find_config_key(const std::string& name) {
  for (const auto& k : config_keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

inline void set_config_value(RunConfig& cfg, const std::string& name, const json& value) {
  const auto* k = find_config_key(name);
  if (!k) throw ConfigError("unknown config key " + name);
  k->set(cfg, value);
}

/// "key=value" override. The value is parsed as JSON when possible and
/// taken as a plain string otherwise.
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string name = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  set_config_value(cfg, name, value);
}

namespace detail {

inline void flatten(const json& j, const std::string& prefix, RunConfig& cfg) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string name = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      flatten(*it, name, cfg);
    } else {
      set_config_value(cfg, name, *it);
    }
  }
}

}  // namespace detail

/// Applies a JSON config document. Nested objects map to dotted keys, so
/// {"bm25": {"k1": 1.5}} and {"bm25.k1": 1.5} are equivalent.
inline void apply_config_json(RunConfig& cfg, const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  detail::flatten(doc, "", cfg);
}

inline void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config: file not found: " + path.string());
  const json doc = json::parse(read_text_file(path), nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config: malformed JSON in " + path.string());
  apply_config_json(cfg, doc);
  // Input paths in a config file are relative to the file itself.
  const auto base = path.parent_path();
  auto rebase = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  auto given = [&](const std::string& dotted) {
    std::string ptr = "/" + dotted;
    std::replace(ptr.begin(), ptr.end(), '.', '/');
    return doc.contains(dotted) || doc.contains(json::json_pointer(ptr));
  };
  if (given("corpus")) rebase(cfg.corpus);
  if (given("patterns")) rebase(cfg.patterns);
  if (given("prompts.positive_gen")) rebase(cfg.prompt_positive_gen);
  if (given("prompts.revision")) rebase(cfg.prompt_revision);
  if (given("prompts.labeling")) rebase(cfg.prompt_labeling);
  if (given("stopwords")) rebase(cfg.stopwords);
  if (given("eval.judged")) rebase(cfg.judged);
  if (given("assemble.external_files")) {
    for (auto& f : cfg.external_files) rebase(f);
  }
}

/// Flat key/value snapshot. The output directory is left out so runs that
/// differ only in where they write produce identical manifests.
inline ordered_json config_snapshot(const RunConfig& cfg) {
  ordered_json j;
  for (const auto& k : config_keys()) {
    if (k.name == "out") continue;
    j[k.name] = k.get(cfg);
  }
  return j;
}

enum class Need : unsigned { None = 0, Corpus = 1, Patterns = 2, Judged = 4 };

inline constexpr Need operator|(Need a, Need b) {
  return static_cast<Need>(static_cast<unsigned>(a) | static_cast<unsigned>(b));
}
inline constexpr bool has(Need set, Need flag) { return (static_cast<unsigned>(set) & static_cast<unsigned>(flag)) != 0; }

inline void require_file(const std::string& key, const std::string& path) {
  if (path.empty()) throw ConfigError(key + ": required");
  if (!std::filesystem::is_regular_file(path)) throw ConfigError(key + ": file not found: " + path);
}

/// Field-level validation. `need` lists the inputs the command reads.
inline void validate(const RunConfig& cfg, Need need) {
  if (cfg.k < 1) throw ConfigError("k: must be >= 1");
  if (cfg.k_max < cfg.k) throw ConfigError("k_max: must be >= k");
  if (!(cfg.tolerance > 0.0 && cfg.tolerance < 1.0)) throw ConfigError("tolerance: must be in (0, 1)");
  if (cfg.patterns_per_document < 1) throw ConfigError("patterns_per_document: must be >= 1");
  if (cfg.parallelism < 1) throw ConfigError("parallelism: must be >= 1");
  if (cfg.out.empty()) throw ConfigError("out: required");
  if (cfg.dataset_name.empty()) throw ConfigError("assemble.dataset_name: required");
  cfg.bm25.validate();
  cfg.client.validate();
  if (cfg.client.max_tokens < 1) throw ConfigError("client.max_tokens: must be >= 1");
  if (cfg.client.backoff_base.count() < 0) throw ConfigError("client.backoff_ms: must be >= 0");
  if (cfg.client.mock_latency.count() < 0) throw ConfigError("client.mock_latency_ms: must be >= 0");
  try {
    cfg.training.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("training: ") + e.what());
  }
  if (!(cfg.margin_accuracy >= 0.0)) throw ConfigError("eval.margin_accuracy: must be >= 0");
  if (!(cfg.margin_ndcg >= 0.0)) throw ConfigError("eval.margin_ndcg: must be >= 0");

  for (const auto& f : cfg.external_files) require_file("assemble.external_files", f);
  if (!cfg.proportions.empty()) {
    if (cfg.proportions.size() != cfg.external_files.size() + 1) {
      throw ConfigError("assemble.proportions: needs " + std::to_string(cfg.external_files.size() + 1) +
                        " entries (synthetic first, then each external file)");
    }
    double sum = 0.0;
    for (double p : cfg.proportions) {
      if (!(p >= 0.0)) throw ConfigError("assemble.proportions: entries must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("assemble.proportions: must sum to 1");
  }
  if (!cfg.prompt_positive_gen.empty()) require_file("prompts.positive_gen", cfg.prompt_positive_gen);
  if (!cfg.prompt_revision.empty()) require_file("prompts.revision", cfg.prompt_revision);
  if (!cfg.prompt_labeling.empty()) require_file("prompts.labeling", cfg.prompt_labeling);
  if (!cfg.stopwords.empty()) require_file("stopwords", cfg.stopwords);

  if (has(need, Need::Corpus)) require_file("corpus", cfg.corpus);
  if (has(need, Need::Patterns)) require_file("patterns", cfg.patterns);
  if (has(need, Need::Judged)) {
    require_file("eval.judged", cfg.judged);
    if (cfg.baseline.empty()) throw ConfigError("eval.baseline: required");
  }
}

}  // namespace synthrel::cli
