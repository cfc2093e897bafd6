#pragma once

#include <CLI11.hpp>

#include <chrono>
#include <csignal>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "synthrel/cli/config.hpp"
#include "synthrel/clock.hpp"
#include "synthrel/corpus.hpp"
#include "synthrel/eval/metrics.hpp"
#include "synthrel/eval/report.hpp"
#include "synthrel/llm/client.hpp"
#include "synthrel/parallel.hpp"
#include "synthrel/pipeline/assemble.hpp"
#include "synthrel/pipeline/rebalance.hpp"
#include "synthrel/pipeline/stages.hpp"
#include "synthrel/pipeline/types.hpp"
#include "synthrel/retrieval.hpp"
#include "synthrel/templates.hpp"

namespace synthrel::cli {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitRuntime = 2, kExitPartial = 3 };

// File names inside the output directory.
namespace files {
inline constexpr const char* kIndex = "index.json";
inline constexpr const char* kQueries = "queries.jsonl";
inline constexpr const char* kCandidates = "candidates.jsonl";
inline constexpr const char* kLabeled = "labeled.jsonl";
inline constexpr const char* kQc = "qc.jsonl";
inline constexpr const char* kTriplets = "triplets.jsonl";
inline constexpr const char* kTrainingManifest = "training_manifest.json";
inline constexpr const char* kRejects = "rejects.jsonl";
inline constexpr const char* kAudit = "audit.jsonl";
inline constexpr const char* kRunReport = "run_report.json";
inline constexpr const char* kEvalReport = "eval_report.json";
inline constexpr const char* kEvalTable = "eval_report.txt";
}  // namespace files

/// Lazily loaded inputs and shared state for one command.
class Session {
 public:
  Session(RunConfig cfg, std::string command, bool resume, std::ostream& out)
      : cfg_(std::move(cfg)), command_(std::move(command)), resume_(resume), out_(out) {
    started_at_ = utc_timestamp();
    t0_ = std::chrono::steady_clock::now();
  }

  const RunConfig& config() const { return cfg_; }
  pipeline::RunLog& log() { return log_; }
  std::ostream& out() { return out_; }
  bool resume() const { return resume_; }

  const Corpus& corpus() {
    if (!corpus_) corpus_ = ingest_corpus(cfg_.corpus);
    return *corpus_;
  }

  const PatternTable& patterns() {
    if (!patterns_) patterns_ = load_pattern_table(cfg_.patterns);
    return *patterns_;
  }

  const StopwordSet& stopwords() {
    if (!stopwords_) stopwords_ = cfg_.stopwords.empty() ? default_stopwords() : load_stopwords(cfg_.stopwords);
    return *stopwords_;
  }

  /// Reuses a saved index when it covers exactly the current corpus and
  /// parameters, otherwise builds one.
  const Bm25Index& index() {
    if (index_) return *index_;
    const auto path = cfg_.out_path(files::kIndex);
    if (std::filesystem::exists(path)) {
      auto saved = Bm25Index::load(path);
      std::vector<std::string> ids;
      for (const auto& d : corpus().documents()) ids.push_back(d.id);
      if (saved.doc_ids() == ids && saved.params().k1 == cfg_.bm25.k1 && saved.params().b == cfg_.bm25.b) {
        index_ = std::move(saved);
        return *index_;
      }
      log_.warn("saved index does not match the corpus or parameters; rebuilding");
    }
    index_ = Bm25Index::build(corpus(), cfg_.bm25);
    return *index_;
  }

  llm::CompletionClient& client() {
    if (!client_) {
      auto cc = cfg_.client;
      cc.parallelism = static_cast<int>(cfg_.parallelism);
      cc.mock_seed = cfg_.seed;
      llm::MockOptions mo;
      mo.stopwords = &stopwords();
      client_ = std::make_unique<llm::CompletionClient>(cc, nullptr, mo);
      client_->attach_audit_log(cfg_.out_path(files::kAudit));
    }
    return *client_;
  }

  pipeline::Context& context(bool with_patterns, bool with_index) {
    if (!ctx_) {
      pipeline::PipelineOptions po;
      po.k = cfg_.k;
      po.k_max = cfg_.k_max;
      po.tolerance = cfg_.tolerance;
      po.revision = cfg_.revision;
      po.patterns_per_document = cfg_.patterns_per_document;
      po.seed = cfg_.seed;
      po.parallelism = cfg_.parallelism;
      ctx_.emplace(pipeline::Context{corpus(), client(), log_, po, templates(), prompt_options()});
    }
    if (with_patterns && !ctx_->patterns) ctx_->patterns = &patterns();
    if (with_index && !ctx_->index) ctx_->index = &index();
    return *ctx_;
  }

  llm::PromptTemplates templates() const {
    return llm::PromptTemplates::load(cfg_.prompt_positive_gen, cfg_.prompt_revision, cfg_.prompt_labeling);
  }

  llm::PromptOptions prompt_options() const {
    llm::PromptOptions po;
    po.highlight_chars = cfg_.highlight_chars;
    return po;
  }

  void artifact(const std::filesystem::path& p) { artifacts_.push_back(p.filename().string()); }
  void note(const std::string& key, ordered_json value) { extra_[key] = std::move(value); }

  ordered_json report(const std::string& status, int exit_code, const std::string& error) const {
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    ordered_json r;
    r["command"] = command_;
    r["status"] = status;
    r["exit_code"] = exit_code;
    if (!error.empty()) r["error"] = error;
    r["started_at"] = started_at_;
    r["finished_at"] = utc_timestamp();
    r["elapsed_seconds"] = elapsed;
    r["seed"] = cfg_.seed;
    r["mock"] = cfg_.client.use_mock();
    r["resume"] = resume_;
    const auto counters = log_.counters();
    auto get = [&](const char* k) -> std::size_t {
      auto it = counters.find(k);
      return it == counters.end() ? 0 : it->second;
    };
    r["skips"] = get("skips");
    r["parse_retries"] = get("parse_retries");
    r["relabels"] = get("relabels");
    r["discards"] = get("discards");
    r["counters"] = counters;
    if (client_) {
      const auto s = client_->stats();
      r["client"] = {{"endpoint_calls", s.endpoint_calls},
                     {"replayed", s.replayed},
                     {"failed_attempts", s.failed_attempts}};
    }
    for (const auto& [k, v] : extra_.items()) r[k] = v;
    r["warnings"] = log_.warnings();
    r["artifacts"] = artifacts_;
    r["config"] = config_snapshot(cfg_);
    return r;
  }

 private:
  RunConfig cfg_;
  std::string command_;
  bool resume_ = false;
  std::ostream& out_;
  std::string started_at_;
  std::chrono::steady_clock::time_point t0_;

  pipeline::RunLog log_;
  std::optional<Corpus> corpus_;
  std::optional<PatternTable> patterns_;
  std::optional<StopwordSet> stopwords_;
  std::optional<Bm25Index> index_;
  std::unique_ptr<llm::CompletionClient> client_;
  std::optional<pipeline::Context> ctx_;
  std::vector<std::string> artifacts_;
  ordered_json extra_ = ordered_json::object();
};

namespace detail {

template <typename T, typename ToJson>
void write_rows(Session& s, const char* name, const std::vector<T>& rows, ToJson&& to_json) {
  std::vector<ordered_json> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(to_json(r));
  const auto path = s.config().out_path(name);
  write_jsonl(path, out);
  s.artifact(path);
}

template <typename T, typename FromJson>
std::vector<T> read_stage(Session& s, const char* name, const char* producer, FromJson&& from_json) {
  const auto path = s.config().out_path(name);
  if (!std::filesystem::exists(path)) {
    throw DataError("missing " + path.string() + "; run `" + producer + "` first");
  }
  return pipeline::read_rows<T>(path, from_json);
}

inline std::vector<pipeline::SyntheticQuery> read_queries(Session& s) {
  return read_stage<pipeline::SyntheticQuery>(s, files::kQueries, "generate", pipeline::query_from_json);
}
inline std::vector<pipeline::Candidate> read_candidates(Session& s) {
  return read_stage<pipeline::Candidate>(s, files::kCandidates, "mine", pipeline::candidate_from_json);
}
inline std::vector<pipeline::LabeledTriplet> read_triplets(Session& s, const char* name, const char* producer) {
  return read_stage<pipeline::LabeledTriplet>(s, name, producer, pipeline::triplet_from_json);
}

inline void write_triplets(Session& s, const char* name, std::vector<pipeline::LabeledTriplet> rows) {
  pipeline::canonical_sort(rows);
  write_rows(s, name, rows, pipeline::triplet_to_json);
}

inline ordered_json distribution_json(const pipeline::LabelDistribution& d) {
  ordered_json j;
  j["counts"] = d.counts;
  j["total"] = d.total;
  const double ratio = d.max_min_ratio();
  j["max_min_ratio"] = std::isfinite(ratio) ? json(ratio) : json(nullptr);
  return j;
}

// Loads a stage output when resuming and it exists, otherwise computes and
// saves it.
template <typename T, typename Compute, typename Load, typename Save>
std::vector<T> stage(Session& s, const char* name, Compute&& compute, Load&& load, Save&& save) {
  if (s.resume() && std::filesystem::exists(s.config().out_path(name))) {
    s.log().count(std::string("resumed_") + name);
    return load();
  }
  auto rows = compute();
  save(rows);
  return rows;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline void cmd_ingest(Session& s) {
  const auto& c = s.corpus();
  s.note("documents", c.size());
  s.out() << "corpus ok: " << c.size() << " documents\n";
}

inline void cmd_index(Session& s) {
  auto idx = Bm25Index::build(s.corpus(), s.config().bm25);
  const auto path = s.config().out_path(files::kIndex);
  idx.save(path);
  s.artifact(path);
  s.note("index", {{"documents", idx.n_docs()}, {"terms", idx.n_terms()}, {"avg_doc_length", idx.avg_doc_length()}});
  s.out() << "index: " << idx.n_docs() << " documents, " << idx.n_terms() << " terms -> " << path.string()
          << '\n';
}

inline std::vector<pipeline::SyntheticQuery> do_generate(Session& s) {
  auto& ctx = s.context(true, false);
  auto queries = pipeline::run_generation(ctx);
  detail::write_rows(s, files::kQueries, queries, pipeline::query_to_json);
  return queries;
}

inline std::vector<pipeline::Candidate> do_mine(Session& s, const std::vector<pipeline::SyntheticQuery>& queries) {
  auto& ctx = s.context(false, true);
  auto cands = pipeline::run_mining(ctx, queries);
  detail::write_rows(s, files::kCandidates, cands, pipeline::candidate_to_json);
  return cands;
}

inline std::vector<pipeline::LabeledTriplet> do_label(Session& s, const std::vector<pipeline::Candidate>& cands) {
  auto& ctx = s.context(false, false);
  const auto t0 = std::chrono::steady_clock::now();
  const auto calls0 = ctx.client.stats().endpoint_calls;
  auto labeled = pipeline::run_labeling(ctx, cands);
  const auto calls = ctx.client.stats().endpoint_calls - calls0;
  const auto elapsed = std::chrono::steady_clock::now() - t0;
  if (calls > 0 && elapsed.count() > 0) s.note("labeling_rpm", eval::measure_rpm(calls, elapsed));
  detail::write_triplets(s, files::kLabeled, labeled);
  return labeled;
}

inline std::vector<pipeline::LabeledTriplet> do_qc(Session& s, std::vector<pipeline::LabeledTriplet> labeled) {
  auto& ctx = s.context(false, false);
  auto kept = pipeline::run_qc(ctx, std::move(labeled));
  detail::write_triplets(s, files::kQc, kept);
  return kept;
}

inline std::vector<pipeline::LabeledTriplet> do_rebalance(Session& s, std::vector<pipeline::LabeledTriplet> kept) {
  auto& ctx = s.context(false, true);
  pipeline::RebalanceSummary sum;
  auto out = pipeline::rebalance(ctx, std::move(kept), &sum);
  s.note("rebalance", {{"rounds", sum.rounds},
                       {"pairs_added", sum.pairs_added},
                       {"reached_uniform", sum.reached_uniform},
                       {"before", detail::distribution_json(sum.before)},
                       {"after", detail::distribution_json(sum.after)}});
  detail::write_triplets(s, files::kTriplets, out);
  return out;
}

inline void do_assemble(Session& s, std::vector<pipeline::LabeledTriplet> triplets) {
  const auto& cfg = s.config();
  pipeline::AssembleOptions opts;
  for (const auto& f : cfg.external_files) opts.external_files.emplace_back(f);
  opts.proportions = cfg.proportions;
  opts.seed = cfg.seed;
  opts.training = cfg.training;
  opts.config_snapshot = config_snapshot(cfg);
  auto res = pipeline::assemble_dataset(std::move(triplets), s.corpus(), s.templates(), s.prompt_options(), opts,
                                        cfg.out_path(cfg.dataset_name));
  s.artifact(res.dataset_path);
  s.artifact(res.manifest_path);
  const auto tm = cfg.out_path(files::kTrainingManifest);
  pipeline::emit_training_manifest(cfg.training, tm);
  s.artifact(tm);
  s.note("dataset", {{"lines", res.lines}, {"label_distribution", res.manifest["label_distribution"]}});
  s.out() << "dataset: " << res.lines << " records -> " << res.dataset_path.string() << '\n';
}

inline void summarize(Session& s, const std::vector<pipeline::LabeledTriplet>& triplets) {
  const auto d = pipeline::LabelDistribution::of(triplets);
  s.note("label_distribution", detail::distribution_json(d));
  s.out() << "triplets: " << d.total << " (levels 0-4:";
  for (auto c : d.counts) s.out() << ' ' << c;
  s.out() << ")\n";
}

inline void cmd_generate(Session& s) {
  const auto q = do_generate(s);
  s.out() << "queries: " << q.size() << '\n';
}

inline void cmd_mine(Session& s) {
  const auto c = do_mine(s, detail::read_queries(s));
  s.out() << "candidates: " << c.size() << '\n';
}

inline void cmd_label(Session& s) {
  const auto t = do_label(s, detail::read_candidates(s));
  summarize(s, t);
}

inline void cmd_qc(Session& s) {
  const auto t = do_qc(s, detail::read_triplets(s, files::kLabeled, "label"));
  summarize(s, t);
}

inline void cmd_rebalance(Session& s) {
  const auto t = do_rebalance(s, detail::read_triplets(s, files::kQc, "qc"));
  summarize(s, t);
}

inline void cmd_assemble(Session& s) { do_assemble(s, detail::read_triplets(s, files::kTriplets, "rebalance")); }

inline void cmd_pipeline(Session& s) {
  using namespace pipeline;
  const auto& cfg = s.config();
  {
    const auto path = cfg.out_path(files::kIndex);
    if (!(s.resume() && std::filesystem::exists(path))) {
      s.index().save(path);
      s.artifact(path);
    }
  }
  auto queries = detail::stage<SyntheticQuery>(
      s, files::kQueries, [&] { return pipeline::run_generation(s.context(true, false)); },
      [&] { return detail::read_queries(s); },
      [&](const auto& rows) { detail::write_rows(s, files::kQueries, rows, query_to_json); });
  auto cands = detail::stage<Candidate>(
      s, files::kCandidates, [&] { return pipeline::run_mining(s.context(false, true), queries); },
      [&] { return detail::read_candidates(s); },
      [&](const auto& rows) { detail::write_rows(s, files::kCandidates, rows, candidate_to_json); });
  auto labeled = detail::stage<LabeledTriplet>(
      s, files::kLabeled, [&] { return pipeline::run_labeling(s.context(false, false), cands); },
      [&] { return detail::read_triplets(s, files::kLabeled, "label"); },
      [&](const auto& rows) { detail::write_triplets(s, files::kLabeled, rows); });
  auto kept = detail::stage<LabeledTriplet>(
      s, files::kQc, [&] { return pipeline::run_qc(s.context(false, false), labeled); },
      [&] { return detail::read_triplets(s, files::kQc, "qc"); },
      [&](const auto& rows) { detail::write_triplets(s, files::kQc, rows); });
  auto triplets = detail::stage<LabeledTriplet>(
      s, files::kTriplets,
      [&] {
        RebalanceSummary sum;
        auto out = pipeline::rebalance(s.context(false, true), kept, &sum);
        s.note("rebalance", {{"rounds", sum.rounds},
                             {"pairs_added", sum.pairs_added},
                             {"reached_uniform", sum.reached_uniform},
                             {"before", detail::distribution_json(sum.before)},
                             {"after", detail::distribution_json(sum.after)}});
        return out;
      },
      [&] { return detail::read_triplets(s, files::kTriplets, "rebalance"); },
      [&](const auto& rows) { detail::write_triplets(s, files::kTriplets, rows); });
  s.out() << "queries: " << queries.size() << ", candidates: " << cands.size() << '\n';
  summarize(s, triplets);
  do_assemble(s, std::move(triplets));
}

inline void cmd_eval(Session& s) {
  const auto& cfg = s.config();
  const auto groups = eval::load_judged(cfg.judged);
  std::vector<std::string> labelers = cfg.labelers;
  if (labelers.empty()) {
    std::set<std::string> names;
    for (const auto& g : groups) {
      for (const auto& p : g.pairs) {
        for (const auto& [n, _] : p.labeler_scores) names.insert(n);
      }
    }
    names.erase(cfg.baseline);
    labelers.assign(names.begin(), names.end());
  }
  const auto report = eval::eval_report(groups, labelers, cfg.baseline, {cfg.margin_accuracy, cfg.margin_ndcg});
  const auto j = eval::to_json(report);
  const auto jp = cfg.out_path(files::kEvalReport);
  const auto tp = cfg.out_path(files::kEvalTable);
  write_text_file(jp, j.dump(2) + "\n");
  const auto table = eval::render_table(j);
  write_text_file(tp, table);
  s.artifact(jp);
  s.artifact(tp);
  s.note("eval", {{"queries", groups.size()}, {"labelers", labelers}, {"baseline", cfg.baseline}});
  s.out() << table;
}

inline void cmd_report(Session& s) {
  const auto& cfg = s.config();
  const auto rp = cfg.out_path(files::kRunReport);
  const auto ep = cfg.out_path(files::kEvalReport);
  bool any = false;
  if (std::filesystem::exists(rp)) {
    const auto r = json::parse(read_text_file(rp));
    any = true;
    s.out() << "last run: " << r.value("command", std::string("?")) << " (" << r.value("status", std::string("?"))
            << ", exit " << r.value("exit_code", -1) << ")\n";
    for (const char* k : {"skips", "parse_retries", "relabels", "discards"}) {
      s.out() << "  " << k << ": " << r.value(k, 0) << '\n';
    }
    if (r.contains("client")) s.out() << "  client: " << r["client"].dump() << '\n';
    if (r.contains("label_distribution")) s.out() << "  label distribution: " << r["label_distribution"].dump() << '\n';
    if (r.contains("rebalance")) {
      s.out() << "  rebalance: rounds " << r["rebalance"].value("rounds", 0) << ", pairs added "
              << r["rebalance"].value("pairs_added", 0) << '\n';
    }
    for (const auto& w : r.value("warnings", std::vector<std::string>{})) s.out() << "  warning: " << w << '\n';
  }
  if (std::filesystem::exists(ep)) {
    any = true;
    s.out() << eval::render_table(json::parse(read_text_file(ep)));
  }
  if (!any) throw DataError("no run or eval report in " + cfg.out);
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

struct Command {
  const char* name;
  const char* help;
  Need need;
  void (*run)(Session&);
};

inline const std::vector<Command>& commands() {
  static const std::vector<Command> cmds = {
      {"ingest", "validate the corpus", Need::Corpus, cmd_ingest},
      {"index", "build and save the BM25 index", Need::Corpus, cmd_index},
      {"generate", "generate (and revise) synthetic queries", Need::Corpus | Need::Patterns, cmd_generate},
      {"mine", "mine BM25 candidates for generated queries", Need::Corpus, cmd_mine},
      {"label", "label candidate pairs", Need::Corpus, cmd_label},
      {"qc", "relabel or discard low-scored positives", Need::Corpus, cmd_qc},
      {"rebalance", "deepen mining toward a uniform label distribution", Need::Corpus, cmd_rebalance},
      {"assemble", "write the prompt/completion dataset and manifests", Need::Corpus, cmd_assemble},
      {"pipeline", "run every stage end to end", Need::Corpus | Need::Patterns, cmd_pipeline},
      {"eval", "labeler agreement metrics and non-inferiority tests", Need::Judged, cmd_eval},
      {"report", "print the last run and eval reports", Need::None, cmd_report},
  };
  return cmds;
}

inline std::string config_key_help() {
  std::string s = "Config keys (JSON file via --config, nested objects or dotted names; override with --set key=value):\n";
  for (const auto& k : config_keys()) {
    std::string line = "  " + k.name;
    if (line.size() < 34) line.resize(34, ' ');
    s += line + k.help + "\n";
  }
  s += "\nEnvironment: " + std::string(llm::kApiKeyEnv) + " holds the endpoint bearer token.\n";
  s += "Exit codes: 0 success, 1 config error, 2 runtime failure, 3 partial (rerun to resume).\n";
  return s;
}

namespace detail {

inline void handle_sigint(int) { interrupt_flag().store(true); }

inline void write_report(const Session& s, const std::string& status, int code, const std::string& error) {
  try {
    write_text_file(s.config().out_path(files::kRunReport), s.report(status, code, error).dump(2) + "\n");
  } catch (const std::exception&) {
  }
}

inline void write_rejects(Session& s) {
  try {
    write_jsonl(s.config().out_path(files::kRejects), s.log().reject_rows());
  } catch (const std::exception&) {
  }
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Builds graded-relevance training data for enterprise search and evaluates relevance labelers."};
  app.name("synthrel");
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.footer(config_key_help());

  std::string config_path;
  std::uint64_t seed = 0;
  bool mock = false;
  std::size_t parallelism = 0;
  std::size_t k = 0;
  std::string out_dir;
  bool resume = false;
  bool no_revision = false;
  std::vector<std::string> overrides;
  std::string corpus, patterns, judged, baseline;
  std::vector<std::string> labelers;

  app.add_option("--config", config_path, "JSON config file");
  auto* seed_opt = app.add_option("--seed", seed, "random seed (config: seed)");
  app.add_flag("--mock", mock, "use the offline mock labeler and generator (config: client.mock)");
  auto* par_opt = app.add_option("--parallelism", parallelism, "concurrent requests (config: parallelism)")
                      ->check(CLI::PositiveNumber);
  auto* k_opt = app.add_option("--k", k, "BM25 negatives per query (config: k)")->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out", out_dir, "output directory (config: out)");
  app.add_flag("--resume", resume, "reuse stage outputs already present in the output directory");
  app.add_flag("--no-revision", no_revision, "skip the query revision stage (config: revision=false)");
  app.add_option("--set", overrides, "override any config key, key=value (repeatable)");
  auto* corpus_opt = app.add_option("--corpus", corpus, "corpus JSONL (config: corpus)");
  auto* patterns_opt = app.add_option("--patterns", patterns, "pattern table JSON (config: patterns)");
  auto* judged_opt = app.add_option("--judged", judged, "judged JSONL for eval (config: eval.judged)");
  auto* baseline_opt = app.add_option("--baseline", baseline, "baseline labeler for eval (config: eval.baseline)");
  auto* labelers_opt = app.add_option("--labelers", labelers, "labelers to evaluate (config: eval.labelers)")
                           ->delimiter(',');

  for (const auto& c : commands()) app.add_subcommand(c.name, c.help)->footer(config_key_help());

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  const Command* cmd = nullptr;
  for (const auto& c : commands()) {
    if (app.got_subcommand(c.name)) cmd = &c;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) load_config_file(cfg, config_path);
    for (const auto& o : overrides) apply_override(cfg, o);
    if (*seed_opt) cfg.seed = seed;
    if (mock) cfg.client.mock = true;
    if (*par_opt) cfg.parallelism = parallelism;
    if (*k_opt) {
      cfg.k = k;
      cfg.k_max = std::max(cfg.k_max, k);
    }
    if (*out_opt) cfg.out = out_dir;
    if (no_revision) cfg.revision = false;
    if (*corpus_opt) cfg.corpus = corpus;
    if (*patterns_opt) cfg.patterns = patterns;
    if (*judged_opt) cfg.judged = judged;
    if (*baseline_opt) cfg.baseline = baseline;
    if (*labelers_opt) cfg.labelers = labelers;
    validate(cfg, cmd->need);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  interrupt_flag().store(false);
  auto previous = std::signal(SIGINT, detail::handle_sigint);
  struct Restore {
    decltype(previous) p;
    ~Restore() { std::signal(SIGINT, p); }
  } restore{previous};

  Session session(cfg, cmd->name, resume, out);
  int code = kExitOk;
  std::string status = "ok";
  std::string error;
  try {
    cmd->run(session);
    if (session.log().counter("transport_failures") > 0) {
      code = kExitPartial;
      status = "partial";
      error = "some requests failed; rerun to retry them";
    }
  } catch (const Interrupted&) {
    code = kExitPartial;
    status = "interrupted";
    error = "interrupted";
  } catch (const ConfigError& e) {
    code = kExitConfig;
    status = "config_error";
    error = e.what();
  } catch (const std::exception& e) {
    code = kExitRuntime;
    status = "failed";
    error = e.what();
  }
  if (cmd->run != cmd_report) {
    detail::write_rejects(session);
    detail::write_report(session, status, code, error);
  }
  for (const auto& w : session.log().warnings()) err << "warning: " << w << '\n';
  if (!error.empty()) err << cmd->name << ": " << error << '\n';
  return code;
}

}  // namespace synthrel::cli
