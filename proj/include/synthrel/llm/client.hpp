#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>

#include "synthrel/clock.hpp"
#include "synthrel/error.hpp"
#include "synthrel/jsonl.hpp"
#include "synthrel/llm/mock.hpp"
#include "synthrel/llm/prompts.hpp"

namespace synthrel::llm {

/// Environment variable holding the endpoint bearer token.
inline constexpr const char* kApiKeyEnv = "SYNTHREL_API_KEY";

struct CompletionConfig {
  std::string endpoint_url;  // empty selects mock mode
  std::string model_name = "gpt-4o";
  int max_retries = 3;
  std::chrono::milliseconds timeout{60'000};
  int parallelism = 4;
  double temperature_generation = 0.7;
  double temperature_labeling = 0.0;
  int max_tokens = 512;
  std::chrono::milliseconds backoff_base{500};

  bool mock = false;
  std::uint64_t mock_seed = 0;
  std::chrono::milliseconds mock_latency{0};

  bool use_mock() const { return mock || endpoint_url.empty(); }

  void validate() const {
    if (max_retries < 0) throw ConfigError("client.max_retries must be >= 0");
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (timeout.count() <= 0) throw ConfigError("client.timeout_secs must be > 0");
  }
};

struct HttpResult {
  int status = 0;  // 0 when no response was received
  std::string body;
  std::string error;
};

// Sends one request body to the completion endpoint.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResult post(const std::string& body) = 0;
};

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(const CompletionConfig& config) {
    auto scheme_end = config.endpoint_url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint_url needs a scheme: " + config.endpoint_url);
    auto path_start = config.endpoint_url.find('/', scheme_end + 3);
    base_ = config.endpoint_url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config.endpoint_url.substr(path_start);
    timeout_ = config.timeout;
    if (const char* key = std::getenv(kApiKeyEnv); key && *key) api_key_ = key;
  }

  HttpResult post(const std::string& body) override {
    httplib::Client cli(base_);
    cli.set_connection_timeout(timeout_);
    cli.set_read_timeout(timeout_);
    cli.set_write_timeout(timeout_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = cli.Post(path_, headers, body, "application/json");
    if (!res) return {0, {}, httplib::to_string(res.error())};
    return {res->status, res->body, {}};
  }

 private:
  std::string base_;
  std::string path_;
  std::chrono::milliseconds timeout_{};
  std::string api_key_;
};

/// Chat-completions request body for one prompt.
inline std::string build_request_body(const CompletionConfig& config, const Prompt& prompt) {
  const double temperature = prompt.kind == PromptKind::Labeling ? config.temperature_labeling
                                                                 : config.temperature_generation;
  ordered_json body;
  body["model"] = config.model_name;
  body["messages"] = ordered_json::array({{{"role", "user"}, {"content", prompt.text}}});
  body["temperature"] = temperature;
  body["max_tokens"] = config.max_tokens;
  return body.dump();
}

/// Generated text from a response body: a top-level "text" field, or the
/// first choice's message content / text.
inline std::optional<std::string> extract_response_text(const std::string& body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  if (auto it = j.find("text"); it != j.end() && it->is_string()) return it->get<std::string>();
  if (auto it = j.find("choices"); it != j.end() && it->is_array() && !it->empty()) {
    const auto& c = (*it)[0];
    if (c.contains("message") && c["message"].contains("content") && c["message"]["content"].is_string()) {
      return c["message"]["content"].get<std::string>();
    }
    if (c.contains("text") && c["text"].is_string()) return c["text"].get<std::string>();
  }
  return std::nullopt;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct ClientStats {
  std::uint64_t endpoint_calls = 0;   // requests actually sent (or mocked)
  std::uint64_t replayed = 0;         // answered from the audit log
  std::uint64_t failed_attempts = 0;  // transport attempts that did not succeed
};

/// Completion client with retries, an append-only JSONL audit log, and
/// replay of previously logged responses.
///
/// Each logical request is identified by its request key plus a per-run
/// sequence number, so re-sending an identical prompt (a parse retry or a
/// QC relabel) is a distinct request. When an audit log from an earlier run
/// is loaded, requests already answered there are served from it and never
/// reach the endpoint. Thread-safe.
class CompletionClient {
 public:
  explicit CompletionClient(CompletionConfig config, std::unique_ptr<Transport> transport = nullptr,
                            MockOptions mock_options = {})
      : config_(std::move(config)),
        transport_(std::move(transport)),
        mock_options_(mock_options),
        slots_(config_.parallelism) {
    config_.validate();
    mock_options_.latency = config_.mock_latency;
    if (!transport_ && !config_.use_mock()) transport_ = std::make_unique<HttpTransport>(config_);
  }

  CompletionClient(const CompletionClient&) = delete;
  CompletionClient& operator=(const CompletionClient&) = delete;

  const CompletionConfig& config() const noexcept { return config_; }
  bool mock_mode() const noexcept { return !transport_; }

  /// Loads successful responses from an existing audit log for replay, then
  /// opens it for appending.
  void attach_audit_log(const std::filesystem::path& path) {
    std::lock_guard lock(mu_);
    if (std::filesystem::exists(path)) {
      for_each_jsonl(path, [&](const json& row, std::size_t) {
        if (!row.value("ok", false)) return;
        replay_[{row.at("replay_key").get<std::string>(), row.at("sequence").get<int>()}] =
            row.at("response_text").get<std::string>();
      });
    } else if (path.has_parent_path()) {
      std::filesystem::create_directories(path.parent_path());
    }
    audit_.open(path, std::ios::app | std::ios::binary);
    if (!audit_) throw DataError("cannot open audit log " + path.string());
  }

  /// Returns the generated text. Throws TransportError once retries are
  /// exhausted.
  std::string complete(const Prompt& prompt) {
    const std::string replay_key = make_replay_key(prompt);
    int sequence;
    {
      std::lock_guard lock(mu_);
      sequence = sequences_[replay_key]++;
      if (auto it = replay_.find({replay_key, sequence}); it != replay_.end()) {
        ++stats_.replayed;
        return it->second;
      }
    }

    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};

    if (!transport_) {
      auto text = mock_complete(prompt, config_.mock_seed, mock_options_);
      record(prompt, replay_key, sequence, 1, 200, text, true);
      return text;
    }

    const std::string body = build_request_body(config_, prompt);
    int last_status = 0;
    std::string last_error;
    for (int attempt = 1; attempt <= config_.max_retries + 1; ++attempt) {
      if (attempt > 1) {
        std::this_thread::sleep_for(config_.backoff_base * (1 << std::min(attempt - 2, 10)));
      }
      HttpResult res = transport_->post(body);
      last_status = res.status;
      if (res.status == 200) {
        if (auto text = extract_response_text(res.body)) {
          record(prompt, replay_key, sequence, attempt, 200, *text, true);
          return *text;
        }
        last_error = "response without text field";
      } else {
        last_error = res.status == 0 ? res.error : "HTTP " + std::to_string(res.status);
      }
      record(prompt, replay_key, sequence, attempt, res.status, res.status == 0 ? res.error : res.body,
             false);
    }
    throw TransportError("completion failed after " + std::to_string(config_.max_retries + 1) +
                             " attempt(s): " + last_error,
                         last_status);
  }

  ClientStats stats() const {
    std::lock_guard lock(mu_);
    return stats_;
  }

 private:
  std::string make_replay_key(const Prompt& prompt) const {
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(fnv1a(config_.model_name + '\x1f' + prompt.text)));
    return prompt.request_key() + '\x1f' + hash;
  }

  void record(const Prompt& prompt, const std::string& replay_key, int sequence, int attempt,
              int status, const std::string& response, bool ok) {
    std::lock_guard lock(mu_);
    ++stats_.endpoint_calls;
    if (!ok) ++stats_.failed_attempts;
    if (!audit_.is_open()) return;
    ordered_json row;
    row["timestamp"] = utc_timestamp();
    row["prompt_kind"] = to_string(prompt.kind);
    row["doc_id"] = prompt.meta("doc_id");
    row["query"] = prompt.meta("query");
    row["pattern_id"] = prompt.meta("pattern_id");
    row["attempt"] = attempt;
    row["sequence"] = sequence;
    row["status"] = status;
    row["ok"] = ok;
    row["replay_key"] = replay_key;
    row["response_text"] = response;
    audit_ << row.dump() << '\n';
    audit_.flush();
  }

  CompletionConfig config_;
  std::unique_ptr<Transport> transport_;
  MockOptions mock_options_;
  std::counting_semaphore<> slots_;

  mutable std::mutex mu_;
  std::ofstream audit_;
  std::map<std::string, int> sequences_;
  std::map<std::pair<std::string, int>, std::string> replay_;
  ClientStats stats_;
};

}  // namespace synthrel::llm
