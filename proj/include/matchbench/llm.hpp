#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "matchbench/benchmark.hpp"
#include "matchbench/prompt.hpp"

namespace matchbench {

// Identifies one sampled completion: which job, which vote, which run.
struct ResponseKey {
  std::string dataset_id;
  TaskScope scope = TaskScope::OneToOne;
  std::string model;
  std::size_t run = 1;   // 1-based
  std::size_t vote = 1;  // 1-based
  std::size_t job = 0;

  friend auto operator<=>(const ResponseKey&, const ResponseKey&) = default;
  friend bool operator==(const ResponseKey&, const ResponseKey&) = default;
};

std::string to_string(const ResponseKey& key);

struct CompletionRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  // Extra body fields; empty means the endpoint's defaults.
  nlohmann::json params = nlohmann::json::object();
  // Bookkeeping for test doubles and logging; never sent over the wire.
  std::optional<ResponseKey> key;
  std::optional<PromptJob> job;
};

struct Completion {
  std::string text;
  nlohmann::json usage;  // null when the backend does not report it
};

// Caps the number of requests a suite invocation may send.
class RequestBudget {
 public:
  explicit RequestBudget(std::size_t cap) : cap_(cap) {}

  // Throws Error{BudgetExceeded} once the cap is reached.
  void acquire();
  std::size_t used() const noexcept { return used_.load(); }
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t cap_;
  std::atomic<std::size_t> used_{0};
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual Completion complete(const CompletionRequest& req) = 0;
  // Requests that reached the backend (cache hits never do).
  virtual std::size_t requests_issued() const noexcept = 0;
};

// ---------------------------------------------------------------------------
// Mock backend

struct MockPolicy {
  enum class Mode { Oracle, Scripted, Constant };

  Mode mode = Mode::Oracle;
  double flip_prob = 0.0;  // oracle: chance an emitted answer is inverted
  double omit_prob = 0.0;  // oracle: chance an entry is left out
  std::uint64_t seed = 0;
  // constant: the answer given for every expected pair ("yes", "no",
  // "unknown"), or, when `constant_text` is set, that text verbatim.
  std::string constant_answer = "unknown";
  std::optional<std::string> constant_text;
  // scripted: response for a request; defaults to cycling `script` by job.
  std::vector<std::string> script;
  std::function<std::string(const CompletionRequest&)> responder;
};

// "oracle:eps=0.1,omit=0,seed=7", "constant:yes", "constant-text:<raw>",
// "scripted:<file>" (a JSON array of strings). Throws Error{InvalidArgument}.
MockPolicy parse_mock_policy(std::string_view spec);

class MockBackend final : public CompletionBackend {
 public:
  MockBackend(const Benchmark& benchmark, MockPolicy policy, RequestBudget* budget = nullptr);

  Completion complete(const CompletionRequest& req) override;
  std::size_t requests_issued() const noexcept override { return issued_.load(); }

 private:
  std::string oracle_response(const CompletionRequest& req) const;
  std::string constant_response(const CompletionRequest& req) const;

  const Benchmark& benchmark_;
  MockPolicy policy_;
  RequestBudget* budget_;
  std::atomic<std::size_t> issued_{0};
};

// ---------------------------------------------------------------------------
// OpenAI-compatible chat-completions client

struct HttpResponse {
  int status = 0;  // 0: the request never got a response
  std::string body;
  std::string error;
};

using HttpTransport =
    std::function<HttpResponse(const std::string& url, const std::string& body,
                               const std::vector<std::pair<std::string, std::string>>& headers)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct HttpConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  int max_retries = 5;
  std::chrono::milliseconds initial_backoff{1000};
  std::chrono::milliseconds max_backoff{60000};
  std::chrono::seconds timeout{120};

  // MATCHBENCH_API_KEY, MATCHBENCH_BASE_URL.
  static HttpConfig from_env();
};

// cpp-httplib backed transport.
HttpTransport make_http_transport(std::chrono::seconds timeout);

class HttpBackend final : public CompletionBackend {
 public:
  explicit HttpBackend(HttpConfig cfg, RequestBudget* budget = nullptr, HttpTransport transport = {},
                       Sleeper sleeper = {});

  // Retries 429, 5xx and transport failures with jittered exponential
  // backoff. 401/403 fail at once with Error{AuthError}.
  Completion complete(const CompletionRequest& req) override;
  std::size_t requests_issued() const noexcept override { return issued_.load(); }

  static nlohmann::json request_body(const CompletionRequest& req);

 private:
  HttpConfig cfg_;
  RequestBudget* budget_;
  HttpTransport transport_;
  Sleeper sleeper_;
  std::atomic<std::size_t> issued_{0};
  std::atomic<std::uint64_t> jitter_state_{0x9e3779b97f4a7c15ULL};
};

// ---------------------------------------------------------------------------
// Append-only raw response store

struct RawResponse {
  ResponseKey key;
  std::string text;
  std::string timestamp;
  nlohmann::json usage;
};

std::uint64_t fnv1a64(std::string_view data) noexcept;

// JSON-Lines, one file per (dataset, scope, model, run) under
// <root>/<model>/<scope>/<dataset>/run<k>.jsonl.
class ResponseStore {
 public:
  explicit ResponseStore(std::filesystem::path root);

  // false (and no write) when the key is already present.
  bool put(const RawResponse& r);
  // Throws Error{StoreCorrupt} if the backing file fails its checks.
  std::optional<RawResponse> get(const ResponseKey& key) const;

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path run_dir(const std::string& model, TaskScope scope,
                                const std::string& dataset_id) const;
  std::filesystem::path run_file(const ResponseKey& key) const;

  // Every record of one run file, sorted by key.
  std::vector<RawResponse> load_run(const ResponseKey& any_key_of_run) const;

 private:
  void ensure_loaded(const std::filesystem::path& file) const;

  std::filesystem::path root_;
  mutable std::shared_mutex mutex_;
  mutable std::set<std::filesystem::path> loaded_;
  mutable std::map<ResponseKey, RawResponse> records_;
};

std::string sanitize_path_component(std::string_view s);
std::string utc_timestamp();

}  // namespace matchbench
