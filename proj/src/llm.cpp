#include "matchbench/llm.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "matchbench/error.hpp"

namespace matchbench {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(const ResponseKey& key) {
  std::ostringstream ss;
  ss << key.model << '/' << scope_name(key.scope) << '/' << key.dataset_id << "/run" << key.run << "/vote"
     << key.vote << "/job" << key.job;
  return ss.str();
}

void RequestBudget::acquire() {
  auto current = used_.load();
  do {
    if (current >= cap_)
      throw Error(ErrorKind::BudgetExceeded, "request budget of " + std::to_string(cap_) + " exhausted");
  } while (!used_.compare_exchange_weak(current, current + 1));
}

// ---------------------------------------------------------------------------
// Mock backend

namespace {

double parse_probability(std::string_view key, std::string_view value) {
  try {
    std::size_t used = 0;
    const double p = std::stod(std::string(value), &used);
    if (used != value.size() || !(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("range");
    return p;
  } catch (const std::exception&) {
    throw Error(ErrorKind::InvalidArgument,
                "mock policy: " + std::string(key) + " must be a probability, got '" + std::string(value) + "'");
  }
}

std::vector<std::string> load_script(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open mock script " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (!doc.is_array() || doc.empty())
    throw Error(ErrorKind::InvalidArgument, "mock script must be a non-empty JSON array of strings");
  std::vector<std::string> out;
  for (const auto& e : doc) {
    if (!e.is_string()) throw Error(ErrorKind::InvalidArgument, "mock script entries must be strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

MockPolicy parse_mock_policy(std::string_view spec) {
  const auto colon = spec.find(':');
  const auto mode = fold_case(spec.substr(0, colon));
  const auto rest = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  MockPolicy p;
  if (mode == "oracle") {
    p.mode = MockPolicy::Mode::Oracle;
    std::size_t pos = 0;
    while (pos < rest.size()) {
      auto comma = rest.find(',', pos);
      if (comma == std::string_view::npos) comma = rest.size();
      const auto item = rest.substr(pos, comma - pos);
      pos = comma + 1;
      if (item.empty()) continue;
      const auto eq = item.find('=');
      if (eq == std::string_view::npos)
        throw Error(ErrorKind::InvalidArgument, "mock policy: expected key=value, got '" + std::string(item) + "'");
      const auto key = fold_case(item.substr(0, eq));
      const auto value = item.substr(eq + 1);
      if (key == "eps" || key == "flip") {
        p.flip_prob = parse_probability(key, value);
      } else if (key == "omit") {
        p.omit_prob = parse_probability(key, value);
      } else if (key == "seed") {
        try {
          p.seed = std::stoull(std::string(value));
        } catch (const std::exception&) {
          throw Error(ErrorKind::InvalidArgument, "mock policy: bad seed '" + std::string(value) + "'");
        }
      } else {
        throw Error(ErrorKind::InvalidArgument, "mock policy: unknown oracle option '" + key + "'");
      }
    }
  } else if (mode == "constant") {
    p.mode = MockPolicy::Mode::Constant;
    const auto answer = fold_case(rest);
    if (answer != "yes" && answer != "no" && answer != "unknown")
      throw Error(ErrorKind::InvalidArgument, "mock policy: constant answer must be yes, no or unknown");
    p.constant_answer = answer;
  } else if (mode == "constant-text") {
    p.mode = MockPolicy::Mode::Constant;
    p.constant_text = std::string(rest);
  } else if (mode == "scripted") {
    p.mode = MockPolicy::Mode::Scripted;
    p.script = load_script(fs::path(std::string(rest)));
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown mock policy '" + std::string(spec) + "'");
  }
  return p;
}

MockBackend::MockBackend(const Benchmark& benchmark, MockPolicy policy, RequestBudget* budget)
    : benchmark_(benchmark), policy_(std::move(policy)), budget_(budget) {}

namespace {

// Answer list shaped the way the prompt asked for it.
std::string format_answer(const PromptJob& job, const Dataset& d,
                          const std::vector<std::pair<std::size_t, std::string>>& answers) {
  json payload;
  if (job.scope == TaskScope::OneToOne) {
    payload = json::object();
    if (!answers.empty()) payload["answer"] = answers.front().second;
  } else {
    json list = json::array();
    for (const auto& [idx, answer] : answers) {
      const auto p = d.pair_at(idx);
      json entry;
      if (job.scope != TaskScope::OneToN) entry["source"] = p.source;
      if (job.scope != TaskScope::NToOne) entry["target"] = p.target;
      entry["answer"] = answer;
      list.push_back(std::move(entry));
    }
    payload = {{"matches", list}};
  }
  return "Lets think step by step. I compared the attribute names and descriptions.\n```json\n" +
         payload.dump(2) + "\n```\n";
}

const PromptJob& require_job(const CompletionRequest& req) {
  if (!req.job || !req.key)
    throw Error(ErrorKind::InvalidArgument, "mock backend needs the request's job and key");
  return *req.job;
}

double unit_interval(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::string MockBackend::oracle_response(const CompletionRequest& req) const {
  const auto& job = require_job(req);
  const auto& key = *req.key;
  const auto& d = benchmark_.dataset(job.dataset_id);
  const auto& truth = benchmark_.truth(job.dataset_id);

  std::vector<bool> is_match(d.pair_count(), false);
  for (const auto& m : truth.matches)
    if (auto idx = d.pair_index(m)) is_match[*idx] = true;

  // Seeded from the full key so the output is independent of request order.
  std::seed_seq seq{static_cast<std::uint64_t>(policy_.seed), static_cast<std::uint64_t>(fnv1a64(key.dataset_id)),
                    static_cast<std::uint64_t>(key.scope), static_cast<std::uint64_t>(key.run),
                    static_cast<std::uint64_t>(key.vote), static_cast<std::uint64_t>(key.job)};
  std::mt19937_64 rng(seq);

  std::vector<std::pair<std::size_t, std::string>> answers;
  for (auto idx : expected_pair_indices(job, d)) {
    const bool omit = unit_interval(rng) < policy_.omit_prob;
    const bool flip = unit_interval(rng) < policy_.flip_prob;
    if (omit) continue;
    answers.emplace_back(idx, (is_match[idx] != flip) ? "yes" : "no");
  }
  return format_answer(job, d, answers);
}

std::string MockBackend::constant_response(const CompletionRequest& req) const {
  if (policy_.constant_text) return *policy_.constant_text;
  const auto& job = require_job(req);
  const auto& d = benchmark_.dataset(job.dataset_id);
  std::vector<std::pair<std::size_t, std::string>> answers;
  for (auto idx : expected_pair_indices(job, d)) answers.emplace_back(idx, policy_.constant_answer);
  return format_answer(job, d, answers);
}

Completion MockBackend::complete(const CompletionRequest& req) {
  if (budget_) budget_->acquire();
  ++issued_;
  switch (policy_.mode) {
    case MockPolicy::Mode::Oracle:
      return {oracle_response(req), nullptr};
    case MockPolicy::Mode::Constant:
      return {constant_response(req), nullptr};
    case MockPolicy::Mode::Scripted:
      if (policy_.responder) return {policy_.responder(req), nullptr};
      if (policy_.script.empty()) throw Error(ErrorKind::InvalidArgument, "empty mock script");
      return {policy_.script[(req.job ? req.job->job_index : 0) % policy_.script.size()], nullptr};
  }
  return {};
}

// ---------------------------------------------------------------------------
// HTTP backend

HttpConfig HttpConfig::from_env() {
  HttpConfig cfg;
  if (const char* key = std::getenv("MATCHBENCH_API_KEY")) cfg.api_key = key;
  if (const char* url = std::getenv("MATCHBENCH_BASE_URL"); url && *url) cfg.base_url = url;
  return cfg;
}

HttpBackend::HttpBackend(HttpConfig cfg, RequestBudget* budget, HttpTransport transport, Sleeper sleeper)
    : cfg_(std::move(cfg)),
      budget_(budget),
      transport_(transport ? std::move(transport) : make_http_transport(cfg_.timeout)),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper([](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
      })) {}

json HttpBackend::request_body(const CompletionRequest& req) {
  json body = req.params.is_object() ? req.params : json::object();
  body["model"] = req.model;
  json messages = json::array();
  for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = std::move(messages);
  return body;
}

Completion HttpBackend::complete(const CompletionRequest& req) {
  if (req.model.empty()) throw Error(ErrorKind::InvalidArgument, "completion request without a model");
  if (cfg_.api_key.empty()) throw Error(ErrorKind::AuthError, "MATCHBENCH_API_KEY is not set");
  if (budget_) budget_->acquire();

  std::string base = cfg_.base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  const std::string url = base + "/chat/completions";
  const std::string body = request_body(req).dump();
  const std::vector<std::pair<std::string, std::string>> headers = {
      {"Authorization", "Bearer " + cfg_.api_key}, {"Content-Type", "application/json"}};

  HttpResponse last;
  for (int attempt = 0;; ++attempt) {
    ++issued_;
    last = transport_(url, body, headers);
    if (last.status == 200) {
      json doc = json::parse(last.body, nullptr, false);
      if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty())
        throw Error(ErrorKind::TransportError, "unexpected completion payload");
      const auto& message = doc["choices"][0].value("message", json::object());
      const auto content = message.value("content", json());
      if (!content.is_string()) throw Error(ErrorKind::TransportError, "completion without text content");
      return {content.get<std::string>(), doc.value("usage", json())};
    }
    if (last.status == 401 || last.status == 403)
      throw Error(ErrorKind::AuthError, "endpoint rejected the API key (HTTP " + std::to_string(last.status) + ")");

    const bool retryable = last.status == 0 || last.status == 408 || last.status == 429 || last.status >= 500;
    if (!retryable)
      throw Error(ErrorKind::TransportError, "HTTP " + std::to_string(last.status) + ": " + last.body.substr(0, 200));
    if (attempt >= cfg_.max_retries) break;

    // Full-range jitter between half and all of the exponential delay.
    const auto scale = std::ldexp(1.0, attempt);
    const double base_ms = std::min(static_cast<double>(cfg_.max_backoff.count()),
                                    static_cast<double>(cfg_.initial_backoff.count()) * scale);
    auto state = jitter_state_.fetch_add(0x9e3779b97f4a7c15ULL) + 0x9e3779b97f4a7c15ULL;
    state = (state ^ (state >> 30)) * 0xbf58476d1ce4e5b9ULL;
    state = (state ^ (state >> 27)) * 0x94d049bb133111ebULL;
    const double jitter = static_cast<double>((state ^ (state >> 31)) >> 11) * 0x1.0p-53;
    sleeper_(std::chrono::milliseconds(static_cast<long long>(base_ms * (0.5 + 0.5 * jitter))));
  }

  if (last.status == 429)
    throw Error(ErrorKind::RateLimitExhausted,
                "still rate limited after " + std::to_string(cfg_.max_retries) + " retries");
  throw Error(ErrorKind::TransportError,
              last.status == 0 ? "no response: " + last.error : "HTTP " + std::to_string(last.status));
}

// ---------------------------------------------------------------------------
// Response store

std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string sanitize_path_component(std::string_view s) {
  std::string out;
  for (unsigned char c : s) out.push_back(std::isalnum(c) || c == '.' || c == '-' || c == '_' ? static_cast<char>(c) : '_');
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json record_json(const RawResponse& r) {
  return {{"dataset", r.key.dataset_id},
          {"scope", std::string(scope_name(r.key.scope))},
          {"model", r.key.model},
          {"run", r.key.run},
          {"vote", r.key.vote},
          {"job", r.key.job},
          {"text", r.text},
          {"timestamp", r.timestamp},
          {"usage", r.usage},
          {"checksum", hex64(fnv1a64(r.text))}};
}

RawResponse record_from_json(const json& j, const fs::path& file, std::size_t line_no) {
  auto corrupt = [&](const std::string& why) {
    return Error(ErrorKind::StoreCorrupt, file.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  try {
    RawResponse r;
    r.key.dataset_id = j.at("dataset").get<std::string>();
    r.key.scope = parse_scope(j.at("scope").get<std::string>());
    r.key.model = j.at("model").get<std::string>();
    r.key.run = j.at("run").get<std::size_t>();
    r.key.vote = j.at("vote").get<std::size_t>();
    r.key.job = j.at("job").get<std::size_t>();
    r.text = j.at("text").get<std::string>();
    r.timestamp = j.value("timestamp", "");
    r.usage = j.value("usage", json());
    if (j.at("checksum").get<std::string>() != hex64(fnv1a64(r.text))) throw corrupt("checksum mismatch");
    return r;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw corrupt(e.what());
  }
}

}  // namespace

ResponseStore::ResponseStore(fs::path root) : root_(std::move(root)) {}

fs::path ResponseStore::run_dir(const std::string& model, TaskScope scope, const std::string& dataset_id) const {
  return root_ / sanitize_path_component(model) / std::string(scope_name(scope)) /
         sanitize_path_component(dataset_id);
}

fs::path ResponseStore::run_file(const ResponseKey& key) const {
  return run_dir(key.model, key.scope, key.dataset_id) / ("run" + std::to_string(key.run) + ".jsonl");
}

void ResponseStore::ensure_loaded(const fs::path& file) const {
  {
    std::shared_lock lock(mutex_);
    if (loaded_.count(file)) return;
  }
  std::unique_lock lock(mutex_);
  if (loaded_.count(file)) return;
  std::map<ResponseKey, RawResponse> fresh;
  std::ifstream in(file, std::ios::binary);
  std::string line;
  std::size_t line_no = 0;
  while (in && std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw Error(ErrorKind::StoreCorrupt, file.string() + ":" + std::to_string(line_no) + ": not JSON");
    auto r = record_from_json(j, file, line_no);
    auto key = r.key;
    fresh.emplace(std::move(key), std::move(r));
  }
  records_.merge(fresh);
  loaded_.insert(file);
}

bool ResponseStore::put(const RawResponse& r) {
  const auto file = run_file(r.key);
  ensure_loaded(file);
  std::unique_lock lock(mutex_);
  if (records_.count(r.key)) return false;
  fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorKind::StoreCorrupt, "cannot append to " + file.string());
  out << record_json(r).dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::StoreCorrupt, "write failed for " + file.string());
  records_.emplace(r.key, r);
  return true;
}

std::optional<RawResponse> ResponseStore::get(const ResponseKey& key) const {
  ensure_loaded(run_file(key));
  std::shared_lock lock(mutex_);
  const auto it = records_.find(key);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<RawResponse> ResponseStore::load_run(const ResponseKey& any) const {
  ensure_loaded(run_file(any));
  std::shared_lock lock(mutex_);
  std::vector<RawResponse> out;
  for (const auto& [key, r] : records_) {
    if (key.dataset_id == any.dataset_id && key.scope == any.scope && key.model == any.model && key.run == any.run)
      out.push_back(r);
  }
  return out;
}

}  // namespace matchbench
