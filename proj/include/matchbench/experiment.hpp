#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "matchbench/benchmark.hpp"
#include "matchbench/llm.hpp"
#include "matchbench/matching.hpp"
#include "matchbench/parse.hpp"
#include "matchbench/prompt.hpp"

namespace matchbench {

struct ExperimentRecord {
  std::string dataset_id;
  TaskScope scope = TaskScope::OneToOne;
  std::string model;
  std::size_t run = 1;
  Matching matching;
  // pair_votes[pair][vote]; the matching is majority() of each row.
  std::vector<std::vector<VoteValue>> pair_votes;
  std::vector<VoteSet> vote_sets;

  // "<model>/<scope>", the method id used in reports.
  std::string method() const;
};

struct ExperimentOptions {
  std::size_t votes = 3;
  std::size_t concurrency = 4;
  PromptTemplate tpl = PromptTemplate::default_template();
  nlohmann::json params = nlohmann::json::object();
  bool persist = true;  // write votes and matching files next to the raw responses
};

enum class BackendKind { Live, Mock };

struct SuiteConfig {
  std::filesystem::path benchmark_path;
  std::vector<TaskScope> scopes;
  std::vector<std::string> datasets;  // empty: all
  std::string model = "gpt-4-0125-preview";
  std::size_t runs = 5;
  std::size_t votes = 3;
  BackendKind backend = BackendKind::Mock;
  std::string mock_policy = "oracle:eps=0";
  std::size_t budget = 2000;
  std::size_t concurrency = 4;
  std::filesystem::path runs_dir = "runs";
  std::optional<std::filesystem::path> template_path;
  std::optional<HttpConfig> http;  // live backend; unset: HttpConfig::from_env()

  // Throws Error{InvalidArgument}: runs >= 1, votes odd and >= 1, K >= 1.
  void validate() const;
};

// Store-first: each (vote, job) completion is looked up before the backend is
// asked. Everything fetched is persisted before an error propagates.
ExperimentRecord run_experiment(const Benchmark& b, const Dataset& d, TaskScope scope, const std::string& model,
                                std::size_t run, CompletionBackend& backend, ResponseStore& store,
                                const ExperimentOptions& opts = {});

// runs × scopes × datasets records, ordered by (dataset, scope, run). The
// completions of the whole suite share one worker pool.
std::vector<ExperimentRecord> run_suite(const SuiteConfig& cfg, const Benchmark& b, CompletionBackend& backend,
                                        ResponseStore& store);

// Builds the backend and store from the config and runs the suite.
std::vector<ExperimentRecord> run_suite(const SuiteConfig& cfg);

// Re-parses the stored raw responses; throws Error{StoreCorrupt} if any
// response of the experiment is missing.
ExperimentRecord replay_experiment(const Benchmark& b, const Dataset& d, TaskScope scope, const std::string& model,
                                   std::size_t run, const ResponseStore& store, std::size_t votes = 3);

std::filesystem::path matching_file(const ResponseStore& store, const std::string& model, TaskScope scope,
                                    const std::string& dataset_id, std::size_t run);
void persist_record(const ExperimentRecord& r, const Dataset& d, const ResponseStore& store);

struct StoredMatching {
  std::string model;
  TaskScope scope = TaskScope::OneToOne;
  std::size_t run = 1;
  Matching matching;
};

StoredMatching load_matching_file(const std::filesystem::path& file, const Benchmark& b);
// Every run<k>.matching.json below the runs directory, sorted.
std::vector<StoredMatching> load_stored_matchings(const std::filesystem::path& runs_dir, const Benchmark& b);

}  // namespace matchbench
