#include "matchbench/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "matchbench/error.hpp"

namespace matchbench {

namespace fs = std::filesystem;
using nlohmann::json;

std::string ExperimentRecord::method() const { return model + "/" + std::string(scope_name(scope)); }

void SuiteConfig::validate() const {
  if (runs < 1) throw Error(ErrorKind::InvalidArgument, "runs must be at least 1");
  if (votes < 1 || votes % 2 == 0) throw Error(ErrorKind::InvalidArgument, "votes must be odd and at least 1");
  if (concurrency < 1) throw Error(ErrorKind::InvalidArgument, "concurrency must be at least 1");
  if (scopes.empty()) throw Error(ErrorKind::InvalidArgument, "at least one scope is required");
  if (model.empty()) throw Error(ErrorKind::InvalidArgument, "model must not be empty");
}

namespace {

struct Experiment {
  const Dataset* dataset;
  TaskScope scope;
  std::string model;
  std::size_t run;
  std::vector<PromptJob> jobs;
  std::size_t first_task;  // offset into the shared task list
};

struct Task {
  ResponseKey key;
  const PromptJob* job;
  const Dataset* dataset;
};

// Fetches every task's text (store first, then backend), K workers wide.
// Results land at the task's index, so completion order does not matter.
// Returns the first error, after all workers stopped.
std::exception_ptr fetch_all(const std::vector<Task>& tasks, const Benchmark& b, CompletionBackend& backend,
                             ResponseStore& store, const ExperimentOptions& opts,
                             std::vector<std::optional<std::string>>& texts) {
  texts.assign(tasks.size(), std::nullopt);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    while (!stop.load()) {
      const auto i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const auto& task = tasks[i];
      try {
        if (auto cached = store.get(task.key)) {
          texts[i] = std::move(cached->text);
          continue;
        }
        CompletionRequest req;
        req.model = task.key.model;
        req.messages = render_messages(*task.job, b, opts.tpl);
        req.params = opts.params;
        req.key = task.key;
        req.job = *task.job;
        auto completion = backend.complete(req);
        store.put({task.key, completion.text, utc_timestamp(), completion.usage});
        texts[i] = std::move(completion.text);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        stop.store(true);
      }
    }
  };

  const auto workers = std::max<std::size_t>(1, std::min(opts.concurrency, tasks.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return first_error;
}

ExperimentRecord assemble(const Experiment& e, std::size_t votes,
                          const std::vector<std::optional<std::string>>& texts) {
  const auto& d = *e.dataset;
  ExperimentRecord r;
  r.dataset_id = d.id;
  r.scope = e.scope;
  r.model = e.model;
  r.run = e.run;
  r.matching = Matching(d);
  r.pair_votes.assign(d.pair_count(), std::vector<VoteValue>(votes, VoteValue::Unknown));

  for (std::size_t v = 0; v < votes; ++v) {
    for (std::size_t j = 0; j < e.jobs.size(); ++j) {
      const auto& text = texts.at(e.first_task + v * e.jobs.size() + j);
      VoteSet set = parse_response(text ? *text : std::string_view{}, e.jobs[j], d);
      set.key = {e.run, v + 1, j};
      for (const auto& [idx, vote] : set.votes) r.pair_votes[idx][v] = vote;
      r.vote_sets.push_back(std::move(set));
    }
  }
  for (std::size_t p = 0; p < r.pair_votes.size(); ++p) r.matching.votes[p] = majority(r.pair_votes[p]);
  return r;
}

void write_atomically(const fs::path& file, const std::string& content) {
  fs::create_directories(file.parent_path());
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error(ErrorKind::StoreCorrupt, "cannot write " + tmp.string());
  }
  fs::rename(tmp, file);
}

char vote_char(VoteValue v) {
  switch (v) {
    case VoteValue::Yes: return 'Y';
    case VoteValue::No: return 'N';
    case VoteValue::Unknown: break;
  }
  return 'U';
}

std::vector<Experiment> plan(const SuiteConfig& cfg, const Benchmark& b, std::vector<Task>& tasks) {
  std::vector<const Dataset*> datasets;
  for (const auto& d : b.datasets) {
    if (cfg.datasets.empty() || std::find(cfg.datasets.begin(), cfg.datasets.end(), d.id) != cfg.datasets.end())
      datasets.push_back(&d);
  }
  for (const auto& id : cfg.datasets) b.dataset(id);  // unknown ids are an error

  std::vector<Experiment> experiments;
  for (const auto* d : datasets)
    for (auto scope : cfg.scopes)
      for (std::size_t run = 1; run <= cfg.runs; ++run)
        experiments.push_back({d, scope, cfg.model, run, build_jobs(*d, scope), 0});

  for (auto& e : experiments) {
    e.first_task = tasks.size();
    for (std::size_t v = 1; v <= cfg.votes; ++v)
      for (const auto& job : e.jobs)
        tasks.push_back({{e.dataset->id, e.scope, e.model, e.run, v, job.job_index}, &job, e.dataset});
  }
  return experiments;
}

}  // namespace

fs::path matching_file(const ResponseStore& store, const std::string& model, TaskScope scope,
                       const std::string& dataset_id, std::size_t run) {
  return store.run_dir(model, scope, dataset_id) / ("run" + std::to_string(run) + ".matching.json");
}

void persist_record(const ExperimentRecord& r, const Dataset& d, const ResponseStore& store) {
  std::string votes_lines;
  for (const auto& set : r.vote_sets) votes_lines += to_json(set, d).dump() + "\n";
  write_atomically(store.run_dir(r.model, r.scope, r.dataset_id) / ("run" + std::to_string(r.run) + ".votes.jsonl"),
                   votes_lines);

  std::string dense;
  dense.reserve(r.matching.votes.size());
  json yes = json::array();
  json no = json::array();
  for (std::size_t i = 0; i < r.matching.votes.size(); ++i) {
    const auto v = r.matching.votes[i];
    dense.push_back(vote_char(v));
    if (v == VoteValue::Unknown) continue;
    const auto p = d.pair_at(i);
    (v == VoteValue::Yes ? yes : no).push_back({p.source, p.target});
  }
  const json doc = {{"dataset", r.dataset_id},
                    {"scope", std::string(scope_name(r.scope))},
                    {"model", r.model},
                    {"run", r.run},
                    {"votes_per_pair", r.pair_votes.empty() ? 0 : r.pair_votes.front().size()},
                    {"source_count", r.matching.source_count},
                    {"target_count", r.matching.target_count},
                    {"matching", dense},
                    {"yes", yes},
                    {"no", no}};
  write_atomically(matching_file(store, r.model, r.scope, r.dataset_id, r.run), doc.dump(2) + "\n");
}

std::vector<ExperimentRecord> run_suite(const SuiteConfig& cfg, const Benchmark& b, CompletionBackend& backend,
                                        ResponseStore& store) {
  cfg.validate();
  ExperimentOptions opts;
  opts.votes = cfg.votes;
  opts.concurrency = cfg.concurrency;
  if (cfg.template_path) opts.tpl = PromptTemplate::load(*cfg.template_path);

  std::vector<Task> tasks;
  const auto experiments = plan(cfg, b, tasks);
  std::vector<std::optional<std::string>> texts;
  const auto error = fetch_all(tasks, b, backend, store, opts, texts);

  std::vector<ExperimentRecord> records;
  for (const auto& e : experiments) {
    const auto n = cfg.votes * e.jobs.size();
    const bool complete = std::all_of(texts.begin() + static_cast<std::ptrdiff_t>(e.first_task),
                                      texts.begin() + static_cast<std::ptrdiff_t>(e.first_task + n),
                                      [](const auto& t) { return t.has_value(); });
    if (!complete) continue;
    records.push_back(assemble(e, cfg.votes, texts));
    if (opts.persist) persist_record(records.back(), *e.dataset, store);
  }
  if (error) std::rethrow_exception(error);
  return records;
}

std::vector<ExperimentRecord> run_suite(const SuiteConfig& cfg) {
  cfg.validate();
  const auto b = load_benchmark(cfg.benchmark_path);
  RequestBudget budget(cfg.budget);
  ResponseStore store(cfg.runs_dir);
  if (cfg.backend == BackendKind::Mock) {
    MockBackend backend(b, parse_mock_policy(cfg.mock_policy), &budget);
    return run_suite(cfg, b, backend, store);
  }
  HttpBackend backend(cfg.http ? *cfg.http : HttpConfig::from_env(), &budget);
  return run_suite(cfg, b, backend, store);
}

ExperimentRecord run_experiment(const Benchmark& b, const Dataset& d, TaskScope scope, const std::string& model,
                                std::size_t run, CompletionBackend& backend, ResponseStore& store,
                                const ExperimentOptions& opts) {
  if (opts.votes < 1 || opts.votes % 2 == 0)
    throw Error(ErrorKind::InvalidArgument, "votes must be odd and at least 1");
  Experiment e{&d, scope, model, run, build_jobs(d, scope), 0};
  std::vector<Task> tasks;
  for (std::size_t v = 1; v <= opts.votes; ++v)
    for (const auto& job : e.jobs) tasks.push_back({{d.id, scope, model, run, v, job.job_index}, &job, &d});

  std::vector<std::optional<std::string>> texts;
  if (auto error = fetch_all(tasks, b, backend, store, opts, texts)) std::rethrow_exception(error);
  auto record = assemble(e, opts.votes, texts);
  if (opts.persist) persist_record(record, d, store);
  return record;
}

ExperimentRecord replay_experiment(const Benchmark& b, const Dataset& d, TaskScope scope, const std::string& model,
                                   std::size_t run, const ResponseStore& store, std::size_t votes) {
  (void)b;
  Experiment e{&d, scope, model, run, build_jobs(d, scope), 0};
  std::vector<std::optional<std::string>> texts;
  for (std::size_t v = 1; v <= votes; ++v) {
    for (const auto& job : e.jobs) {
      const ResponseKey key{d.id, scope, model, run, v, job.job_index};
      auto r = store.get(key);
      if (!r) throw Error(ErrorKind::StoreCorrupt, "missing stored response " + to_string(key));
      texts.push_back(std::move(r->text));
    }
  }
  return assemble(e, votes, texts);
}

StoredMatching load_matching_file(const fs::path& file, const Benchmark& b) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::StoreCorrupt, "cannot open " + file.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorKind::StoreCorrupt, file.string() + ": not JSON");
  try {
    StoredMatching out;
    out.model = doc.at("model").get<std::string>();
    out.scope = parse_scope(doc.at("scope").get<std::string>());
    out.run = doc.at("run").get<std::size_t>();
    const auto& d = b.dataset(doc.at("dataset").get<std::string>());
    out.matching = Matching(d);
    const auto dense = doc.at("matching").get<std::string>();
    if (dense.size() != d.pair_count())
      throw Error(ErrorKind::DatasetMismatch, file.string() + ": matching size does not fit dataset " + d.id);
    for (std::size_t i = 0; i < dense.size(); ++i) {
      switch (dense[i]) {
        case 'Y': out.matching.votes[i] = VoteValue::Yes; break;
        case 'N': out.matching.votes[i] = VoteValue::No; break;
        case 'U': out.matching.votes[i] = VoteValue::Unknown; break;
        default: throw Error(ErrorKind::StoreCorrupt, file.string() + ": bad vote character");
      }
    }
    return out;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::StoreCorrupt, file.string() + ": " + e.what());
  }
}

std::vector<StoredMatching> load_stored_matchings(const fs::path& runs_dir, const Benchmark& b) {
  std::vector<StoredMatching> out;
  std::error_code ec;
  if (!fs::is_directory(runs_dir, ec)) return out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(runs_dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 14 && name.ends_with(".matching.json")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out.push_back(load_matching_file(f, b));
  std::sort(out.begin(), out.end(), [](const StoredMatching& x, const StoredMatching& y) {
    return std::tie(x.model, x.scope, x.matching.dataset_id, x.run) <
           std::tie(y.model, y.scope, y.matching.dataset_id, y.run);
  });
  return out;
}

}  // namespace matchbench
