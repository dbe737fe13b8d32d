#include "matchbench/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "matchbench/benchmark.hpp"
#include "matchbench/error.hpp"
#include "matchbench/eval.hpp"
#include "matchbench/experiment.hpp"
#include "matchbench/report.hpp"
#include "matchbench/similarity.hpp"

namespace matchbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CliConfig {
  fs::path config_file;

  fs::path validate_path;

  fs::path import_from;
  fs::path import_out = "benchmark.json";

  fs::path benchmark;
  std::string metric = "ngram";
  fs::path out;
  fs::path pr_curve;

  std::vector<std::string> scopes;
  std::vector<std::string> datasets;
  std::string model = "gpt-4-0125-preview";
  std::size_t runs = 5;
  std::size_t votes = 3;
  std::string backend = "mock";
  std::string mock_policy = "oracle:eps=0";
  std::size_t budget = 2000;
  std::size_t concurrency = 4;
  fs::path runs_dir = "runs";
  fs::path template_path;
  std::string base_url;

  std::string baseline = "ngram";
  std::vector<std::string> methods;
};

std::string json_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

// Seeds an option from an outside source as if it had been given, then
// resets its count so a flag on the command line still wins.
void seed_option(CLI::Option* opt, const json& value) {
  opt->clear();
  if (value.is_array()) {
    for (const auto& v : value) opt->add_result(json_scalar(v));
  } else {
    opt->add_result(json_scalar(value));
  }
  opt->run_callback();
  opt->clear();
}

json read_config(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw UsageError("cannot read config file " + file.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw UsageError("config file is not a JSON object: " + file.string());
  return doc;
}

// The config file is a JSON object keyed by long flag names; a nested object
// named after a subcommand overrides the top-level keys for that subcommand.
void apply_config(CLI::App& sub, const json& doc) {
  std::map<std::string, json> merged;
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!it.value().is_object()) merged[it.key()] = it.value();
  if (auto it = doc.find(sub.get_name()); it != doc.end() && it->is_object())
    for (auto jt = it->begin(); jt != it->end(); ++jt) merged[jt.key()] = jt.value();
  for (const auto& [key, value] : merged) {
    if (key == "config") continue;
    CLI::Option* opt = nullptr;
    try {
      opt = sub.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      continue;  // keys for other subcommands
    }
    try {
      seed_option(opt, value);
    } catch (const CLI::Error& e) {
      throw UsageError("config key '" + key + "': " + e.what());
    }
  }
}

void apply_env(CLI::App& sub) {
  const char* url = std::getenv("MATCHBENCH_BASE_URL");
  if (!url || !*url) return;
  try {
    seed_option(sub.get_option("--base-url"), json(url));
  } catch (const CLI::OptionNotFound&) {
  }
}

fs::path require_path(const fs::path& p, const char* flag) {
  if (p.empty()) throw UsageError(std::string(flag) + " is required");
  return p;
}

void emit(const fs::path& file, const std::string& content, std::ostream& out) {
  if (file.empty()) {
    out << content;
  } else {
    write_text_file(file, content);
  }
}

// ---------------------------------------------------------------------------

int cmd_validate(const CliConfig& c, std::ostream& out, std::ostream& err) {
  const fs::path path = require_path(c.validate_path, "path");
  fs::path file = path;
  if (fs::is_directory(path)) file = path / "benchmark.json";
  if (!fs::is_regular_file(file)) throw Error(ErrorKind::ManifestNotFound, "no manifest at " + path.string());
  std::ifstream in(file, std::ios::binary);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorKind::SchemaError, "manifest is not valid JSON: " + file.string());

  const Benchmark raw = parse_manifest(doc, file.parent_path());
  bool failed = false;
  for (const auto& d : validate_benchmark(raw)) {
    failed = failed || d.severity == Severity::Error;
    err << (d.severity == Severity::Error ? "error" : "warning") << ": "
        << (d.dataset_id.empty() ? std::string() : d.dataset_id + ": ") << d.message << '\n';
  }
  if (failed) return kExitDomain;

  const Benchmark b = validated(raw);
  out << "dataset,source_attributes,target_attributes,pairs,matches\n";
  for (const auto& d : b.datasets)
    out << d.id << ',' << d.source.size() << ',' << d.target.size() << ',' << d.pair_count() << ','
        << b.truth(d.id).matches.size() << '\n';
  out << "total,,," << b.total_pairs() << ',' << b.total_matches() << '\n';
  return kExitOk;
}

int cmd_import(const CliConfig& c, std::ostream&, std::ostream& err) {
  const Benchmark b = import_benchmark_csv(require_path(c.import_from, "--from"));
  fs::path target = c.import_out;
  if (fs::is_directory(target)) target /= "benchmark.json";
  write_text_file(target, to_manifest(b).dump(2) + "\n");
  err << "imported " << b.datasets.size() << " datasets, " << b.total_pairs() << " pairs, " << b.total_matches()
      << " matches into " << target.string() << '\n';
  return kExitOk;
}

int cmd_baseline(const CliConfig& c, std::ostream& out, std::ostream& err) {
  const Metric metric = parse_metric(c.metric);
  const Benchmark b = load_benchmark(require_path(c.benchmark, "--benchmark"));
  const auto rows = run_baseline(metric, b);
  emit(c.out, baseline_csv(metric, rows), out);
  const auto pooled = pooled_scores(metric, b);
  const auto curve = pr_curve(pooled);
  if (!c.pr_curve.empty()) write_text_file(c.pr_curve, pr_curve_csv(curve));
  double mean_f1 = 0.0;
  for (const auto& r : rows) mean_f1 += r.threshold.f1;
  if (!rows.empty()) mean_f1 /= static_cast<double>(rows.size());
  err << metric_name(metric) << ": mean f1 " << mean_f1 << ", pooled PR AUC " << curve.auc << '\n';
  return kExitOk;
}

int cmd_run(const CliConfig& c, std::ostream& out, std::ostream& err) {
  SuiteConfig cfg;
  cfg.benchmark_path = require_path(c.benchmark, "--benchmark");
  if (c.scopes.empty()) {
    cfg.scopes.assign(std::begin(kAllScopes), std::end(kAllScopes));
  } else {
    for (const auto& s : c.scopes) cfg.scopes.push_back(parse_scope(s));
  }
  cfg.datasets = c.datasets;
  cfg.model = c.model;
  cfg.runs = c.runs;
  cfg.votes = c.votes;
  if (c.backend == "mock") {
    cfg.backend = BackendKind::Mock;
  } else if (c.backend == "live") {
    cfg.backend = BackendKind::Live;
  } else {
    throw UsageError("--backend must be live or mock");
  }
  cfg.mock_policy = c.mock_policy;
  parse_mock_policy(cfg.mock_policy);  // reject a bad policy before any work
  cfg.budget = c.budget;
  cfg.concurrency = c.concurrency;
  cfg.runs_dir = c.runs_dir;
  if (!c.template_path.empty()) cfg.template_path = c.template_path;
  HttpConfig http = HttpConfig::from_env();
  if (!c.base_url.empty()) http.base_url = c.base_url;
  cfg.http = http;
  if (cfg.backend == BackendKind::Live && http.api_key.empty())
    throw Error(ErrorKind::AuthError, "MATCHBENCH_API_KEY is not set");

  const auto records = run_suite(cfg);
  out << "dataset,method,run,yes,no,unknown\n";
  for (const auto& r : records)
    out << r.dataset_id << ',' << r.method() << ',' << r.run << ',' << r.matching.count(VoteValue::Yes) << ','
        << r.matching.count(VoteValue::No) << ',' << r.matching.count(VoteValue::Unknown) << '\n';
  err << records.size() << " experiments under " << cfg.runs_dir.string() << '\n';
  return kExitOk;
}

std::string method_of(const StoredMatching& m) { return m.model + "/" + std::string(scope_name(m.scope)); }

bool is_metric(const std::string& s) {
  for (Metric m : kAllMetrics)
    if (metric_name(m) == s) return true;
  return false;
}

struct Loaded {
  Benchmark benchmark;
  std::vector<StoredMatching> stored;
};

Loaded load_inputs(const CliConfig& c) {
  Loaded l{load_benchmark(require_path(c.benchmark, "--benchmark")), {}};
  l.stored = load_stored_matchings(c.runs_dir, l.benchmark);
  return l;
}

std::vector<MetricRow> metric_rows(const Loaded& l, const std::string& baseline) {
  std::vector<MetricRow> rows;
  for (const auto& s : l.stored) {
    const auto& d = l.benchmark.dataset(s.matching.dataset_id);
    rows.push_back(evaluate(s.matching, l.benchmark.truth(d.id), d, method_of(s), s.run));
  }
  if (!baseline.empty() && baseline != "none") {
    const Metric metric = parse_metric(baseline);
    for (const auto& r : run_baseline(metric, l.benchmark)) {
      const auto& d = l.benchmark.dataset(r.dataset_id);
      rows.push_back(evaluate(r.matching, l.benchmark.truth(d.id), d, std::string(metric_name(metric)), 1));
    }
  }
  // Tables follow the manifest's dataset order, not the directory order.
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < l.benchmark.datasets.size(); ++i) position[l.benchmark.datasets[i].id] = i;
  std::stable_sort(rows.begin(), rows.end(), [&](const MetricRow& a, const MetricRow& b) {
    return position[a.dataset_id] < position[b.dataset_id];
  });
  return rows;
}

void write_evaluation(const std::vector<MetricRow>& rows, const fs::path& dir, std::ostream& out, std::ostream& err) {
  const auto table = median_table(rows);
  write_text_file(dir / "metrics.csv", metric_rows_csv(rows));
  write_text_file(dir / "f1_table.csv", f1_table_csv(table));
  write_text_file(dir / "f1_table.md", f1_table_markdown(table));
  write_text_file(dir / "decisiveness.md", decisiveness_table_markdown(table));

  // Consistency needs at least two runs of a method on every dataset.
  std::map<std::string, std::map<std::string, std::size_t>> run_counts;
  for (const auto& r : rows) ++run_counts[r.method][r.dataset_id];
  std::vector<MetricRow> repeated;
  for (const auto& r : rows) {
    bool ok = true;
    for (const auto& [d, n] : run_counts[r.method]) ok = ok && n >= 2;
    if (ok) repeated.push_back(r);
  }
  const auto sd = consistency_table(repeated);
  write_text_file(dir / "consistency.csv", consistency_csv(sd));
  write_text_file(dir / "consistency.md", consistency_markdown(sd));
  out << f1_table_markdown(table);
  err << rows.size() << " metric rows, reports in " << dir.string() << '\n';
}

int cmd_evaluate(const CliConfig& c, std::ostream& out, std::ostream& err) {
  const fs::path dir = require_path(c.out, "--out");
  const auto l = load_inputs(c);
  if (l.stored.empty()) err << "warning: no stored matchings under " << c.runs_dir.string() << '\n';
  write_evaluation(metric_rows(l, c.baseline), dir, out, err);
  return kExitOk;
}

// Resolves method tokens: a similarity metric, "<model>/<scope>", or a bare
// scope, which needs --model or exactly one model in the runs directory.
MethodRuns gather_methods(const Loaded& l, const std::vector<std::string>& tokens, const std::string& model_flag,
                          bool model_given, std::vector<std::string>& order) {
  std::set<std::string> models;
  for (const auto& s : l.stored) models.insert(s.model);

  MethodRuns runs;
  std::vector<std::string> baselines;
  for (const auto& token : tokens) {
    if (is_metric(token)) {
      baselines.push_back(token);
      order.push_back(token);
      continue;
    }
    std::string model;
    std::string scope_text = token;
    if (auto slash = token.rfind('/'); slash != std::string::npos) {
      model = token.substr(0, slash);
      scope_text = token.substr(slash + 1);
    } else if (model_given) {
      model = model_flag;
    } else if (models.size() == 1) {
      model = *models.begin();
    } else {
      throw UsageError("method '" + token + "' is ambiguous; pass --model or use <model>/<scope>");
    }
    const TaskScope scope = parse_scope(scope_text);
    const std::string method = model + "/" + std::string(scope_name(scope));
    auto& by_dataset = runs[method];
    for (const auto& s : l.stored)
      if (s.model == model && s.scope == scope) by_dataset[s.matching.dataset_id].push_back(s.matching);
    if (by_dataset.empty()) throw Error(ErrorKind::InsufficientRuns, "no stored runs for " + method);
    order.push_back(method);
  }

  // A deterministic baseline enters as identical copies, as many as the
  // LLM methods have runs on that dataset.
  for (const auto& name : baselines) {
    const Metric metric = parse_metric(name);
    std::map<std::string, std::vector<Matching>> copies;
    for (auto& r : run_baseline(metric, l.benchmark)) {
      std::size_t n = 1;
      for (const auto& [method, by_dataset] : runs)
        if (auto it = by_dataset.find(r.dataset_id); it != by_dataset.end()) n = std::max(n, it->second.size());
      copies[r.dataset_id] = std::vector<Matching>(n, r.matching);
    }
    runs[name] = std::move(copies);
  }
  return runs;
}

void write_combination(const CombinationTables& t, const fs::path& dir, std::ostream& out) {
  write_text_file(dir / "combination.csv", combination_csv(t));
  write_text_file(dir / "combination_tp.md", combination_markdown(t, CombinationMeasure::TruePositives));
  write_text_file(dir / "combination_candidates.md", combination_markdown(t, CombinationMeasure::Candidates));
  write_text_file(dir / "combination_f1.md", combination_markdown(t, CombinationMeasure::F1));
  out << combination_markdown(t, CombinationMeasure::F1);
}

CombinationTables ordered(CombinationTables t, const std::vector<std::string>& order) {
  std::vector<std::size_t> idx;
  for (const auto& m : order) {
    const std::size_t i = t.method_index(m);
    if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
  }
  CombinationTables r;
  r.datasets = t.datasets;
  for (std::size_t i : idx) r.methods.push_back(t.methods[i]);
  r.per_dataset.resize(idx.size());
  r.aggregate.resize(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = 0; b < idx.size(); ++b) {
      r.per_dataset[a].push_back(t.per_dataset[idx[a]][idx[b]]);
      r.aggregate[a].push_back(t.aggregate[idx[a]][idx[b]]);
    }
  }
  return r;
}

int cmd_combine(const CliConfig& c, const CLI::App& sub, std::ostream& out, std::ostream&) {
  const fs::path dir = require_path(c.out, "--out");
  if (c.methods.empty()) throw UsageError("--methods is required");
  const auto l = load_inputs(c);
  std::vector<std::string> order;
  const bool model_given = sub.get_option("--model")->count() > 0;
  const auto runs = gather_methods(l, c.methods, c.model, model_given, order);
  write_combination(ordered(combination_tables(runs, l.benchmark), order), dir, out);
  return kExitOk;
}

int cmd_report(const CliConfig& c, std::ostream& out, std::ostream& err) {
  const fs::path dir = require_path(c.out, "--out");
  const auto l = load_inputs(c);
  write_evaluation(metric_rows(l, c.baseline), dir, out, err);

  std::map<std::string, std::vector<std::string>> per_model;
  for (const auto& s : l.stored) {
    auto& tokens = per_model[s.model];
    const std::string method = method_of(s);
    if (std::find(tokens.begin(), tokens.end(), method) == tokens.end()) tokens.push_back(method);
  }
  for (auto& [model, tokens] : per_model) {
    if (c.baseline != "none" && !c.baseline.empty()) tokens.insert(tokens.begin(), c.baseline);
    std::vector<std::string> order;
    const auto runs = gather_methods(l, tokens, model, true, order);
    const fs::path sub = per_model.size() == 1 ? dir : dir / sanitize_path_component(model);
    write_combination(ordered(combination_tables(runs, l.benchmark), order), sub, out);
  }
  return kExitOk;
}

int exit_code_for(ErrorKind k) {
  return k == ErrorKind::InvalidArgument || k == ErrorKind::UnknownMetric ? kExitUsage : kExitDomain;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CliConfig c;
  CLI::App app{"Schema matching benchmark runner", "matchbench"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Print help for every subcommand");
  app.footer(
      "Environment:\n"
      "  MATCHBENCH_API_KEY   bearer token for --backend live\n"
      "  MATCHBENCH_BASE_URL  default for --base-url\n"
      "Exit codes: 0 ok, 1 domain error, 2 usage error");
  app.add_option("--config", c.config_file,
                 "JSON file of flag defaults (flags > MATCHBENCH_* env > config > built-in)");

  auto* validate = app.add_subcommand("validate", "Check a benchmark manifest and print its sizes");
  validate->add_option("path", c.validate_path, "Manifest file or directory holding benchmark.json");

  auto* import = app.add_subcommand("import-benchmark", "Convert a CSV benchmark into a manifest");
  import->add_option("--from", c.import_from, "Directory with datasets/tables/attributes/matches.csv");
  import->add_option("--out", c.import_out, "Manifest file to write")->capture_default_str();

  auto* baseline = app.add_subcommand("baseline", "Per-dataset best-threshold string similarity baseline");
  baseline->add_option("--metric", c.metric, "ngram, jaro_winkler, levenshtein or monge_elkan")->capture_default_str();
  baseline->add_option("--benchmark", c.benchmark, "Benchmark manifest");
  baseline->add_option("--out", c.out, "CSV file (default: stdout)");
  baseline->add_option("--pr-curve", c.pr_curve, "CSV file for the pooled precision-recall curve");

  auto* run = app.add_subcommand("run", "Query a model (or the mock) and store matchings");
  run->add_option("--benchmark", c.benchmark, "Benchmark manifest");
  run->add_option("--scope", c.scopes, "1-to-1, 1-to-N, N-to-1, N-to-M (repeatable; default all)")->delimiter(',');
  run->add_option("--dataset", c.datasets, "Restrict to these dataset ids (repeatable)")->delimiter(',');
  run->add_option("--model", c.model, "Model name")->capture_default_str();
  run->add_option("--runs", c.runs, "Experiments per dataset and scope")->capture_default_str();
  run->add_option("--votes", c.votes, "Sampled votes per pair (odd)")->capture_default_str();
  run->add_option("--backend", c.backend, "live or mock")->capture_default_str();
  run->add_option("--mock-policy", c.mock_policy, "oracle:eps=..,omit=..,seed=.. | constant:<answer> | scripted:<file>")
      ->capture_default_str();
  run->add_option("--budget", c.budget, "Maximum requests for the whole run")->capture_default_str();
  run->add_option("--concurrency", c.concurrency, "Requests in flight")->capture_default_str();
  run->add_option("--runs-dir", c.runs_dir, "Response store root")->capture_default_str();
  run->add_option("--template", c.template_path, "Prompt template file");
  run->add_option("--base-url", c.base_url, "Chat-completions endpoint (env MATCHBENCH_BASE_URL)");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score stored matchings against the ground truth");
  evaluate_cmd->add_option("--runs-dir", c.runs_dir, "Response store root")->capture_default_str();
  evaluate_cmd->add_option("--benchmark", c.benchmark, "Benchmark manifest");
  evaluate_cmd->add_option("--out", c.out, "Report directory");
  evaluate_cmd->add_option("--baseline", c.baseline, "Similarity metric added as a method, or none")
      ->capture_default_str();

  auto* combine_cmd = app.add_subcommand("combine", "Union-of-matches tables over method pairs");
  combine_cmd->add_option("--methods", c.methods, "Comma list of metrics, scopes or <model>/<scope>")->delimiter(',');
  combine_cmd->add_option("--runs-dir", c.runs_dir, "Response store root")->capture_default_str();
  combine_cmd->add_option("--benchmark", c.benchmark, "Benchmark manifest");
  combine_cmd->add_option("--model", c.model, "Model for bare scope names");
  combine_cmd->add_option("--out", c.out, "Report directory");

  auto* report = app.add_subcommand("report", "evaluate plus combine over every stored method");
  report->add_option("--runs-dir", c.runs_dir, "Response store root")->capture_default_str();
  report->add_option("--benchmark", c.benchmark, "Benchmark manifest");
  report->add_option("--out", c.out, "Report directory");
  report->add_option("--baseline", c.baseline, "Similarity metric added as a method, or none")->capture_default_str();

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    // Pre-scan for --config so its values land underneath env and flags.
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) c.config_file = args[i + 1];
      if (args[i].rfind("--config=", 0) == 0) c.config_file = args[i].substr(9);
    }
    json config = c.config_file.empty() ? json::object() : read_config(c.config_file);
    for (auto* sub : app.get_subcommands({})) {
      apply_config(*sub, config);
      apply_env(*sub);
    }
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    // Top-level help lists every subcommand's flags as well.
    out << app.help("", app.get_subcommands().empty() ? CLI::AppFormatMode::All : CLI::AppFormatMode::Normal);
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(c, out, err);
    if (import->parsed()) return cmd_import(c, out, err);
    if (baseline->parsed()) return cmd_baseline(c, out, err);
    if (run->parsed()) return cmd_run(c, out, err);
    if (evaluate_cmd->parsed()) return cmd_evaluate(c, out, err);
    if (combine_cmd->parsed()) return cmd_combine(c, *combine_cmd, out, err);
    if (report->parsed()) return cmd_report(c, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace matchbench
