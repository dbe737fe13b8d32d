#include "matchbench/benchmark.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

#include "matchbench/error.hpp"

namespace matchbench {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ManifestNotFound: return "ManifestNotFound";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::TruthError: return "TruthError";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::UnknownMetric: return "UnknownMetric";
    case ErrorKind::EmptyTruth: return "EmptyTruth";
    case ErrorKind::TemplateError: return "TemplateError";
    case ErrorKind::AuthError: return "AuthError";
    case ErrorKind::RateLimitExhausted: return "RateLimitExhausted";
    case ErrorKind::TransportError: return "TransportError";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::StoreCorrupt: return "StoreCorrupt";
    case ErrorKind::DatasetMismatch: return "DatasetMismatch";
    case ErrorKind::InsufficientRuns: return "InsufficientRuns";
    case ErrorKind::RunCountMismatch: return "RunCountMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Error";
}

std::string fold_case(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  const auto key = fold_case(name);
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (fold_case(attributes[i].name) == key) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> Dataset::pair_index(const AttributePair& p) const {
  auto s = source.find(p.source);
  auto t = target.find(p.target);
  if (!s || !t) return std::nullopt;
  return pair_index(*s, *t);
}

AttributePair Dataset::pair_at(std::size_t index) const {
  const auto s = index / target.size();
  const auto t = index % target.size();
  return {source.attributes.at(s).name, target.attributes.at(t).name};
}

const Dataset* Benchmark::find_dataset(std::string_view id) const {
  for (const auto& d : datasets)
    if (d.id == id) return &d;
  return nullptr;
}

const GroundTruth* Benchmark::find_truth(std::string_view dataset_id) const {
  for (const auto& t : truths)
    if (t.dataset_id == dataset_id) return &t;
  return nullptr;
}

const Dataset& Benchmark::dataset(std::string_view id) const {
  if (const auto* d = find_dataset(id)) return *d;
  throw Error(ErrorKind::DatasetMismatch, "unknown dataset '" + std::string(id) + "'");
}

const GroundTruth& Benchmark::truth(std::string_view dataset_id) const {
  if (const auto* t = find_truth(dataset_id)) return *t;
  throw Error(ErrorKind::TruthError, "no ground truth for dataset '" + std::string(dataset_id) + "'");
}

std::size_t Benchmark::total_pairs() const {
  std::size_t n = 0;
  for (const auto& d : datasets) n += d.pair_count();
  return n;
}

std::size_t Benchmark::total_matches() const {
  std::size_t n = 0;
  for (const auto& t : truths) n += t.matches.size();
  return n;
}

std::vector<AttributePair> pair_space(const Dataset& d) {
  std::vector<AttributePair> out;
  out.reserve(d.pair_count());
  for (const auto& s : d.source.attributes)
    for (const auto& t : d.target.attributes) out.push_back({s.name, t.name});
  return out;
}

namespace {

void validate_schema(const Schema& schema, const std::string& dataset_id, const char* side,
                     std::vector<Diagnostic>& out) {
  if (schema.attributes.empty()) {
    out.push_back({Severity::Error, dataset_id,
                   std::string(side) + " schema '" + schema.table_name + "' has no attributes"});
    return;
  }
  std::set<std::string> seen;
  for (const auto& a : schema.attributes) {
    if (a.name.empty()) {
      out.push_back({Severity::Error, dataset_id,
                     std::string(side) + " schema '" + schema.table_name + "' has an unnamed attribute"});
      continue;
    }
    if (!seen.insert(fold_case(a.name)).second) {
      out.push_back({Severity::Error, dataset_id,
                     std::string(side) + " schema '" + schema.table_name +
                         "' has duplicate attribute '" + a.name + "'"});
    }
  }
}

}  // namespace

std::vector<Diagnostic> validate_benchmark(const Benchmark& b) {
  std::vector<Diagnostic> out;
  std::set<std::string> ids;
  for (const auto& d : b.datasets) {
    if (d.id.empty()) out.push_back({Severity::Error, d.id, "dataset without id"});
    if (!ids.insert(d.id).second)
      out.push_back({Severity::Error, d.id, "duplicate dataset id '" + d.id + "'"});
    validate_schema(d.source, d.id, "source", out);
    validate_schema(d.target, d.id, "target", out);
  }

  std::map<std::string, int> truth_counts;
  for (const auto& t : b.truths) {
    ++truth_counts[t.dataset_id];
    const auto* d = b.find_dataset(t.dataset_id);
    if (!d) {
      out.push_back({Severity::Error, t.dataset_id,
                     "ground truth references unknown dataset '" + t.dataset_id + "'"});
      continue;
    }
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& m : t.matches) {
      if (!d->source.find(m.source)) {
        out.push_back({Severity::Error, d->id,
                       "ground truth names unknown source attribute '" + m.source + "'"});
        continue;
      }
      if (!d->target.find(m.target)) {
        out.push_back({Severity::Error, d->id,
                       "ground truth names unknown target attribute '" + m.target + "'"});
        continue;
      }
      if (!seen.emplace(fold_case(m.source), fold_case(m.target)).second) {
        out.push_back({Severity::Warning, d->id,
                       "duplicate ground-truth pair (" + m.source + ", " + m.target + ")"});
      }
    }
  }
  for (const auto& d : b.datasets) {
    const auto it = truth_counts.find(d.id);
    if (it == truth_counts.end())
      out.push_back({Severity::Error, d.id, "dataset has no ground truth"});
    else if (it->second > 1)
      out.push_back({Severity::Error, d.id, "dataset has more than one ground truth"});
  }
  return out;
}

namespace {

std::string string_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string())
    throw Error(ErrorKind::SchemaError, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

Schema parse_schema(const json& j, const std::string& dataset_id) {
  if (!j.is_object())
    throw Error(ErrorKind::SchemaError, "dataset '" + dataset_id + "': schema must be an object");
  Schema s;
  s.table_name = string_field(j, "table");
  s.table_description = string_field(j, "description");
  const auto it = j.find("attributes");
  if (it == j.end() || !it->is_array())
    throw Error(ErrorKind::SchemaError,
                "dataset '" + dataset_id + "': schema '" + s.table_name + "' lacks an attributes array");
  for (const auto& a : *it) {
    if (a.is_string()) {
      s.attributes.push_back({a.get<std::string>(), {}});
    } else if (a.is_object()) {
      s.attributes.push_back({string_field(a, "name"), string_field(a, "description")});
    } else {
      throw Error(ErrorKind::SchemaError, "dataset '" + dataset_id + "': malformed attribute entry");
    }
  }
  return s;
}

std::vector<AttributePair> parse_matches(const json& j, const std::string& dataset_id) {
  if (!j.is_array())
    throw Error(ErrorKind::TruthError, "dataset '" + dataset_id + "': matches must be an array");
  std::vector<AttributePair> out;
  for (const auto& m : j) {
    if (m.is_array() && m.size() == 2 && m[0].is_string() && m[1].is_string()) {
      out.push_back({m[0].get<std::string>(), m[1].get<std::string>()});
    } else if (m.is_object()) {
      out.push_back({string_field(m, "source"), string_field(m, "target")});
    } else {
      throw Error(ErrorKind::TruthError, "dataset '" + dataset_id + "': malformed match entry");
    }
  }
  return out;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ManifestNotFound, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::SchemaError, path.string() + ": " + e.what());
  }
}

}  // namespace

Benchmark parse_manifest(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object() || !doc.contains("datasets") || !doc["datasets"].is_array())
    throw Error(ErrorKind::SchemaError, "manifest must be an object with a datasets array");

  Benchmark b;
  for (const auto& entry : doc["datasets"]) {
    json d = entry;
    if (entry.is_string()) d = read_json_file(base_dir / entry.get<std::string>());
    if (!d.is_object()) throw Error(ErrorKind::SchemaError, "malformed dataset entry");

    Dataset ds;
    ds.id = string_field(d, "id");
    if (!d.contains("source") || !d.contains("target"))
      throw Error(ErrorKind::SchemaError, "dataset '" + ds.id + "' needs source and target");
    ds.source = parse_schema(d["source"], ds.id);
    ds.target = parse_schema(d["target"], ds.id);
    if (d.contains("matches")) b.truths.push_back({ds.id, parse_matches(d["matches"], ds.id)});
    b.datasets.push_back(std::move(ds));
  }

  if (const auto it = doc.find("truth"); it != doc.end()) {
    if (!it->is_array()) throw Error(ErrorKind::TruthError, "truth must be an array");
    for (const auto& t : *it) {
      if (!t.is_object()) throw Error(ErrorKind::TruthError, "malformed truth entry");
      GroundTruth gt;
      gt.dataset_id = string_field(t, "dataset");
      gt.matches = parse_matches(t.value("matches", json::array()), gt.dataset_id);
      b.truths.push_back(std::move(gt));
    }
  }
  return b;
}

Benchmark load_benchmark(const fs::path& path) {
  std::error_code ec;
  fs::path file = path;
  if (fs::is_directory(path, ec)) file = path / "benchmark.json";
  if (!fs::is_regular_file(file, ec))
    throw Error(ErrorKind::ManifestNotFound, "no manifest at " + path.string());

  return validated(parse_manifest(read_json_file(file), file.parent_path()));
}

Benchmark validated(Benchmark b) {
  for (const auto& diag : validate_benchmark(b)) {
    if (diag.severity != Severity::Error) continue;
    const bool truth_issue = diag.message.find("ground truth") != std::string::npos;
    throw Error(truth_issue ? ErrorKind::TruthError : ErrorKind::SchemaError,
                (diag.dataset_id.empty() ? "" : diag.dataset_id + ": ") + diag.message);
  }

  // Canonicalize truth names to the schema spelling and drop duplicates.
  for (auto& t : b.truths) {
    const auto& d = b.dataset(t.dataset_id);
    std::vector<AttributePair> canonical;
    std::set<std::size_t> seen;
    for (const auto& m : t.matches) {
      const auto idx = *d.pair_index(m);
      if (seen.insert(idx).second) canonical.push_back(d.pair_at(idx));
    }
    t.matches = std::move(canonical);
  }
  // Truth order follows dataset order.
  std::map<std::string, GroundTruth> by_id;
  for (auto& t : b.truths) by_id.emplace(t.dataset_id, std::move(t));
  b.truths.clear();
  for (const auto& d : b.datasets) b.truths.push_back(std::move(by_id.at(d.id)));
  return b;
}

json to_manifest(const Benchmark& b) {
  auto schema_json = [](const Schema& s) {
    json attrs = json::array();
    for (const auto& a : s.attributes) attrs.push_back({{"name", a.name}, {"description", a.description}});
    return json{{"table", s.table_name}, {"description", s.table_description}, {"attributes", attrs}};
  };
  json doc;
  doc["datasets"] = json::array();
  for (const auto& d : b.datasets)
    doc["datasets"].push_back({{"id", d.id}, {"source", schema_json(d.source)}, {"target", schema_json(d.target)}});
  doc["truth"] = json::array();
  for (const auto& t : b.truths) {
    json matches = json::array();
    for (const auto& m : t.matches) matches.push_back({m.source, m.target});
    doc["truth"].push_back({{"dataset", t.dataset_id}, {"matches", matches}});
  }
  return doc;
}

}  // namespace matchbench
