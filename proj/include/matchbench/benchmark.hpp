#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace matchbench {

struct Attribute {
  std::string name;
  std::string description;
};

struct Schema {
  std::string table_name;
  std::string table_description;
  std::vector<Attribute> attributes;

  std::size_t size() const noexcept { return attributes.size(); }
  // Case-insensitive lookup; returns the position in `attributes`.
  std::optional<std::size_t> find(std::string_view name) const;
};

// A pair of attribute names, stored verbatim as they appear in the schemas.
struct AttributePair {
  std::string source;
  std::string target;

  friend bool operator==(const AttributePair&, const AttributePair&) = default;
  friend auto operator<=>(const AttributePair&, const AttributePair&) = default;
};

struct Dataset {
  std::string id;
  Schema source;
  Schema target;

  std::size_t pair_count() const noexcept { return source.size() * target.size(); }

  // Pairs are addressed by a dense source-major index: s * |target| + t.
  std::size_t pair_index(std::size_t s, std::size_t t) const noexcept {
    return s * target.size() + t;
  }
  std::optional<std::size_t> pair_index(const AttributePair& p) const;
  AttributePair pair_at(std::size_t index) const;
};

struct GroundTruth {
  std::string dataset_id;
  std::vector<AttributePair> matches;
};

struct Benchmark {
  std::vector<Dataset> datasets;
  std::vector<GroundTruth> truths;

  const Dataset* find_dataset(std::string_view id) const;
  const GroundTruth* find_truth(std::string_view dataset_id) const;
  const Dataset& dataset(std::string_view id) const;
  const GroundTruth& truth(std::string_view dataset_id) const;

  std::size_t total_pairs() const;
  std::size_t total_matches() const;
};

enum class Severity { Warning, Error };

struct Diagnostic {
  Severity severity;
  std::string dataset_id;
  std::string message;
};

// ASCII case folding; attribute names are compared through this.
std::string fold_case(std::string_view s);

// Cartesian product, source-major.
std::vector<AttributePair> pair_space(const Dataset& d);

// Empty iff every invariant holds. Duplicate truth pairs are warnings, the
// rest are errors.
std::vector<Diagnostic> validate_benchmark(const Benchmark& b);

// Builds a Benchmark from an in-memory manifest without validating it.
// `base_dir` resolves dataset entries given as relative file paths.
Benchmark parse_manifest(const nlohmann::json& doc,
                         const std::filesystem::path& base_dir = {});

// Accepts a manifest file or a directory holding `benchmark.json`. Validates
// the result; truth pairs are resolved to the schemas' verbatim names and
// deduplicated. Throws Error{ManifestNotFound|SchemaError|TruthError}.
Benchmark load_benchmark(const std::filesystem::path& path);

// The checks and normalization load_benchmark applies after parsing.
Benchmark validated(Benchmark b);

// Inverse of parse_manifest; always emits the single-file inline form.
nlohmann::json to_manifest(const Benchmark& b);

// Reads a benchmark published as CSV tables:
//   datasets.csv    id,source_table,target_table
//   tables.csv      table,description
//   attributes.csv  table,name,description   (rows in schema order)
//   matches.csv     dataset,source,target
// Headers are required; columns are matched by name. The result is validated
// like load_benchmark.
Benchmark import_benchmark_csv(const std::filesystem::path& dir);

// RFC 4180 records (quoted fields, doubled quotes, CRLF tolerated).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace matchbench
