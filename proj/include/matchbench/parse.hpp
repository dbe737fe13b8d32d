#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "matchbench/benchmark.hpp"
#include "matchbench/matching.hpp"
#include "matchbench/prompt.hpp"

namespace matchbench {

enum class ExtractStatus { Ok, NoJsonFound, MalformedJson };

struct JsonExtraction {
  ExtractStatus status = ExtractStatus::NoJsonFound;
  nlohmann::json value;

  bool ok() const noexcept { return status == ExtractStatus::Ok; }
};

// Fenced code blocks first, then balanced {...} / [...] spans, left to right.
// Never throws.
JsonExtraction extract_json(std::string_view text);

struct VoteKey {
  std::size_t run = 0;
  std::size_t vote = 0;
  std::size_t job = 0;

  friend auto operator<=>(const VoteKey&, const VoteKey&) = default;
};

// Votes for exactly the job's expected pairs (dense pair indices, ascending).
struct VoteSet {
  std::string dataset_id;
  VoteKey key;
  std::vector<std::pair<std::size_t, VoteValue>> votes;
  std::vector<std::string> diagnostics;

  // nullopt when the index is not one of the job's expected pairs.
  std::optional<VoteValue> get(std::size_t pair_index) const;
};

// Always total: expected pairs without a usable entry are Unknown.
VoteSet to_votes(const nlohmann::json& value, const PromptJob& job, const Dataset& d);

// extract_json + to_votes; extraction failures yield an all-Unknown set.
VoteSet parse_response(std::string_view text, const PromptJob& job, const Dataset& d);

// Yes / No when strictly more than half of the votes agree, else Unknown.
VoteValue majority(std::span<const VoteValue> votes) noexcept;
VoteValue majority(VoteValue a, VoteValue b, VoteValue c) noexcept;

nlohmann::json to_json(const VoteSet& v, const Dataset& d);

}  // namespace matchbench
