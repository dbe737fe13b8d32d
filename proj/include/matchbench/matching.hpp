#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "matchbench/benchmark.hpp"

namespace matchbench {

// The closed answer scale requested from the model.
enum class VoteValue : unsigned char { Unknown = 0, Yes = 1, No = 2 };

std::string_view to_string(VoteValue v) noexcept;
// Case-insensitive, surrounding whitespace ignored; anything off-scale is nullopt.
std::optional<VoteValue> parse_vote(std::string_view token) noexcept;

// One opinion per pair of the dataset's pair space, indexed source-major.
// The yes-set and no-set are disjoint by construction.
struct Matching {
  std::string dataset_id;
  std::size_t source_count = 0;
  std::size_t target_count = 0;
  std::vector<VoteValue> votes;

  Matching() = default;
  explicit Matching(const Dataset& d)
      : dataset_id(d.id), source_count(d.source.size()), target_count(d.target.size()),
        votes(d.pair_count(), VoteValue::Unknown) {}

  std::size_t pair_count() const noexcept { return votes.size(); }
  std::size_t count(VoteValue v) const noexcept;
  std::vector<std::size_t> yes_set() const { return indices_of(VoteValue::Yes); }
  std::vector<std::size_t> no_set() const { return indices_of(VoteValue::No); }
  bool same_shape(const Matching& other) const noexcept {
    return dataset_id == other.dataset_id && source_count == other.source_count &&
           target_count == other.target_count;
  }

  friend bool operator==(const Matching&, const Matching&) = default;

 private:
  std::vector<std::size_t> indices_of(VoteValue v) const;
};

}  // namespace matchbench
