#include "matchbench/matching.hpp"

#include <algorithm>
#include <cctype>

namespace matchbench {

std::string_view to_string(VoteValue v) noexcept {
  switch (v) {
    case VoteValue::Yes: return "yes";
    case VoteValue::No: return "no";
    case VoteValue::Unknown: break;
  }
  return "unknown";
}

std::optional<VoteValue> parse_vote(std::string_view token) noexcept {
  while (!token.empty() && std::isspace(static_cast<unsigned char>(token.front()))) token.remove_prefix(1);
  while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back()))) token.remove_suffix(1);
  const auto folded = fold_case(token);
  if (folded == "yes") return VoteValue::Yes;
  if (folded == "no") return VoteValue::No;
  if (folded == "unknown") return VoteValue::Unknown;
  return std::nullopt;
}

std::size_t Matching::count(VoteValue v) const noexcept {
  return static_cast<std::size_t>(std::count(votes.begin(), votes.end(), v));
}

std::vector<std::size_t> Matching::indices_of(VoteValue v) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < votes.size(); ++i)
    if (votes[i] == v) out.push_back(i);
  return out;
}

}  // namespace matchbench
