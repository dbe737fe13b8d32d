#include "matchbench/parse.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace matchbench {

using nlohmann::json;

namespace {

// Bounds the number of parse attempts on adversarial input.
constexpr std::size_t kMaxCandidates = 256;

std::optional<json> try_parse(std::string_view text) {
  json value = json::parse(text.begin(), text.end(), nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded() || !(value.is_object() || value.is_array())) return std::nullopt;
  return value;
}

struct Fence {
  std::string_view body;
};

std::vector<Fence> fenced_blocks(std::string_view text) {
  std::vector<Fence> out;
  std::size_t pos = 0;
  while (true) {
    const auto open = text.find("```", pos);
    if (open == std::string_view::npos) break;
    auto body_start = text.find('\n', open + 3);
    // A fence without a newline carries its payload on the same line.
    const auto close_probe = text.find("```", open + 3);
    if (body_start == std::string_view::npos || (close_probe != std::string_view::npos && close_probe < body_start)) {
      body_start = open + 3;
      // Skip a language tag glued to the fence, e.g. ```json{...}```.
      while (body_start < text.size() && std::isalpha(static_cast<unsigned char>(text[body_start])))
        ++body_start;
    } else {
      ++body_start;
    }
    const auto close = text.find("```", body_start);
    if (close == std::string_view::npos) {
      out.push_back({text.substr(body_start)});
      break;
    }
    out.push_back({text.substr(body_start, close - body_start)});
    pos = close + 3;
  }
  return out;
}

// For every '{' or '[', the position of its balanced closer, or npos.
// Quotes only count inside brackets so that prose around the payload cannot
// flip the string state. Spans nested inside an opener that never closes are
// dropped: a complete fragment of a truncated payload is not the payload.
std::vector<std::pair<std::size_t, std::size_t>> bracket_spans(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::vector<std::size_t> parent;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> stack;  // indices into spans
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"' && !stack.empty()) {
      in_string = true;
    } else if (c == '{' || c == '[') {
      parent.push_back(stack.empty() ? kNone : stack.back());
      stack.push_back(spans.size());
      spans.emplace_back(i, std::string_view::npos);
    } else if (c == '}' || c == ']') {
      if (stack.empty()) continue;
      const char want = c == '}' ? '{' : '[';
      if (text[spans[stack.back()].first] != want) {
        // Mismatched closer: everything still open is unbalanced.
        stack.clear();
        continue;
      }
      spans[stack.back()].second = i;
      stack.pop_back();
    }
  }
  std::vector<std::pair<std::size_t, std::size_t>> kept;
  for (std::size_t k = 0; k < spans.size(); ++k) {
    bool inside_unclosed = false;
    for (std::size_t a = parent[k]; a != kNone && !inside_unclosed; a = parent[a])
      inside_unclosed = spans[a].second == std::string_view::npos;
    if (!inside_unclosed) kept.push_back(spans[k]);
  }
  return kept;
}

}  // namespace

JsonExtraction extract_json(std::string_view text) {
  JsonExtraction result;
  bool saw_candidate = false;
  std::size_t attempts = 0;

  try {
    for (const auto& fence : fenced_blocks(text)) {
      saw_candidate = true;
      if (++attempts > kMaxCandidates) break;
      if (auto v = try_parse(fence.body)) {
        result.status = ExtractStatus::Ok;
        result.value = std::move(*v);
        return result;
      }
    }

    for (const auto& [open, close] : bracket_spans(text)) {
      saw_candidate = true;
      if (close == std::string_view::npos) continue;
      if (++attempts > kMaxCandidates) break;
      if (auto v = try_parse(text.substr(open, close - open + 1))) {
        result.status = ExtractStatus::Ok;
        result.value = std::move(*v);
        return result;
      }
    }
  } catch (...) {
    // Parser failures are reported as MalformedJson below.
  }
  result.status = saw_candidate ? ExtractStatus::MalformedJson : ExtractStatus::NoJsonFound;
  return result;
}

std::optional<VoteValue> VoteSet::get(std::size_t pair_index) const {
  const auto it = std::lower_bound(votes.begin(), votes.end(), pair_index,
                                   [](const auto& entry, std::size_t idx) { return entry.first < idx; });
  if (it == votes.end() || it->first != pair_index) return std::nullopt;
  return it->second;
}

namespace {

struct Side {
  const Schema& schema;
  const std::vector<std::size_t>& picks;
  const char* key;
};

// Resolves the attribute an entry names on one side. Returns nullopt and
// records a diagnostic when it cannot.
std::optional<std::size_t> resolve(const json& entry, const Side& side, std::vector<std::string>& diags) {
  const auto it = entry.find(side.key);
  if (it == entry.end() || it->is_null()) {
    if (side.picks.size() == 1) return side.picks.front();
    diags.push_back(std::string("entry without a ") + side.key + " attribute dropped");
    return std::nullopt;
  }
  if (!it->is_string()) {
    diags.push_back(std::string("entry with a non-string ") + side.key + " dropped");
    return std::nullopt;
  }
  const auto name = it->get<std::string>();
  const auto pos = side.schema.find(name);
  if (!pos) {
    diags.push_back(std::string("unknown ") + side.key + " attribute '" + name + "' dropped");
    return std::nullopt;
  }
  if (std::find(side.picks.begin(), side.picks.end(), *pos) == side.picks.end()) {
    diags.push_back(std::string(side.key) + " attribute '" + name + "' was not asked about; dropped");
    return std::nullopt;
  }
  return *pos;
}

VoteValue answer_of(const json& entry, std::vector<std::string>& diags) {
  const auto it = entry.find("answer");
  if (it == entry.end()) {
    diags.push_back("entry without an answer treated as unknown");
    return VoteValue::Unknown;
  }
  if (it->is_string()) {
    if (auto v = parse_vote(it->get_ref<const std::string&>())) return *v;
    diags.push_back("off-scale answer '" + it->get<std::string>() + "' treated as unknown");
    return VoteValue::Unknown;
  }
  diags.push_back("non-string answer treated as unknown");
  return VoteValue::Unknown;
}

std::vector<json> entries_of(const json& value, const PromptJob& job, std::vector<std::string>& diags) {
  std::vector<json> out;
  auto from_array = [&](const json& arr) {
    for (const auto& e : arr) out.push_back(e);
  };
  if (value.is_array()) {
    from_array(value);
    return out;
  }
  if (!value.is_object()) {
    diags.push_back("response payload is neither an object nor an array");
    return out;
  }
  if (const auto it = value.find("matches"); it != value.end()) {
    if (it->is_array()) {
      from_array(*it);
    } else if (it->is_object()) {
      // {"matches": {"name": "yes", ...}} keyed by the side that varies.
      const char* key = job.source_attrs.size() == 1 ? "target" : "source";
      for (const auto& item : it->items()) out.push_back({{key, item.key()}, {"answer", item.value()}});
    } else {
      diags.push_back("'matches' is neither a list nor an object");
    }
    return out;
  }
  if (value.contains("answer")) {
    out.push_back(value);
    return out;
  }
  diags.push_back("response contains no answers");
  return out;
}

}  // namespace

VoteSet to_votes(const json& value, const PromptJob& job, const Dataset& d) {
  VoteSet out;
  out.dataset_id = d.id;
  const auto expected = expected_pair_indices(job, d);
  std::map<std::size_t, VoteValue> found;

  const Side src{d.source, job.source_attrs, "source"};
  const Side tgt{d.target, job.target_attrs, "target"};
  for (const auto& entry : entries_of(value, job, out.diagnostics)) {
    if (!entry.is_object()) {
      out.diagnostics.push_back("non-object entry dropped");
      continue;
    }
    const auto s = resolve(entry, src, out.diagnostics);
    const auto t = resolve(entry, tgt, out.diagnostics);
    if (!s || !t) continue;
    const auto idx = d.pair_index(*s, *t);
    const auto vote = answer_of(entry, out.diagnostics);
    if (!found.insert_or_assign(idx, vote).second) {
      const auto p = d.pair_at(idx);
      out.diagnostics.push_back("duplicate entry for (" + p.source + ", " + p.target + "); last one kept");
    }
  }

  out.votes.reserve(expected.size());
  for (auto idx : expected) {
    const auto it = found.find(idx);
    out.votes.emplace_back(idx, it == found.end() ? VoteValue::Unknown : it->second);
  }
  std::sort(out.votes.begin(), out.votes.end());
  return out;
}

VoteSet parse_response(std::string_view text, const PromptJob& job, const Dataset& d) {
  auto extraction = extract_json(text);
  if (extraction.ok()) return to_votes(extraction.value, job, d);
  VoteSet out = to_votes(json::object(), job, d);
  out.diagnostics.clear();
  out.diagnostics.push_back(extraction.status == ExtractStatus::NoJsonFound
                                ? "no JSON found; all pairs unknown"
                                : "malformed JSON; all pairs unknown");
  return out;
}

VoteValue majority(std::span<const VoteValue> votes) noexcept {
  std::size_t yes = 0;
  std::size_t no = 0;
  for (auto v : votes) {
    if (v == VoteValue::Yes) ++yes;
    if (v == VoteValue::No) ++no;
  }
  if (2 * yes > votes.size()) return VoteValue::Yes;
  if (2 * no > votes.size()) return VoteValue::No;
  return VoteValue::Unknown;
}

VoteValue majority(VoteValue a, VoteValue b, VoteValue c) noexcept {
  const VoteValue votes[] = {a, b, c};
  return majority(std::span<const VoteValue>(votes));
}

json to_json(const VoteSet& v, const Dataset& d) {
  json votes = json::array();
  for (const auto& [idx, vote] : v.votes) {
    const auto p = d.pair_at(idx);
    votes.push_back({p.source, p.target, std::string(to_string(vote))});
  }
  return {{"dataset", v.dataset_id},
          {"run", v.key.run},
          {"vote", v.key.vote},
          {"job", v.key.job},
          {"votes", votes},
          {"diagnostics", v.diagnostics}};
}

}  // namespace matchbench
