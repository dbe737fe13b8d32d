#include "matchbench/prompt.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "matchbench/error.hpp"

namespace matchbench {

std::string_view scope_name(TaskScope s) noexcept {
  switch (s) {
    case TaskScope::OneToOne: return "1-to-1";
    case TaskScope::OneToN: return "1-to-N";
    case TaskScope::NToOne: return "N-to-1";
    case TaskScope::NToM: return "N-to-M";
  }
  return "?";
}

TaskScope parse_scope(std::string_view name) {
  std::string key = fold_case(name);
  std::replace(key.begin(), key.end(), '_', '-');
  if (key == "one-to-one") key = "1-to-1";
  if (key == "one-to-n") key = "1-to-n";
  if (key == "n-to-one") key = "n-to-1";
  for (auto s : kAllScopes) {
    const auto full = fold_case(scope_name(s));
    std::string shortform = full;
    shortform.erase(shortform.find("-to"), 3);
    if (key == full || key == shortform) return s;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown task scope '" + std::string(name) + "'");
}

std::vector<PromptJob> build_jobs(const Dataset& d, TaskScope scope) {
  std::vector<std::size_t> all_src(d.source.size());
  std::vector<std::size_t> all_tgt(d.target.size());
  for (std::size_t i = 0; i < all_src.size(); ++i) all_src[i] = i;
  for (std::size_t i = 0; i < all_tgt.size(); ++i) all_tgt[i] = i;

  std::vector<PromptJob> jobs;
  auto add = [&](std::vector<std::size_t> src, std::vector<std::size_t> tgt) {
    jobs.push_back({d.id, scope, std::move(src), std::move(tgt), jobs.size()});
  };
  switch (scope) {
    case TaskScope::OneToOne:
      for (auto s : all_src)
        for (auto t : all_tgt) add({s}, {t});
      break;
    case TaskScope::OneToN:
      for (auto s : all_src) add({s}, all_tgt);
      break;
    case TaskScope::NToOne:
      for (auto t : all_tgt) add(all_src, {t});
      break;
    case TaskScope::NToM:
      add(all_src, all_tgt);
      break;
  }
  return jobs;
}

std::vector<std::size_t> expected_pair_indices(const PromptJob& job, const Dataset& d) {
  std::vector<std::size_t> out;
  out.reserve(job.source_attrs.size() * job.target_attrs.size());
  for (auto s : job.source_attrs)
    for (auto t : job.target_attrs) out.push_back(d.pair_index(s, t));
  return out;
}

std::vector<AttributePair> expected_pairs(const PromptJob& job, const Dataset& d) {
  std::vector<AttributePair> out;
  for (auto idx : expected_pair_indices(job, d)) out.push_back(d.pair_at(idx));
  return out;
}

namespace {

constexpr std::string_view kDefinition =
    "Two attributes correspond one-to-one when each value of one can be translated into exactly "
    "one value of the other and back again, without information being lost in either direction.";

constexpr std::string_view kDefaultBody =
    R"(You are an expert in relational databases and health data integration. Act as a schema matcher: your job is to decide which attributes of a source table correspond to attributes of a target table.
{{definition}}

Source information
Table: {{source_table}}
Description: {{source_description}}
Attributes:
{{source_attributes}}

Target information
Table: {{target_table}}
Description: {{target_description}}
Attributes:
{{target_attributes}}

Task description
{{output_schema}}
Use "yes" if the pair is a valid 1:1 match, "no" if it is not, and "unknown" if there is not enough information to decide. Lets think step by step. Explain your reasoning first, then give the final answer as a single JSON code block.
)";

const std::set<std::string, std::less<>> kPlaceholders = {
    "source_table",       "source_description", "source_attributes", "target_table",
    "target_description", "target_attributes",  "definition",        "output_schema"};

// Calls `visit(name)` for each {{name}} and returns the text with every
// placeholder replaced by `visit`'s result.
template <class F>
std::string substitute(std::string_view text, F&& visit) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = text.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    out.append(visit(text.substr(open + 2, close - open - 2)));
    pos = close + 2;
  }
  out.append(text.substr(pos));
  return out;
}

void check_placeholders(const PromptTemplate& tpl) {
  std::set<std::string, std::less<>> seen;
  auto collect = [&](std::string_view name) -> std::string {
    if (!kPlaceholders.count(name))
      throw Error(ErrorKind::TemplateError, "unknown placeholder {{" + std::string(name) + "}}");
    seen.emplace(name);
    return {};
  };
  substitute(tpl.system, collect);
  substitute(tpl.body, collect);
  for (const auto& name : kPlaceholders)
    if (!seen.count(name)) throw Error(ErrorKind::TemplateError, "missing placeholder {{" + name + "}}");
}

std::string describe(std::string_view text) {
  return text.empty() ? std::string("(no description)") : std::string(text);
}

std::string serialize_attributes(const Schema& schema, const std::vector<std::size_t>& picks) {
  std::string out;
  for (auto i : picks) {
    const auto& a = schema.attributes.at(i);
    out += "- " + a.name + ": " + describe(a.description) + "\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

}  // namespace

PromptTemplate PromptTemplate::default_template() {
  PromptTemplate tpl{{}, std::string(kDefaultBody), std::string(kDefinition)};
  return tpl;
}

PromptTemplate PromptTemplate::from_text(std::string_view text) {
  PromptTemplate tpl;
  tpl.definition = std::string(kDefinition);
  std::size_t marker = std::string_view::npos;
  for (std::size_t pos = 0; pos <= text.size();) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    auto line = text.substr(pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line == kUserMarker) {
      marker = pos;
      tpl.system = std::string(text.substr(0, pos));
      tpl.body = std::string(text.substr(std::min(eol + 1, text.size())));
      break;
    }
    pos = eol + 1;
  }
  if (marker == std::string_view::npos) tpl.body = std::string(text);
  while (!tpl.system.empty() && (tpl.system.back() == '\n' || tpl.system.back() == '\r'))
    tpl.system.pop_back();
  check_placeholders(tpl);
  return tpl;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::TemplateError, "cannot open template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

std::string output_schema(TaskScope scope) {
  switch (scope) {
    case TaskScope::OneToOne:
      return "Decide whether the source attribute and the target attribute form a valid 1:1 match.\n"
             "Answer with JSON of the form {\"answer\": \"yes|no|unknown\"}.";
    case TaskScope::OneToN:
      return "For every target attribute, decide whether it forms a valid 1:1 match with the source "
             "attribute.\n"
             "Answer with JSON of the form {\"matches\": [{\"target\": \"<target attribute name>\", "
             "\"answer\": \"yes|no|unknown\"}, ...]} listing each target attribute.";
    case TaskScope::NToOne:
      return "For every source attribute, decide whether it forms a valid 1:1 match with the target "
             "attribute.\n"
             "Answer with JSON of the form {\"matches\": [{\"source\": \"<source attribute name>\", "
             "\"answer\": \"yes|no|unknown\"}, ...]} listing each source attribute.";
    case TaskScope::NToM:
      return "For every pair of a source attribute and a target attribute, decide whether the pair "
             "forms a valid 1:1 match.\n"
             "Answer with JSON of the form {\"matches\": [{\"source\": \"<source attribute name>\", "
             "\"target\": \"<target attribute name>\", \"answer\": \"yes|no|unknown\"}, ...]} listing "
             "each pair.";
  }
  return {};
}

namespace {

std::map<std::string, std::string, std::less<>> bindings(const PromptJob& job, const Benchmark& b,
                                                         const PromptTemplate& tpl) {
  const auto& d = b.dataset(job.dataset_id);
  for (auto s : job.source_attrs)
    if (s >= d.source.size()) throw Error(ErrorKind::InvalidArgument, "job names a missing source attribute");
  for (auto t : job.target_attrs)
    if (t >= d.target.size()) throw Error(ErrorKind::InvalidArgument, "job names a missing target attribute");
  return {
      {"source_table", d.source.table_name},
      {"source_description", describe(d.source.table_description)},
      {"source_attributes", serialize_attributes(d.source, job.source_attrs)},
      {"target_table", d.target.table_name},
      {"target_description", describe(d.target.table_description)},
      {"target_attributes", serialize_attributes(d.target, job.target_attrs)},
      {"definition", tpl.definition},
      {"output_schema", output_schema(job.scope)},
  };
}

std::string fill(std::string_view text, const std::map<std::string, std::string, std::less<>>& values) {
  return substitute(text, [&](std::string_view name) -> std::string {
    const auto it = values.find(name);
    if (it == values.end())
      throw Error(ErrorKind::TemplateError, "unknown placeholder {{" + std::string(name) + "}}");
    return it->second;
  });
}

}  // namespace

std::string render(const PromptJob& job, const Benchmark& b, const PromptTemplate& tpl) {
  return fill(tpl.body, bindings(job, b, tpl));
}

std::vector<ChatMessage> render_messages(const PromptJob& job, const Benchmark& b,
                                         const PromptTemplate& tpl) {
  const auto values = bindings(job, b, tpl);
  std::vector<ChatMessage> out;
  if (!tpl.system.empty()) out.push_back({"system", fill(tpl.system, values)});
  out.push_back({"user", fill(tpl.body, values)});
  return out;
}

}  // namespace matchbench
