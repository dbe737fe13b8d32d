#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "matchbench/benchmark.hpp"

namespace matchbench {

// How much schema context one prompt carries.
enum class TaskScope { OneToOne, OneToN, NToOne, NToM };

inline constexpr TaskScope kAllScopes[] = {TaskScope::OneToOne, TaskScope::OneToN, TaskScope::NToOne,
                                           TaskScope::NToM};

// "1-to-1", "1-to-N", "N-to-1", "N-to-M".
std::string_view scope_name(TaskScope s) noexcept;
// Also accepts the short forms "1-1", "1-N", ... case-insensitively.
// Throws Error{InvalidArgument}.
TaskScope parse_scope(std::string_view name);

struct PromptJob {
  std::string dataset_id;
  TaskScope scope = TaskScope::OneToOne;
  std::vector<std::size_t> source_attrs;  // positions in the source schema
  std::vector<std::size_t> target_attrs;  // positions in the target schema
  std::size_t job_index = 0;
};

// Jobs in schema attribute order: |S|·|T| jobs for 1-to-1, |S| for 1-to-N,
// |T| for N-to-1 and one for N-to-M.
std::vector<PromptJob> build_jobs(const Dataset& d, TaskScope scope);

// Cartesian product of the job's attributes, as dense pair indices of `d`.
std::vector<std::size_t> expected_pair_indices(const PromptJob& job, const Dataset& d);
std::vector<AttributePair> expected_pairs(const PromptJob& job, const Dataset& d);

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

// Prompt wording with {{placeholders}}. The body becomes the user message;
// a non-empty system part becomes a leading system message.
struct PromptTemplate {
  std::string system;
  std::string body;
  std::string definition;

  static constexpr std::string_view kUserMarker = "@@user@@";

  static PromptTemplate default_template();
  // Text before a line reading "@@user@@" is the system message. Throws
  // Error{TemplateError} on unknown or missing placeholders.
  static PromptTemplate from_text(std::string_view text);
  static PromptTemplate load(const std::filesystem::path& path);
};

// The scope-specific task sentence plus the JSON answer format.
std::string output_schema(TaskScope scope);

std::string render(const PromptJob& job, const Benchmark& b, const PromptTemplate& tpl);
std::vector<ChatMessage> render_messages(const PromptJob& job, const Benchmark& b,
                                         const PromptTemplate& tpl);

}  // namespace matchbench
