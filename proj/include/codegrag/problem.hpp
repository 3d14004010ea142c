#pragma once

#include <optional>
#include <string>
#include <vector>

#include "codegrag/syntax_graph.hpp"

namespace codegrag {

/// One HumanEval-X record.
struct Problem {
  std::string task_id;
  std::string prompt;
  std::string declaration;
  std::string canonical_solution;
  std::string test;
  std::string entry_point;
  Language language = Language::cpp;
};

/// Reads line-delimited HumanEval-X records. The language comes from the
/// task_id prefix ("CPP/", "Python/") unless `language` is given.
std::vector<Problem> load_problems(const std::string& path, std::optional<Language> language = std::nullopt);
Problem problem_from_json_line(const std::string& line, std::optional<Language> language = std::nullopt);

/// Natural-language part of the prompt: the leading block comment (C++) or
/// the docstring (Python), dedented and trimmed. Empty when absent.
std::string problem_description(const Problem& p);

/// The function signature without includes, imports or docstring.
std::string problem_signature(const Problem& p);

/// Entry point name: explicit field, else parsed from the signature.
std::string entry_point_of(const Problem& p);

/// Key used to keep evaluation problems out of the retrieval pool: the
/// task_id suffix after the last '/'.
std::string task_key(const std::string& task_id);

/// Orders task ids by prefix, then numerically by the trailing number.
bool task_id_less(const std::string& a, const std::string& b);

std::string trim(const std::string& s);

}  // namespace codegrag
