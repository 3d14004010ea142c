#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "codegrag/problem.hpp"

namespace codegrag {

enum class FailureKind { none, compile_or_parse, runtime_error, wrong_answer, timeout };

std::string_view to_string(FailureKind kind);

struct SandboxLimits {
  double timeout_seconds = 10.0;
  double compile_timeout_seconds = 120.0;
  std::size_t memory_bytes = std::size_t{2} << 30;  // address-space cap of the test process; 0 disables
  std::string cxx = "g++";
  std::string python = "python3";
};

struct TestOutcome {
  bool passed = false;
  FailureKind failure = FailureKind::none;
  std::string detail;  // tail of stderr or the reason
  double seconds = 0.0;
};

/// The solution alone, without tests: prompt + completion, or the prompt's
/// header lines + completion when the completion already holds the whole
/// function.
std::string assemble_solution(const std::string& completion, const Problem& problem);
/// Solution followed by the test scaffold.
std::string assemble_program(const std::string& completion, const Problem& problem);

/// Runs `completion` against the problem's tests in a child process group.
/// Throws SandboxFailure when the toolchain itself is missing or broken.
TestOutcome run_tests(const std::string& completion, const Problem& problem, const SandboxLimits& limits = {});

struct EvalRow {
  std::string task_id;
  bool passed = false;
  FailureKind failure = FailureKind::none;
  bool extraction_ok = false;
  std::string detail;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double pass_at_1 = 0.0;
  double extraction_rate = 0.0;
  std::map<std::string, std::size_t> counts;
};

double pass_at_1(const std::vector<EvalRow>& rows);

/// Fraction of codes from which at least one function graph is extracted.
double extraction_rate(const std::vector<std::string>& codes, Language language);

/// Evaluates one completion per problem (keyed by task_id). Problems run
/// on `jobs` worker threads; rows come back ordered by task_id.
EvalReport evaluate(const std::vector<Problem>& problems, const std::map<std::string, std::string>& completions,
                    const SandboxLimits& limits = {}, int jobs = 1);

/// Recomputes pass_at_1, extraction_rate and counts from rows.
void finalize_report(EvalReport& report);

std::string report_to_json(const EvalReport& report);

/// Reads {task_id, completion} (or "generation") records.
std::map<std::string, std::string> load_generations(const std::string& path);

}  // namespace codegrag
