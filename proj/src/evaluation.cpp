#include "codegrag/evaluation.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include "codegrag/syntax_graph.hpp"
#include "json.hpp"

namespace codegrag {

namespace fs = std::filesystem;

namespace {

struct ProcessResult {
  bool timed_out = false;
  int exit_code = -1;
  int signal = 0;
  std::string err;
  double seconds = 0.0;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::SandboxFailure, "cannot write " + p.string());
}

std::string tail(const std::string& s, std::size_t n = 600) { return s.size() <= n ? s : s.substr(s.size() - n); }

bool on_path(const std::string& tool) {
  if (tool.find('/') != std::string::npos) return access(tool.c_str(), X_OK) == 0;
  const char* path = std::getenv("PATH");
  if (!path) return false;
  std::stringstream ss(path);
  for (std::string dir; std::getline(ss, dir, ':');) {
    if (dir.empty()) continue;
    if (access((fs::path(dir) / tool).c_str(), X_OK) == 0) return true;
  }
  return false;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "codegrag-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw Error(ErrorCode::SandboxFailure, std::string("mkdtemp: ") + std::strerror(errno));
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Runs argv in its own process group; the whole group is killed at the deadline.
ProcessResult run_process(const std::vector<std::string>& argv, const fs::path& workdir, double timeout_seconds,
                          std::size_t memory_bytes) {
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  const std::string err_path = (workdir / "stderr.txt").string();
  const std::string out_path = (workdir / "stdout.txt").string();
  const std::string dir = workdir.string();
  int exec_pipe[2];
  if (pipe2(exec_pipe, O_CLOEXEC) != 0) throw Error(ErrorCode::SandboxFailure, "pipe failed");
  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = fork();
  if (pid < 0) {
    close(exec_pipe[0]);
    close(exec_pipe[1]);
    throw Error(ErrorCode::SandboxFailure, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    setpgid(0, 0);
    const int in = open("/dev/null", O_RDONLY);
    const int out = open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    const int err = open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    if (in >= 0) dup2(in, 0);
    if (out >= 0) dup2(out, 1);
    if (err >= 0) dup2(err, 2);
    if (chdir(dir.c_str()) != 0) _exit(126);
    if (memory_bytes > 0) {
      rlimit lim{memory_bytes, memory_bytes};
      setrlimit(RLIMIT_AS, &lim);
    }
    rlimit core{0, 0};
    setrlimit(RLIMIT_CORE, &core);
    execvp(args[0], args.data());
    const int code = errno;
    [[maybe_unused]] const auto n = write(exec_pipe[1], &code, sizeof code);
    _exit(127);
  }
  setpgid(pid, pid);
  close(exec_pipe[1]);
  ProcessResult r;
  int status = 0;
  const auto deadline = start + std::chrono::duration<double>(timeout_seconds);
  for (;;) {
    const pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (std::chrono::steady_clock::now() >= deadline) {
      r.timed_out = true;
      kill(-pid, SIGKILL);
      waitpid(pid, &status, 0);
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  kill(-pid, SIGKILL);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  int exec_errno = 0;
  const auto got = read(exec_pipe[0], &exec_errno, sizeof exec_errno);
  close(exec_pipe[0]);
  if (got == static_cast<ssize_t>(sizeof exec_errno))
    throw Error(ErrorCode::SandboxFailure, "cannot execute " + argv.front() + ": " + std::strerror(exec_errno));
  if (WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
  if (WIFSIGNALED(status)) r.signal = WTERMSIG(status);
  r.err = read_file(err_path);
  return r;
}

// Start of the line on which `entry` is defined, or npos.
std::size_t definition_start(const std::string& code, const std::string& entry, Language lang) {
  if (entry.empty()) return std::string::npos;
  const std::regex pattern = lang == Language::python
                                 ? std::regex("(^|\\n)[ \\t]*(async[ \\t]+)?def[ \\t]+" + entry + "[ \\t]*\\(")
                                 : std::regex("(^|\\n)[^\\n;{}]*\\b" + entry + "[ \\t]*\\([^;{}]*\\)[ \\t\\n]*(const[ \\t\\n]*)?\\{");
  std::smatch m;
  if (!std::regex_search(code, m, pattern)) return std::string::npos;
  const auto pos = static_cast<std::size_t>(m.position(0));
  return m[1].length() > 0 ? pos + 1 : pos;
}

bool has_top_level_check(const std::string& test) {
  std::stringstream ss(test);
  for (std::string line; std::getline(ss, line);) {
    if (line.rfind("check(", 0) == 0) return true;
  }
  return false;
}

std::string last_line(const std::string& s) {
  const std::string t = trim(s);
  const auto nl = t.rfind('\n');
  return nl == std::string::npos ? t : t.substr(nl + 1);
}

}  // namespace

std::string_view to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::none: return "none";
    case FailureKind::compile_or_parse: return "compile_or_parse";
    case FailureKind::runtime_error: return "runtime_error";
    case FailureKind::wrong_answer: return "wrong_answer";
    case FailureKind::timeout: return "timeout";
  }
  return "unknown";
}

std::string assemble_solution(const std::string& completion, const Problem& problem) {
  const std::string entry = entry_point_of(problem);
  if (definition_start(completion, entry, problem.language) != std::string::npos) {
    const auto cut = definition_start(problem.prompt, entry, problem.language);
    const std::string header = cut == std::string::npos ? std::string() : problem.prompt.substr(0, cut);
    return header + completion;
  }
  return problem.prompt + completion;
}

std::string assemble_program(const std::string& completion, const Problem& problem) {
  std::string program = assemble_solution(completion, problem) + "\n" + problem.test + "\n";
  if (problem.language == Language::python && !has_top_level_check(problem.test))
    program += "check(" + entry_point_of(problem) + ")\n";
  return program;
}

TestOutcome run_tests(const std::string& completion, const Problem& problem, const SandboxLimits& limits) {
  const std::string tool = problem.language == Language::cpp ? limits.cxx : limits.python;
  if (!on_path(tool)) throw Error(ErrorCode::SandboxFailure, "toolchain '" + tool + "' not found on PATH");
  TempDir dir;
  TestOutcome outcome;
  const std::string program = assemble_program(completion, problem);
  if (problem.language == Language::cpp) {
    write_file(dir.path() / "main.cpp", program);
    const auto build = run_process({tool, "-std=c++17", "-O1", "-w", "-o", "main", "main.cpp"}, dir.path(),
                                   limits.compile_timeout_seconds, 0);
    if (build.timed_out || build.exit_code != 0) {
      outcome.failure = FailureKind::compile_or_parse;
      outcome.detail = build.timed_out ? "compiler timed out" : tail(build.err);
      outcome.seconds = build.seconds;
      return outcome;
    }
    const auto run = run_process({(dir.path() / "main").string()}, dir.path(), limits.timeout_seconds,
                                 limits.memory_bytes);
    outcome.seconds = run.seconds;
    outcome.detail = tail(run.err);
    if (run.timed_out) {
      outcome.failure = FailureKind::timeout;
      outcome.detail = "killed after " + std::to_string(limits.timeout_seconds) + " s";
    } else if (run.signal == 0 && run.exit_code == 0) {
      outcome.passed = true;
    } else if (run.signal == SIGABRT && run.err.find("Assertion") != std::string::npos) {
      outcome.failure = FailureKind::wrong_answer;
    } else {
      outcome.failure = FailureKind::runtime_error;
    }
    return outcome;
  }
  write_file(dir.path() / "main.py", program);
  const auto run = run_process({tool, "main.py"}, dir.path(), limits.timeout_seconds, limits.memory_bytes);
  outcome.seconds = run.seconds;
  outcome.detail = tail(run.err);
  if (run.timed_out) {
    outcome.failure = FailureKind::timeout;
    outcome.detail = "killed after " + std::to_string(limits.timeout_seconds) + " s";
    return outcome;
  }
  if (run.signal == 0 && run.exit_code == 0) {
    outcome.passed = true;
    return outcome;
  }
  const std::string last = last_line(run.err);
  if (last.rfind("SyntaxError", 0) == 0 || last.rfind("IndentationError", 0) == 0 || last.rfind("TabError", 0) == 0)
    outcome.failure = FailureKind::compile_or_parse;
  else if (last.rfind("AssertionError", 0) == 0)
    outcome.failure = FailureKind::wrong_answer;
  else
    outcome.failure = FailureKind::runtime_error;
  return outcome;
}

double pass_at_1(const std::vector<EvalRow>& rows) {
  if (rows.empty()) return 0.0;
  const auto passed = std::count_if(rows.begin(), rows.end(), [](const EvalRow& r) { return r.passed; });
  return static_cast<double>(passed) / static_cast<double>(rows.size());
}

double extraction_rate(const std::vector<std::string>& codes, Language language) {
  if (codes.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& code : codes) {
    try {
      extract_graph(SourceUnit{code, language, std::nullopt});
      ++ok;
    } catch (const Error& ex) {
      if (ex.code() != ErrorCode::ExtractionFailed) throw;
    }
  }
  return static_cast<double>(ok) / static_cast<double>(codes.size());
}

void finalize_report(EvalReport& report) {
  report.pass_at_1 = pass_at_1(report.rows);
  std::size_t extracted = 0;
  report.counts.clear();
  report.counts["total"] = report.rows.size();
  report.counts["passed"] = 0;
  report.counts["extraction_ok"] = 0;
  for (FailureKind k : {FailureKind::compile_or_parse, FailureKind::runtime_error, FailureKind::wrong_answer,
                        FailureKind::timeout})
    report.counts[std::string(to_string(k))] = 0;
  for (const auto& r : report.rows) {
    if (r.passed) ++report.counts["passed"];
    else ++report.counts[std::string(to_string(r.failure))];
    if (r.extraction_ok) ++extracted;
  }
  report.counts["extraction_ok"] = extracted;
  report.extraction_rate = report.rows.empty() ? 0.0 : static_cast<double>(extracted) / report.rows.size();
}

EvalReport evaluate(const std::vector<Problem>& problems, const std::map<std::string, std::string>& completions,
                    const SandboxLimits& limits, int jobs) {
  EvalReport report;
  report.rows.resize(problems.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < problems.size();) {
      const Problem& p = problems[i];
      EvalRow& row = report.rows[i];
      row.task_id = p.task_id;
      try {
        const auto it = completions.find(p.task_id);
        const std::string completion = it == completions.end() ? std::string() : it->second;
        const auto outcome = run_tests(completion, p, limits);
        row.passed = outcome.passed;
        row.failure = outcome.failure;
        row.detail = it == completions.end() ? "no generation" : outcome.detail;
        row.extraction_ok = extraction_rate({assemble_solution(completion, p)}, p.language) == 1.0;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(problems.size())));
  std::vector<std::thread> threads;
  for (int t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  std::sort(report.rows.begin(), report.rows.end(),
            [](const EvalRow& a, const EvalRow& b) { return task_id_less(a.task_id, b.task_id); });
  finalize_report(report);
  return report;
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["pass_at_1"] = report.pass_at_1;
  j["extraction_rate"] = report.extraction_rate;
  j["counts"] = report.counts;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"task_id", r.task_id},
                    {"passed", r.passed},
                    {"failure_kind", std::string(to_string(r.failure))},
                    {"extraction_ok", r.extraction_ok},
                    {"detail", r.detail}});
  }
  j["rows"] = std::move(rows);
  return j.dump(2);
}

std::map<std::string, std::string> load_generations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read generations " + path);
  std::map<std::string, std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const std::string id = j.at("task_id").get<std::string>();
      if (j.contains("completion")) out[id] = j.at("completion").get<std::string>();
      else out[id] = j.at("generation").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::IoFailure, std::string("malformed generation record: ") + ex.what());
    }
  }
  return out;
}

}  // namespace codegrag
