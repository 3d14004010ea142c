#include <cstdlib>
#include <set>
#include <string>

#include "codegrag/generation.hpp"
#include "codegrag/knowledge_base.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"

using namespace codegrag;
using codegrag::testing::fixture_path;
using codegrag::testing::MockLlmServer;

namespace {

KnowledgeEntry fixture_entry(std::size_t index) {
  const auto corpus = load_corpus(fixture_path("kb_corpus.jsonl"));
  KbBuildOptions opts;
  const auto kb = build_kb(corpus, opts);
  return kb.entries.at(index);
}

Problem first_problem() { return load_problems(fixture_path("problems_cpp.jsonl")).at(0); }

GenerationConfig config_for(const MockLlmServer& server, RagMode mode = RagMode::none) {
  GenerationConfig cfg;
  cfg.endpoint = server.endpoint();
  cfg.mode = mode;
  cfg.timeout_seconds = 5;
  return cfg;
}

ErrorCode code_of(const std::function<void()>& f, std::string* message = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::UsageError;
}

}  // namespace

TEST_CASE("mode names") {
  CHECK(parse_rag_mode("graph-rag") == RagMode::graph_rag);
  CHECK(parse_rag_mode("Cross_Lingual_Code_RAG") == RagMode::cross_lingual_code_rag);
  for (auto m : {RagMode::none, RagMode::code_rag, RagMode::graph_rag, RagMode::cross_lingual_code_rag,
                 RagMode::cross_lingual_graph_rag})
    CHECK(parse_rag_mode(to_string(m)) == m);
  CHECK(code_of([] { parse_rag_mode("magic"); }) == ErrorCode::UsageError);
  CHECK(pool_language(RagMode::graph_rag, Language::cpp) == Language::cpp);
  CHECK(pool_language(RagMode::cross_lingual_graph_rag, Language::cpp) == Language::python);
  CHECK(pool_language(RagMode::cross_lingual_code_rag, Language::python) == Language::cpp);
  CHECK(uses_graph(RagMode::cross_lingual_graph_rag));
  CHECK_FALSE(uses_graph(RagMode::code_rag));
}

TEST_CASE("prompt sections appear in order and parse back") {
  const auto problem = first_problem();
  const auto entry = fixture_entry(0);
  GenerationConfig cfg;
  cfg.mode = RagMode::graph_rag;
  const auto b = assemble_prompt(problem, &entry, cfg);
  const auto s = b.rendered.find(kSystemDelimiter);
  const auto k = b.rendered.find(kKnowledgeDelimiter);
  const auto p = b.rendered.find(kProblemDelimiter);
  CHECK(s == 0);
  CHECK(s < k);
  CHECK(k < p);
  CHECK(b.knowledge_text.find(summarize_graph(entry.graph, cfg.variant).text) != std::string::npos);
  CHECK(b.problem_text.find("int add_two(int a, int b){") != std::string::npos);

  const auto back = parse_prompt(b.rendered);
  CHECK(back.system_text == b.system_text);
  CHECK(back.knowledge_text == b.knowledge_text);
  CHECK(back.problem_text == b.problem_text);

  cfg.mode = RagMode::code_rag;
  const auto code = assemble_prompt(problem, &entry, cfg);
  CHECK(code.knowledge_text.find(entry.code.substr(0, 20)) != std::string::npos);
  CHECK(parse_prompt(code.rendered).knowledge_text == code.knowledge_text);
}

TEST_CASE("baseline prompts carry no knowledge") {
  GenerationConfig cfg;
  const auto b = assemble_prompt(first_problem(), nullptr, cfg);
  CHECK(b.knowledge_text.empty());
  CHECK(b.rendered.find(kKnowledgeDelimiter) == std::string::npos);
  CHECK(parse_prompt(b.rendered).knowledge_text.empty());
  cfg.mode = RagMode::code_rag;
  CHECK(code_of([&] { assemble_prompt(first_problem(), nullptr, cfg); }) == ErrorCode::MissingKnowledge);
  CHECK(code_of([] { parse_prompt("no delimiters here"); }) == ErrorCode::UsageError);
}

TEST_CASE("summary variants give distinct knowledge sections") {
  const auto problem = first_problem();
  const auto entry = fixture_entry(2);
  GenerationConfig cfg;
  cfg.mode = RagMode::graph_rag;
  std::set<std::string> seen;
  for (auto v : {SummaryVariant::edge_type_only, SummaryVariant::edge_type_node_name,
                 SummaryVariant::edge_type_node_type, SummaryVariant::edge_type_topological}) {
    cfg.variant = v;
    const auto a = assemble_prompt(problem, &entry, cfg);
    const auto b = assemble_prompt(problem, &entry, cfg);
    CHECK(a.rendered == b.rendered);
    seen.insert(a.knowledge_text);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("chat request body") {
  GenerationConfig cfg;
  cfg.mode = RagMode::code_rag;
  cfg.model = "test-model";
  const auto entry = fixture_entry(1);
  const auto b = assemble_prompt(first_problem(), &entry, cfg);
  const auto j = nlohmann::json::parse(chat_request_body(b, cfg));
  CHECK(j.at("model") == "test-model");
  CHECK(j.at("temperature") == 0.0);
  CHECK(j.at("max_tokens") == 1024);
  REQUIRE(j.at("messages").size() == 2);
  CHECK(j.at("messages")[0].at("role") == "system");
  CHECK(j.at("messages")[0].at("content") == b.system_text);
  CHECK(j.at("messages")[1].at("role") == "user");
  const std::string user = j.at("messages")[1].at("content");
  CHECK(user.find(b.knowledge_text) < user.find(b.problem_text));
}

TEST_CASE("completions come back from the endpoint with a bearer key") {
  MockLlmServer server([](const std::string&) { return std::string("```cpp\nint x;\n```"); });
  ::setenv("CODEGRAG_TEST_KEY", "sk-test", 1);
  auto cfg = config_for(server);
  cfg.api_key_env = "CODEGRAG_TEST_KEY";
  const auto b = assemble_prompt(first_problem(), nullptr, cfg);
  CHECK(generate(b, cfg) == "```cpp\nint x;\n```");
  CHECK(server.calls == 1);
  CHECK(server.authorization.at(0) == "Bearer sk-test");
  ::unsetenv("CODEGRAG_TEST_KEY");
  generate(b, cfg);
  CHECK(server.authorization.at(1).empty());
}

TEST_CASE("transient failures are retried") {
  MockLlmServer server([](const std::string&) { return std::string("ok"); });
  server.statuses = {503, 429};
  auto cfg = config_for(server);
  cfg.retries = 2;
  const auto b = assemble_prompt(first_problem(), nullptr, cfg);
  CHECK(generate(b, cfg) == "ok");
  CHECK(server.calls == 3);

  server.statuses = {500, 502, 503};
  std::string msg;
  CHECK(code_of([&] { generate(b, cfg); }, &msg) == ErrorCode::LlmUnavailable);
  CHECK(msg.find("attempts=3") != std::string::npos);
  CHECK(server.calls == 6);

  server.statuses = {400};
  CHECK(code_of([&] { generate(b, cfg); }, &msg) == ErrorCode::LlmUnavailable);
  CHECK(msg.find("attempts=1") != std::string::npos);
  CHECK(server.calls == 7);
}

TEST_CASE("unreachable endpoints and empty completions") {
  GenerationConfig cfg;
  cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  cfg.timeout_seconds = 2;
  cfg.retries = 1;
  const auto b = assemble_prompt(first_problem(), nullptr, cfg);
  std::string msg;
  CHECK(code_of([&] { generate(b, cfg); }, &msg) == ErrorCode::LlmUnavailable);
  CHECK(msg.find("attempts=2") != std::string::npos);

  MockLlmServer blank([](const std::string&) { return std::string("  \n"); });
  CHECK(code_of([&] { generate(b, config_for(blank)); }) == ErrorCode::LlmRefusal);

  GenerationConfig none;
  CHECK(code_of([&] { generate(b, none); }) == ErrorCode::UsageError);
}

TEST_CASE("code extraction from completions") {
  CHECK(extract_code("Here:\n```cpp\nint f() { return 1; }\n```\nDone.") == "int f() { return 1; }\n");
  CHECK(extract_code("```\nx = 1\n```") == "x = 1\n");
  CHECK(extract_code("```python\nopen block\n") == "open block\n");
  CHECK(extract_code("plain text only") == "plain text only");
  CHECK(extract_code("```\na\n```\n```\nb\n```") == "a\n");
}
