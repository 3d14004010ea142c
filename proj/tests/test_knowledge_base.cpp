#include <set>
#include <string>

#include "codegrag/knowledge_base.hpp"
#include "codegrag/problem.hpp"
#include "doctest.h"
#include "json.hpp"
#include "synthetic_kb.hpp"
#include "test_support.hpp"

using namespace codegrag;
using codegrag::testing::fixture_path;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::UsageError;
}

GnnParameters<double> small_params(int d_in) {
  GnnConfig cfg;
  cfg.d_in = d_in;
  cfg.d = 16;
  return init_parameters<double>(cfg);
}

}  // namespace

TEST_CASE("building skips unextractable items and keeps ids dense") {
  auto corpus = codegrag::testing::synthetic_corpus();
  CorpusItem prose;
  prose.source = {"Sorry, I can only describe this in words.", Language::cpp, "prose"};
  prose.description = "nothing";
  corpus.insert(corpus.begin() + 3, prose);
  KbBuildOptions opts;
  opts.corpus_label = "synthetic";
  const auto kb = build_kb(corpus, opts);
  CHECK(kb.meta.attempted == 51);
  CHECK(kb.meta.succeeded == 50);
  CHECK(kb.meta.corpus_label == "synthetic");
  REQUIRE(kb.size() == 50);
  for (std::size_t i = 0; i < kb.size(); ++i) {
    CHECK(kb.entries[i].id == static_cast<std::int64_t>(i));
    CHECK_FALSE(kb.entries[i].graph.nodes.empty());
    CHECK_FALSE(kb.entries[i].code_vec.has_value());
  }
  CHECK(kb.entries[3].origin == "synthetic/sum_heights");
}

TEST_CASE("empty corpus and missing encoder") {
  CHECK(code_of([] { build_kb({}, {}); }) == ErrorCode::EmptyCorpus);
  KbBuildOptions opts;
  opts.embed = true;
  CHECK(code_of([] {
          KbBuildOptions o;
          o.embed = true;
          build_kb(codegrag::testing::synthetic_corpus(), o);
        }) == ErrorCode::UsageError);
}

TEST_CASE("indexing fills unit-norm vectors") {
  FallbackEncoder enc(32);
  const auto params = small_params(32);
  KbBuildOptions opts;
  opts.embed = true;
  const auto kb = build_kb(codegrag::testing::synthetic_corpus(), opts, &enc, &params);
  CHECK(kb.meta.encoder_fingerprint == "fnv1a64-v1/32");
  for (const auto& e : kb.entries) {
    REQUIRE(e.fused_vec.has_value());
    CHECK(e.code_vec->size() == 32);
    CHECK(e.graph_vec->size() == 32);
    CHECK(e.fused_vec->norm() == doctest::Approx(1.0));
    CHECK(*e.code_vec == fallback_embed(e.code, 32));
  }
  FallbackEncoder wrong(16);
  auto copy = kb;
  CHECK(code_of([&] { index_kb(copy, wrong, params); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("lookup is bounds-checked") {
  const auto kb = build_kb(codegrag::testing::synthetic_corpus(), {});
  CHECK(lookup(kb, 0).id == 0);
  CHECK(lookup(kb, 49).id == 49);
  CHECK(code_of([&] { lookup(kb, 50); }) == ErrorCode::IndexOutOfRange);
  CHECK(code_of([&] { lookup(kb, -1); }) == ErrorCode::IndexOutOfRange);
}

TEST_CASE("serialization is lossless") {
  FallbackEncoder enc(24);
  const auto params = small_params(24);
  KbBuildOptions opts;
  opts.embed = true;
  auto kb = build_kb(codegrag::testing::synthetic_corpus(), opts, &enc, &params);
  kb.entries[1].graph_vec.reset();
  const auto text = kb_to_string(kb);
  const auto back = kb_from_string(text);
  CHECK(back == kb);
  CHECK(kb_to_string(back) == text);

  const auto header = nlohmann::json::parse(text.substr(0, text.find('\n')));
  CHECK(header.at("kind") == "codegrag-kb");
  CHECK(header.at("schema_version") == 1);
  CHECK(header.at("count") == 50);
  CHECK(header.at("build_meta").at("encoder_fingerprint") == "fnv1a64-v1/24");

  const auto dir = codegrag::testing::scratch_dir("kb");
  save_kb(kb, dir + "/kb.jsonl");
  CHECK(load_kb(dir + "/kb.jsonl") == kb);
}

TEST_CASE("corrupt knowledge base files are rejected") {
  const auto kb = build_kb(codegrag::testing::synthetic_corpus(), {});
  const auto text = kb_to_string(kb);
  const auto nl = text.find('\n');
  auto header = nlohmann::json::parse(text.substr(0, nl));
  const std::string body = text.substr(nl);

  auto with_header = [&](const nlohmann::json& h) { return h.dump() + body; };
  auto h = header;
  h["schema_version"] = 2;
  CHECK(code_of([&] { kb_from_string(with_header(h)); }) == ErrorCode::SchemaVersionMismatch);
  h = header;
  h["kind"] = "something-else";
  CHECK(code_of([&] { kb_from_string(with_header(h)); }) == ErrorCode::SchemaVersionMismatch);
  h = header;
  h["count"] = 49;
  CHECK(code_of([&] { kb_from_string(with_header(h)); }) == ErrorCode::IoFailure);
  CHECK(code_of([&] { kb_from_string(""); }) == ErrorCode::IoFailure);
  CHECK(code_of([&] { kb_from_string(header.dump() + "\n{not json\n"); }) == ErrorCode::IoFailure);

  // Swap two entry lines so ids are no longer dense and sorted.
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  std::swap(lines[1], lines[2]);
  std::string swapped;
  for (const auto& l : lines) swapped += l + "\n";
  CHECK(code_of([&] { kb_from_string(swapped); }) == ErrorCode::IoFailure);
  CHECK(code_of([] { load_kb("/nonexistent/kb.jsonl"); }) == ErrorCode::IoFailure);
}

TEST_CASE("corpus records in both formats") {
  const auto plain = load_corpus(fixture_path("kb_corpus.jsonl"));
  REQUIRE(plain.size() == 16);
  CHECK(plain[0].source.language == Language::cpp);
  CHECK(plain[0].key == "sum_scores");
  CHECK(plain[0].description == "Add up every element of the scores list and return the total.");
  CHECK(plain[15].source.language == Language::python);

  const auto heval = load_corpus(fixture_path("problems_cpp.jsonl"));
  REQUIRE(heval.size() == 10);
  const auto rows = codegrag::testing::read_jsonl(fixture_path("problems_cpp.jsonl"));
  CHECK(heval[2].source.code == rows[2].at("prompt").get<std::string>() + rows[2].at("canonical_solution").get<std::string>());
  CHECK(heval[2].key == "2");
  CHECK(heval[2].description.starts_with("Return the largest element of a non-empty vector."));
  CHECK(heval[2].declaration == "int max_of(vector<int> v)");

  CHECK(code_of([] { corpus_item_from_json("{\"language\":\"cpp\"}"); }) == ErrorCode::IoFailure);
  CHECK(code_of([] { corpus_item_from_json("{\"code\":\"x\",\"language\":\"cobol\"}"); }) ==
        ErrorCode::UnsupportedLanguage);
}

TEST_CASE("evaluation problems can be excluded by task key") {
  auto items = load_corpus(fixture_path("problems_python.jsonl"));
  const auto cpp = load_corpus(fixture_path("problems_cpp.jsonl"));
  items.insert(items.end(), cpp.begin(), cpp.end());
  const auto kept = exclude_keys(items, {"0", "3"});
  CHECK(kept.size() == 16);
  for (const auto& k : kept) CHECK((k.key != "0" && k.key != "3"));
}

TEST_CASE("problem records") {
  const auto cpp = load_problems(fixture_path("problems_cpp.jsonl"));
  REQUIRE(cpp.size() == 10);
  CHECK(cpp[0].language == Language::cpp);
  CHECK(problem_description(cpp[0]) == "Return the sum of two integers.\n>>> add_two(2, 3)\n5");
  CHECK(problem_signature(cpp[0]) == "int add_two(int a, int b)");
  CHECK(entry_point_of(cpp[0]) == "add_two");

  const auto py = load_problems(fixture_path("problems_python.jsonl"));
  REQUIRE(py.size() == 10);
  CHECK(py[4].language == Language::python);
  CHECK(problem_description(py[4]) ==
        "Return the elements of the list in reverse order.\n>>> reverse_list([1, 2, 3])\n[3, 2, 1]");
  CHECK(problem_signature(py[4]) == "def reverse_list(xs):");
  CHECK(entry_point_of(py[4]) == "reverse_list");

  Problem bare;
  bare.task_id = "CPP/99";
  bare.prompt = "int f(int x){\n";
  CHECK(problem_description(bare).empty());
  CHECK(entry_point_of(bare) == "f");
}

TEST_CASE("task ids order numerically within a prefix") {
  CHECK(task_id_less("CPP/2", "CPP/10"));
  CHECK_FALSE(task_id_less("CPP/10", "CPP/2"));
  CHECK(task_id_less("CPP/99", "Python/0"));
  CHECK(task_key("CPP/17") == "17");
  CHECK(task_key("plain") == "plain");
}
