#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "codegrag/syntax_graph.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_support.hpp"

using namespace codegrag;
using codegrag::testing::fixture_path;
using codegrag::testing::read_file;

namespace {

Language language_of(const std::string& file) {
  return file.ends_with(".py") ? Language::python : Language::cpp;
}

ComposedSyntaxGraph extract_fixture(const std::string& rel) {
  return extract_graph({read_file(fixture_path(rel)), language_of(rel), rel});
}

std::map<std::string, std::int64_t> bucket_counts(const ComposedSyntaxGraph& g) {
  std::map<std::string, std::int64_t> out;
  for (const char* k : {"read", "write", "next", "trueNext", "falseNext", "child", "function"}) out[k] = 0;
  for (const auto& e : g.edges) ++out[codegrag::testing::oracle_bucket(e.edge_type)];
  return out;
}

const std::map<std::string, std::int64_t> kReferenceHistogram = {
    {"-0", 1},
    {"-1", 1},
    {"ArraySubscriptExpredge0", 1},
    {"ArraySubscriptExpredge1", 1},
    {"CXXOperatorCallExpredge1", 1},
    {"CXXOperatorCallExpredge2", 2},
    {"ImplicitCastExpredge0", 1},
    {"UserDefineFun", 1},
    {"falseNext", 1},
    {"next", 5},
    {"read", 10},
    {"trueNext", 1},
    {"write", 9},
};

}  // namespace

TEST_CASE("hand-analyzed corpus edge counts") {
  const auto expected = nlohmann::json::parse(read_file(fixture_path("oracle/expected.json")));
  REQUIRE(expected.size() == 18);
  int functions = 0;
  for (const auto& [file, want] : expected.items()) {
    CAPTURE(file);
    const auto g = extract_fixture("oracle/" + file);
    const auto got = bucket_counts(g);
    for (const auto& [bucket, n] : want.items()) {
      if (bucket == "functions") continue;
      CAPTURE(bucket);
      CHECK(got.at(bucket) == n.get<std::int64_t>());
    }
    const auto fn_nodes = std::count_if(g.nodes.begin(), g.nodes.end(), [](const SyntaxNode& n) {
      return n.node_type == "FunctionDecl" || n.node_type == "FunctionDef";
    });
    CHECK(fn_nodes == want.at("functions").get<int>());
    functions += static_cast<int>(fn_nodes);
    CHECK_FALSE(g.partial);
  }
  CHECK(functions == 20);
}

TEST_CASE("reference function reproduces the published view") {
  const auto g = extract_fixture("reference_function.cpp");
  CHECK(g.nodes.size() == 24);
  CHECK(g.edges.size() == 35);
  CHECK(g.edge_type_counts == kReferenceHistogram);

  const auto text = summarize_graph(g, SummaryVariant::edge_type_topological).text;
  CHECK(text.starts_with("Graph(num_nodes={'node': 24},"));
  CHECK(text.find("('node', 'read', 'node'): 10") != std::string::npos);
  CHECK(text.find("('node', 'write', 'node'): 9") != std::string::npos);
  CHECK(text.find("('node', 'next', 'node'): 5") != std::string::npos);
  // Keys are listed in byte order.
  CHECK(text.find("'-0'") < text.find("'ArraySubscriptExpredge0'"));
  CHECK(text.find("'UserDefineFun'") < text.find("'falseNext'"));
}

TEST_CASE("histogram always equals a recount of the edge list") {
  for (const auto& entry : std::filesystem::directory_iterator(fixture_path("oracle"))) {
    const auto name = entry.path().filename().string();
    if (name == "expected.json") continue;
    const auto g = extract_fixture("oracle/" + name);
    std::map<std::string, std::int64_t> recount;
    for (const auto& e : g.edges) ++recount[e.edge_type];
    CHECK(g.edge_type_counts == recount);
    CHECK_NOTHROW(g.validate());
  }
}

TEST_CASE("extraction is deterministic") {
  const auto a = extract_fixture("reference_function.cpp");
  const auto b = extract_fixture("reference_function.cpp");
  CHECK(a == b);
  CHECK(serialize_graph(a) == serialize_graph(b));
}

TEST_CASE("component extractors partition the composed edge list") {
  const SourceUnit src{read_file(fixture_path("oracle/c08_count_odd.cpp")), Language::cpp, std::nullopt};
  const auto g = extract_graph(src);
  const auto control = extract_control_flow(src);
  const auto rw = extract_read_write(src);
  const auto data = extract_data_flow(src);
  CHECK(control.size() + rw.size() + data.size() == g.edges.size());
  for (const auto& e : control) CHECK(categorize_edge(e.edge_type) == EdgeCategory::control);
  for (const auto& e : rw) CHECK((e.edge_type == "read" || e.edge_type == "write"));
  for (const auto& e : data) CHECK(categorize_edge(e.edge_type) == EdgeCategory::data_flow);
}

TEST_CASE("serialization round-trips") {
  for (const char* rel : {"reference_function.cpp", "oracle/p09_pairs.py", "oracle/c09_score.cpp"}) {
    const auto g = extract_fixture(rel);
    const auto back = deserialize_graph(serialize_graph(g));
    CHECK(back == g);
  }
}

TEST_CASE("malformed graph data is rejected") {
  CHECK_THROWS_AS(deserialize_graph("not json"), Error);
  ComposedSyntaxGraph g;
  g.add_node("FunctionDecl", "f");
  g.edges.push_back({0, 3, "next"});
  g.recount();
  try {
    g.validate();
    FAIL("validate accepted a dangling edge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedGraphData);
  }
}

TEST_CASE("prose and unknown languages fail cleanly") {
  try {
    extract_graph({"Sorry, I cannot help with that.", Language::cpp, std::nullopt});
    FAIL("prose was accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ExtractionFailed);
  }
  try {
    parse_language("haskell");
    FAIL("unknown language accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedLanguage);
  }
  CHECK(parse_language("C++") == Language::cpp);
  CHECK(parse_language("py") == Language::python);
}

TEST_CASE("python node vocabulary") {
  const auto g = extract_fixture("oracle/p02_total.py");
  std::set<std::string> types;
  for (const auto& n : g.nodes) types.insert(n.node_type);
  CHECK(types.count("FunctionDef") == 1);
  CHECK(types.count("arg") == 1);
  CHECK(types.count("Name") == 1);
}

TEST_CASE("corruption keeps nodes and drops a binomial share of edges") {
  const auto g = extract_fixture("reference_function.cpp");
  const double p = 0.15;
  const int trials = 1000;
  std::int64_t kept = 0;
  for (int t = 0; t < trials; ++t) {
    const auto c = corrupt_graph(g, p, static_cast<std::uint64_t>(t));
    REQUIRE(c.nodes == g.nodes);
    kept += static_cast<std::int64_t>(c.edges.size());
    // Every kept edge comes from the original, in order.
    std::size_t j = 0;
    for (const auto& e : c.edges) {
      while (j < g.edges.size() && !(g.edges[j] == e)) ++j;
      REQUIRE(j < g.edges.size());
      ++j;
    }
  }
  const double n = static_cast<double>(g.edges.size()) * trials;
  const double mean = n * (1 - p);
  const double sigma = std::sqrt(n * p * (1 - p));
  CHECK(std::abs(static_cast<double>(kept) - mean) <= 3 * sigma);
}

TEST_CASE("corruption edge cases") {
  const auto g = extract_fixture("oracle/c03_sum_to.cpp");
  CHECK(corrupt_graph(g, 0.0, 1).edges == g.edges);
  CHECK(corrupt_graph(g, 1.0, 1).edges.empty());
  CHECK(corrupt_graph(g, 0.3, 42) == corrupt_graph(g, 0.3, 42));
  const auto c = corrupt_graph(g, 0.5, 9);
  std::map<std::string, std::int64_t> recount;
  for (const auto& e : c.edges) ++recount[e.edge_type];
  CHECK(c.edge_type_counts == recount);
  CHECK_THROWS_AS(corrupt_graph(g, 1.5, 1), Error);
}

TEST_CASE("summary variants are distinct and deterministic") {
  const auto g = extract_fixture("oracle/c04_first_negative.cpp");
  std::set<std::string> texts;
  for (auto v : {SummaryVariant::edge_type_only, SummaryVariant::edge_type_node_name,
                 SummaryVariant::edge_type_node_type, SummaryVariant::edge_type_topological}) {
    const auto a = summarize_graph(g, v);
    const auto b = summarize_graph(g, v);
    CHECK(a.text == b.text);
    CHECK(a.variant == v);
    CHECK(parse_summary_variant(to_string(v)) == v);
    texts.insert(a.text);
  }
  CHECK(texts.size() == 4);
  const auto names = summarize_graph(g, SummaryVariant::edge_type_node_name).text;
  CHECK(names.find("'first_negative'") != std::string::npos);
  const auto types = summarize_graph(g, SummaryVariant::edge_type_node_type).text;
  CHECK(types.find("'FunctionDecl'") != std::string::npos);
  CHECK(summarize_graph(g, SummaryVariant::edge_type_only).text.find("first_negative") == std::string::npos);
}

TEST_CASE("oracle corpus extracts well within the time budget") {
  const auto start = std::chrono::steady_clock::now();
  for (const auto& entry : std::filesystem::directory_iterator(fixture_path("oracle"))) {
    const auto name = entry.path().filename().string();
    if (name != "expected.json") extract_fixture("oracle/" + name);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(secs < 5.0);
}
