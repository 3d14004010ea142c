#include <cmath>
#include <limits>
#include <random>

#include "codegrag/retrieval.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace codegrag;

namespace {

EmbeddingVector vec(std::initializer_list<double> xs) {
  EmbeddingVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

KnowledgeEntry entry(std::int64_t id, EmbeddingVector v, Language lang = Language::cpp) {
  KnowledgeEntry e;
  e.id = id;
  e.language = lang;
  e.code = "entry" + std::to_string(id);
  e.fused_vec = std::move(v);
  return e;
}

QueryBundle query(EmbeddingVector v, Language pool = Language::cpp) {
  QueryBundle q;
  q.vector = std::move(v);
  q.pool_language = pool;
  return q;
}

EmbeddingVector random_vec(std::mt19937_64& gen, int dim) {
  std::normal_distribution<double> normal;
  EmbeddingVector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = normal(gen);
  return v;
}

}  // namespace

TEST_CASE("distance reference points") {
  const auto a = vec({1, 2, 3});
  CHECK(distance(a, a) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(distance(vec({1, 0}), vec({0, 5})) == doctest::Approx(1.0));
  CHECK(distance(a, -a) == doctest::Approx(2.0));
  CHECK(distance(vec({0, 0, 0}), a) == 1.0);
  CHECK(distance(a, vec({0, 0, 0})) == 1.0);
  CHECK_THROWS_AS(distance(a, vec({1, 2})), Error);
}

TEST_CASE("distance stays in range and is symmetric") {
  std::mt19937_64 gen(21);
  for (int t = 0; t < 500; ++t) {
    const auto a = random_vec(gen, 8);
    const auto b = random_vec(gen, 8);
    const double d = distance(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= 2.0);
    CHECK(d == doctest::Approx(distance(b, a)).epsilon(1e-12));
    CHECK(d == doctest::Approx(1.0 - a.dot(b) / (a.norm() * b.norm())).epsilon(1e-12));
  }
}

TEST_CASE("top-1 matches a brute-force scan and ignores positive scaling") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int t = 0; t < 50; ++t) {
    KnowledgeBase kb;
    for (int i = 0; i < 20; ++i) kb.entries.push_back(entry(i, random_vec(gen, 6)));
    const auto q = random_vec(gen, 6);
    std::size_t best = 0;
    double best_cos = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < kb.entries.size(); ++i) {
      const auto& v = *kb.entries[i].fused_vec;
      const double c = q.dot(v) / (q.norm() * v.norm());
      if (c > best_cos) {
        best_cos = c;
        best = i;
      }
    }
    CHECK(retrieve_top1(query(q), kb).index == best);
    CHECK(retrieve_top1(query(q * scale(gen)), kb).index == best);
    KnowledgeBase scaled = kb;
    for (auto& e : scaled.entries) *e.fused_vec *= scale(gen);
    CHECK(retrieve_top1(query(q), scaled).index == best);
  }
}

TEST_CASE("ties go to the lower id") {
  KnowledgeBase kb;
  kb.entries.push_back(entry(0, vec({0, 1})));
  kb.entries.push_back(entry(1, vec({2, 0})));
  kb.entries.push_back(entry(2, vec({1, 0})));
  kb.entries.push_back(entry(3, vec({3, 0})));
  const auto r = retrieve_top1(query(vec({1, 0})), kb);
  CHECK(r.entry.id == 1);
  CHECK(r.distance == doctest::Approx(0.0));
  const auto top = retrieve_topk(query(vec({1, 0})), kb, 10);
  REQUIRE(top.size() == 4);
  CHECK(top[0].entry.id == 1);
  CHECK(top[1].entry.id == 2);
  CHECK(top[2].entry.id == 3);
  CHECK(top[3].entry.id == 0);
  for (std::size_t i = 1; i < top.size(); ++i) CHECK(top[i - 1].distance <= top[i].distance);
}

TEST_CASE("the pool is restricted to one language") {
  KnowledgeBase kb;
  kb.entries.push_back(entry(0, vec({1, 0}), Language::python));
  kb.entries.push_back(entry(1, vec({0, 1}), Language::cpp));
  kb.entries.push_back(entry(2, vec({1, 0.1}), Language::cpp));
  CHECK(retrieve_top1(query(vec({1, 0}), Language::cpp), kb).entry.id == 2);
  CHECK(retrieve_top1(query(vec({1, 0}), Language::python), kb).entry.id == 0);
  CHECK(retrieve_topk(query(vec({1, 0}), Language::python), kb, 5).size() == 1);
}

TEST_CASE("retrieval failures") {
  KnowledgeBase kb;
  try {
    retrieve_top1(query(vec({1, 0})), kb);
    FAIL("empty pool accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyPool);
  }
  kb.entries.push_back(entry(0, vec({1, 0}), Language::python));
  try {
    retrieve_top1(query(vec({1, 0}), Language::cpp), kb);
    FAIL("pool without the language accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyPool);
  }
  kb.entries.push_back(entry(1, vec({1, 0})));
  kb.entries.back().fused_vec.reset();
  try {
    retrieve_top1(query(vec({1, 0})), kb);
    FAIL("unindexed entry accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingVectors);
  }
}

TEST_CASE("queries come from the problem text") {
  FallbackEncoder enc(64);
  const auto problems = load_problems(codegrag::testing::fixture_path("problems_cpp.jsonl"));
  const auto q = build_query(problems[3], enc);
  CHECK(q.description == problem_description(problems[3]));
  CHECK(q.declaration == problem_signature(problems[3]));
  CHECK(q.vector == encode_query(q.description, q.declaration, enc));
  CHECK(q.target_language == Language::cpp);
  CHECK(q.pool_language == Language::cpp);
  CHECK(build_query(problems[3], enc, Language::python).pool_language == Language::python);

  Problem bare = problems[0];
  bare.prompt = "int f(int x){\n";
  bare.declaration.clear();
  try {
    build_query(bare, enc);
    FAIL("problem without description accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingDescription);
  }
}
