#include <cmath>
#include <string>
#include <vector>

#include "codegrag/embedding.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace codegrag;
using codegrag::testing::MockEncoderServer;

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

}  // namespace

TEST_CASE("subtokens split on case, underscores and punctuation") {
  using V = std::vector<std::string>;
  CHECK(subtokenize("fooBar") == V{"foo", "bar"});
  CHECK(subtokenize("foo_bar") == V{"foo", "bar"});
  CHECK(subtokenize("HTTPServer") == V{"http", "server"});
  CHECK(subtokenize("parse2D value") == V{"parse2", "d", "value"});
  CHECK(subtokenize("  a+b  ") == V{"a", "b"});
  CHECK(subtokenize("").empty());
}

TEST_CASE("fnv1a64 published test vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("l2 normalization") {
  Eigen::Vector2d v(3, 4);
  const auto n = l2_normalize(v);
  CHECK(n[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(n[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(l2_normalize(Eigen::Vector3d::Zero().eval()).isZero());
  Eigen::Vector3f f(0, 0, -2);
  CHECK(l2_normalize(f)[2] == doctest::Approx(-1.0));
}

TEST_CASE("fallback embedding of a single subtoken is a signed one-hot") {
  const int dim = 16;
  const std::uint64_t h = fnv1a64("foo");
  EmbeddingVector want = EmbeddingVector::Zero(dim);
  want[static_cast<Eigen::Index>(h % dim)] = (h >> 63) ? -1.0 : 1.0;
  CHECK(fallback_embed("foo", dim) == want);
  CHECK(fallback_embed("FOO foo", dim) == want);
}

TEST_CASE("fallback embedding properties") {
  CHECK(fallback_embed("fooBar") == fallback_embed("foo_bar"));
  CHECK(fallback_embed("sort the list") == fallback_embed("list the sort"));
  CHECK(fallback_embed("sum of scores").norm() == doctest::Approx(1.0));
  CHECK(fallback_embed("!!!").isZero());
  CHECK(fallback_embed("x", 7).size() == 7);
  CHECK(code_of([] { fallback_embed("x", 0); }) == ErrorCode::DimensionMismatch);

  FallbackEncoder enc;
  CHECK(enc.dim() == kFallbackDim);
  CHECK(enc.fingerprint() == "fnv1a64-v1/256");
  const auto vs = enc.embed({"a", "b", "a"});
  REQUIRE(vs.size() == 3);
  CHECK(vs[0] == vs[2]);
}

TEST_CASE("cosine handles zero vectors and dimension mismatches") {
  Eigen::Vector3d a(1, 0, 0), b(0, 2, 0), z = Eigen::Vector3d::Zero();
  CHECK(cosine(a, a) == doctest::Approx(1.0));
  CHECK(cosine(a, b) == doctest::Approx(0.0));
  CHECK(cosine(a, z) == 0.0);
  Eigen::VectorXd c = Eigen::VectorXd::Ones(2);
  CHECK(code_of([&] { cosine(Eigen::VectorXd(a), c); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("remote encoder follows the service contract") {
  MockEncoderServer server(24);
  EncoderConfig cfg;
  cfg.provider = EncoderProvider::remote;
  cfg.endpoint = server.base_url();
  cfg.dim = 0;
  cfg.max_batch = 4;
  auto enc = make_encoder(cfg);
  CHECK(enc->dim() == 24);
  CHECK(enc->fingerprint() == "remote:mock-encoder/24");
  CHECK(server.health_calls == 1);

  std::vector<std::string> texts;
  for (int i = 0; i < 10; ++i) texts.push_back("text " + std::to_string(i));
  const auto vs = enc->embed(texts);
  REQUIRE(vs.size() == 10);
  for (const auto& v : vs) CHECK(v.size() == 24);
  CHECK(server.batch_sizes == std::vector<std::size_t>{4, 4, 2});
  // Same text, same vector.
  CHECK(enc->embed({"text 3"})[0] == vs[3]);
}

TEST_CASE("remote encoder dimension checks") {
  MockEncoderServer server(24);
  EncoderConfig cfg;
  cfg.provider = EncoderProvider::remote;
  cfg.endpoint = server.base_url();
  cfg.dim = 32;
  CHECK(code_of([&] { RemoteEncoder enc(cfg); }) == ErrorCode::DimensionMismatch);

  MockEncoderServer liar(24, 12);
  cfg.endpoint = liar.base_url();
  cfg.dim = 24;
  RemoteEncoder enc(cfg);
  CHECK(code_of([&] { enc.embed({"x"}); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("remote encoder failures surface as EncoderUnavailable") {
  int dead_port = 0;
  {
    MockEncoderServer server(8);
    dead_port = server.port();
    server.fail_embed = true;
    EncoderConfig cfg;
    cfg.provider = EncoderProvider::remote;
    cfg.endpoint = server.base_url();
    cfg.dim = 8;
    RemoteEncoder enc(cfg);
    CHECK(code_of([&] { enc.embed({"x"}); }) == ErrorCode::EncoderUnavailable);
  }
  EncoderConfig cfg;
  cfg.provider = EncoderProvider::remote;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(dead_port);
  cfg.timeout_seconds = 2;
  CHECK(code_of([&] { RemoteEncoder enc(cfg); }) == ErrorCode::EncoderUnavailable);
}

TEST_CASE("embedding cache encodes each label once") {
  FallbackEncoder enc(32);
  EmbeddingCache cache(enc);
  cache.prefetch({"a", "b", "a"});
  CHECK(cache.misses() == 2);
  CHECK(cache.get("a") == fallback_embed("a", 32));
  CHECK(cache.misses() == 2);
  cache.get("c");
  CHECK(cache.misses() == 3);
  CHECK(cache.size() == 3);
}
