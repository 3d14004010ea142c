#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "codegrag/graph_encoder.hpp"
#include "codegrag/training.hpp"
#include "doctest.h"
#include "gnn_fixtures.hpp"
#include "test_support.hpp"

using namespace codegrag;
using Mat = MatrixX<double>;
using Vec = VectorX<double>;

using namespace codegrag::testing;

TEST_CASE("attention rows and readout gates are distributions") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CAPTURE(seed);
    GnnConfig cfg;
    cfg.d_in = 8;
    cfg.d = 6;
    cfg.heads = 1 + static_cast<int>(seed % 3);
    cfg.layers = 2;
    cfg.seed = seed;
    const auto p = init_parameters<double>(cfg);
    std::mt19937_64 gen(seed);
    const auto in = random_graph(gen, cfg.d_in);
    ForwardCache<double> cache;
    encode_graph(p, in, &cache);
    for (const auto& layer : cache.layers) {
      for (int j = 0; j < in.num_nodes; ++j) {
        const auto& incoming = in.in_edges[static_cast<std::size_t>(j)];
        if (incoming.empty()) continue;
        for (int h = 0; h < cfg.heads; ++h) {
          double s = 0;
          for (int e : incoming) {
            CHECK(layer.A(h, e) >= 0.0);
            s += layer.A(h, e);
          }
          CHECK(std::abs(s - 1.0) <= 1e-6);
        }
      }
    }
    CHECK(std::abs(cache.alpha.sum() - 1.0) <= 1e-6);
    CHECK((cache.alpha.array() >= 0.0).all());
  }
}

TEST_CASE("two-node forward pass matches a hand computation") {
  const auto c = two_node_case();
  REQUIRE_FALSE(c.params.has_projection());
  ForwardCache<double> cache;
  const Vec got = encode_graph(c.params, c.input, &cache);
  CHECK(std::abs(got[0] - c.expected[0]) <= 1e-6);
  CHECK(std::abs(got[1] - c.expected[1]) <= 1e-6);
  CHECK(std::abs(cache.layers[0].A(0, 0) - c.attention_a) <= 1e-6);
  CHECK(std::abs(cache.layers[0].A(0, 1) - c.attention_b) <= 1e-6);
}

TEST_CASE("backward pass agrees with central differences") {
  GnnConfig cfg;
  cfg.d_in = 5;
  cfg.d = 4;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.seed = 11;
  const auto p = init_parameters<double>(cfg);
  std::mt19937_64 gen(3);
  std::normal_distribution<double> normal;
  Mat X(5, 5), U(5, 2);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = normal(gen);
  for (Eigen::Index i = 0; i < U.size(); ++i) U.data()[i] = normal(gen);
  const auto in = make_input(5, {{0, 1}, {1, 2}, {2, 3}, {3, 1}, {0, 4}, {4, 2}}, {0, 1, 0, 1, 0, 1}, X, U);
  Vec c(5);
  for (int i = 0; i < 5; ++i) c[i] = normal(gen);
  auto loss = [&](const GnnParameters<double>& q) { return c.dot(encode_graph(q, in)); };

  ForwardCache<double> cache;
  encode_graph(p, in, &cache);
  auto grad = p.zeros_like();
  encode_graph_backward(p, in, cache, c, grad);

  const double h = 1e-6;
  auto probe = p;
  std::vector<std::pair<std::string, Mat*>> mats;
  probe.for_each([&](const std::string& name, Mat& m) { mats.emplace_back(name, &m); });
  std::vector<const Mat*> analytic;
  grad.for_each([&](const std::string&, const Mat& m) { analytic.push_back(&m); });
  for (std::size_t k = 0; k < mats.size(); ++k) {
    const auto& [name, m] = mats[k];
    if (name == "fusion") continue;
    CAPTURE(name);
    Mat numeric(m->rows(), m->cols());
    for (Eigen::Index i = 0; i < m->size(); ++i) {
      const double keep = m->data()[i];
      m->data()[i] = keep + h;
      const double up = loss(probe);
      m->data()[i] = keep - h;
      const double down = loss(probe);
      m->data()[i] = keep;
      numeric.data()[i] = (up - down) / (2 * h);
    }
    const double scale = std::max(analytic[k]->norm(), numeric.norm());
    if (scale < 1e-10) continue;
    CHECK((*analytic[k] - numeric).norm() / scale < 1e-4);
  }
}

TEST_CASE("gradient probe on the 5-node fixture") {
  TrainConfig tc;
  for (auto fusion : {FusionKind::mean, FusionKind::learned}) {
    GnnConfig shape;
    shape.fusion = fusion;
    shape.heads = 2;
    const auto r = probe_gradient_check(shape, tc);
    CHECK(r.passed);
    CHECK(r.max_relative_error < 1e-4);
    CHECK(r.relative_error.count("layer0.W_q") == 1);
    CHECK(r.relative_error.count("fusion") == (fusion == FusionKind::learned ? 1 : 0));
  }
}

TEST_CASE("normalize and fuse backward") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> normal;
  Vec a(6), b(6), dout(6);
  for (int i = 0; i < 6; ++i) {
    a[i] = normal(gen);
    b[i] = normal(gen);
    dout[i] = normal(gen);
  }
  const double h = 1e-6;
  for (auto kind : {FusionKind::mean, FusionKind::learned}) {
    GnnConfig cfg;
    cfg.d_in = 6;
    cfg.d = 4;
    cfg.fusion = kind;
    auto p = init_parameters<double>(cfg);
    if (kind == FusionKind::learned)
      for (Eigen::Index i = 0; i < p.fusion.size(); ++i) p.fusion.data()[i] += 0.1 * normal(gen);
    auto grad = p.zeros_like();
    const Vec db = fuse_backward<double>(a, b, dout, p, &grad);
    for (int i = 0; i < 6; ++i) {
      Vec up = b, down = b;
      up[i] += h;
      down[i] -= h;
      const double num = (dout.dot(fuse<double>(a, up, &p)) - dout.dot(fuse<double>(a, down, &p))) / (2 * h);
      CHECK(db[i] == doctest::Approx(num).epsilon(1e-5));
    }
  }
  const Vec dn = normalize_backward<double>(a, dout);
  for (int i = 0; i < 6; ++i) {
    Vec up = a, down = a;
    up[i] += h;
    down[i] -= h;
    const double num = (dout.dot(l2_normalize(up)) - dout.dot(l2_normalize(down))) / (2 * h);
    CHECK(dn[i] == doctest::Approx(num).epsilon(1e-5));
  }
  CHECK(normalize_backward<double>(Vec::Zero(3), Vec::Ones(3)).isZero());
}

TEST_CASE("fusion at initialization equals the normalized mean") {
  Vec a(3), b(3);
  a << 3, 0, 4;
  b << 0, 1, 0;
  const Vec mean = l2_normalize((l2_normalize(a) + l2_normalize(b)) / 2.0);
  CHECK(fuse<double>(a, b).isApprox(mean, 1e-12));
  GnnConfig cfg;
  cfg.d_in = 3;
  cfg.d = 2;
  const auto p = init_parameters<double>(cfg);
  CHECK(fuse<double>(a, b, &p).isApprox(mean, 1e-12));
  CHECK(fuse<double>(a, b).norm() == doctest::Approx(1.0));
  CHECK_THROWS_AS(fuse<double>(a, Vec::Ones(4)), Error);
}

TEST_CASE("initialization is seeded and validated") {
  GnnConfig cfg;
  cfg.d_in = 10;
  cfg.d = 8;
  const auto a = init_parameters<double>(cfg);
  const auto b = init_parameters<double>(cfg);
  CHECK(checkpoint_to_string(a) == checkpoint_to_string(b));
  cfg.seed = 8;
  CHECK(checkpoint_to_string(init_parameters<double>(cfg)) != checkpoint_to_string(a));
  CHECK(a.proj.rows() == 8);
  CHECK(a.proj.cols() == 10);
  cfg.heads = 3;
  CHECK_THROWS_AS(init_parameters<double>(cfg), Error);
}

TEST_CASE("single precision matches double precision") {
  GnnConfig cfg;
  cfg.d_in = 8;
  cfg.d = 8;
  cfg.heads = 2;
  const auto pd = init_parameters<double>(cfg);
  const auto pf = pd.cast<float>();
  std::mt19937_64 gen(1);
  const auto in = random_graph(gen, 8);
  GraphInput<float> inf;
  inf.num_nodes = in.num_nodes;
  inf.src = in.src;
  inf.dst = in.dst;
  inf.edge_label = in.edge_label;
  inf.in_edges = in.in_edges;
  inf.X = in.X.cast<float>();
  inf.U = in.U.cast<float>();
  const Vec d = encode_graph(pd, in);
  const VectorX<float> f = encode_graph(pf, inf);
  CHECK((d - f.cast<double>()).norm() <= 1e-4 * std::max(1.0, d.norm()));
}

TEST_CASE("empty graphs and shape errors") {
  GnnConfig cfg;
  cfg.d_in = 4;
  cfg.d = 4;
  const auto p = init_parameters<double>(cfg);
  GraphInput<double> empty;
  try {
    encode_graph(p, empty);
    FAIL("empty graph accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyGraph);
  }
  std::mt19937_64 gen(2);
  const auto wrong = random_graph(gen, 5);
  try {
    encode_graph(p, wrong);
    FAIL("wrong width accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("checkpoints round-trip losslessly") {
  GnnConfig cfg;
  cfg.d_in = 6;
  cfg.d = 4;
  cfg.heads = 2;
  cfg.layers = 3;
  const auto p = init_parameters<double>(cfg);
  const auto text = checkpoint_to_string(p);
  const auto back = checkpoint_from_string(text);
  CHECK(checkpoint_to_string(back) == text);
  CHECK(back.config.layers == 3);
  CHECK(back.config.fusion == FusionKind::learned);
  bool same = true;
  std::vector<Mat> mats;
  p.for_each([&](const std::string&, const Mat& m) { mats.push_back(m); });
  std::size_t k = 0;
  back.for_each([&](const std::string&, const Mat& m) { same = same && (m == mats[k++]); });
  CHECK(same);
  CHECK(k == mats.size());

  const auto dir = codegrag::testing::scratch_dir("ckpt");
  save_checkpoint(p, dir + "/model.json");
  CHECK(checkpoint_to_string(load_checkpoint(dir + "/model.json")) == text);

  auto j = nlohmann::json::parse(text);
  j["version"] = 99;
  try {
    checkpoint_from_string(j.dump());
    FAIL("future version accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaVersionMismatch);
  }
  try {
    load_checkpoint(dir + "/missing.json");
    FAIL("missing file accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoFailure);
  }
}

TEST_CASE("query text joins description and declaration") {
  CHECK(query_text("Sum the list.", "int f(vector<int> v)") == "Sum the list.\nint f(vector<int> v)");
  FallbackEncoder enc(32);
  CHECK(encode_query("Sum the list.", "int f()", enc) == fallback_embed("Sum the list.\nint f()", 32));
}
