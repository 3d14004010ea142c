#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "codegrag/knowledge_base.hpp"
#include "codegrag/training.hpp"
#include "doctest.h"
#include "synthetic_kb.hpp"

using namespace codegrag;
using Mat = MatrixX<double>;

namespace {

KnowledgeBase small_kb(std::size_t n) {
  auto corpus = codegrag::testing::synthetic_corpus();
  std::vector<CorpusItem> picked;
  // One item per operation first, so small pools still mix operations.
  for (std::size_t i = 0; i < corpus.size() && picked.size() < n; ++i) {
    const std::size_t k = (i % 10) * 5 + i / 10;
    picked.push_back(corpus[k]);
  }
  return build_kb(picked, {});
}

GnnConfig small_shape(int d_in) {
  GnnConfig cfg;
  cfg.d_in = d_in;
  cfg.d = 32;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("contrastive loss reference values") {
  const Mat I = Mat::Identity(2, 2);
  CHECK(contrastive_loss<double>(I, I, 1.0) == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
  CHECK(contrastive_loss<double>(I, I, 1.0) == doctest::Approx(0.3133).epsilon(1e-4));

  Mat one(3, 1);
  one << 1, 2, 3;
  Mat other(3, 1);
  other << -1, 0, 5;
  CHECK(contrastive_loss<double>(one, other, 0.07) == 0.0);

  Mat same(3, 2);
  same << 1, 1, 2, 2, 3, 3;
  CHECK(contrastive_loss<double>(same, same, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(contrastive_loss<double>(Mat(4, 0), Mat(4, 0), 1.0) == 0.0);
}

TEST_CASE("contrastive loss is invariant to column scaling") {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> normal;
  Mat a(5, 4), p(5, 4);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = normal(gen);
    p.data()[i] = normal(gen);
  }
  Mat a2 = a;
  a2.col(1) *= 7.5;
  a2.col(3) *= 0.01;
  CHECK(contrastive_loss<double>(a, p, 0.2) == doctest::Approx(contrastive_loss<double>(a2, p, 0.2)).epsilon(1e-12));
  CHECK(contrastive_loss<double>(a, p, 0.2) == doctest::Approx(contrastive_loss<double>(p, a, 0.2)).epsilon(1e-12));
}

TEST_CASE("contrastive loss gradients agree with central differences") {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> normal;
  Mat a(4, 3), p(4, 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = normal(gen);
    p.data()[i] = normal(gen);
  }
  Mat da, dp;
  contrastive_loss<double>(a, p, 0.3, &da, &dp);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    Mat up = a, down = a;
    up.data()[i] += h;
    down.data()[i] -= h;
    const double num = (contrastive_loss<double>(up, p, 0.3) - contrastive_loss<double>(down, p, 0.3)) / (2 * h);
    CHECK(da.data()[i] == doctest::Approx(num).epsilon(1e-6));
    up = p;
    down = p;
    up.data()[i] += h;
    down.data()[i] -= h;
    const double nump = (contrastive_loss<double>(a, up, 0.3) - contrastive_loss<double>(a, down, 0.3)) / (2 * h);
    CHECK(dp.data()[i] == doctest::Approx(nump).epsilon(1e-6));
  }
}

TEST_CASE("contrastive loss rejects bad input") {
  const Mat I = Mat::Identity(2, 2);
  CHECK_THROWS_AS(contrastive_loss<double>(I, I, 0.0), Error);
  CHECK_THROWS_AS(contrastive_loss<double>(I, Mat::Identity(3, 3), 1.0), Error);
}

TEST_CASE("pairs for every objective") {
  const auto kb = small_kb(6);
  FallbackEncoder enc(64);
  const auto params = init_parameters<double>(small_shape(64));
  for (auto mode : {PairMode::qa, PairMode::cg, PairMode::preserve}) {
    CAPTURE(to_string(mode));
    const auto pairs = build_pairs(kb, mode, 0.15, 1, enc, params);
    REQUIRE(pairs.size() == kb.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      CHECK(pairs[i].id == kb.entries[i].id);
      CHECK(pairs[i].anchor.size() == 64);
      CHECK(pairs[i].positive.size() == 64);
    }
    const auto again = build_pairs(kb, mode, 0.15, 1, enc, params);
    CHECK(again[2].positive == pairs[2].positive);
  }
  const auto qa = build_pairs(kb, PairMode::qa, 0.15, 1, enc, params);
  CHECK(qa[0].positive == encode_query(kb.entries[0].description, kb.entries[0].declaration, enc));
  const auto cg = build_pairs(kb, PairMode::cg, 0.15, 1, enc, params);
  CHECK(cg[0].anchor == fallback_embed(kb.entries[0].code, 64));
}

TEST_CASE("training batch gradients pass the finite-difference check") {
  const auto kb = small_kb(4);
  FallbackEncoder enc(12);
  EmbeddingCache cache(enc);
  const auto examples = prepare_examples(kb, cache);
  GnnConfig shape = small_shape(12);
  shape.d = 6;
  shape.heads = 2;
  const auto params = init_parameters<double>(shape);
  TrainConfig cfg;
  cfg.temperature = 0.5;
  std::vector<const TrainingExample*> batch;
  std::vector<GraphInput<double>> corrupted;
  for (const auto& ex : examples) {
    batch.push_back(&ex);
    corrupted.push_back(init_states<double>(corrupt_graph(ex.graph, 0.3, 5 + ex.id), cache));
  }
  const auto r = gradient_check(params, batch, corrupted, cfg);
  CHECK(r.passed);
  CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("training is deterministic and lowers the loss") {
  const auto kb = small_kb(16);
  FallbackEncoder enc(64);
  const auto params = init_parameters<double>(small_shape(64));
  TrainConfig cfg;
  cfg.epochs = 6;
  int calls = 0;
  const auto a = train(kb, params, cfg, enc, [&](const EpochLoss& e) { CHECK(e.epoch == ++calls); });
  CHECK(calls == 6);
  const auto b = train(kb, params, cfg, enc);
  REQUIRE(a.report.epochs.size() == 6);
  CHECK(a.report.epochs == b.report.epochs);
  CHECK(checkpoint_to_string(a.params) == checkpoint_to_string(b.params));
  CHECK(a.report.epochs.back().total < a.report.epochs.front().total);
  for (const auto& e : a.report.epochs) {
    CHECK(std::isfinite(e.total));
    CHECK(e.total == doctest::Approx(cfg.weight_qa * e.qa + cfg.weight_cg * e.cg + cfg.weight_preserve * e.preserve));
  }
  cfg.seed = 99;
  const auto c = train(kb, params, cfg, enc);
  CHECK_FALSE(c.report.epochs == a.report.epochs);
}

TEST_CASE("gradient gate runs before training when requested") {
  const auto kb = small_kb(4);
  FallbackEncoder enc(32);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.check_gradients = true;
  const auto r = train(kb, init_parameters<double>(small_shape(32)), cfg, enc);
  CHECK(r.report.gradient_check == "passed");
  CHECK(r.report.gradient_check_max_error < 1e-4);
  cfg.check_gradients = false;
  CHECK(train(kb, init_parameters<double>(small_shape(32)), cfg, enc).report.gradient_check == "skipped");
}

TEST_CASE("non-finite parameters abort training") {
  const auto kb = small_kb(4);
  FallbackEncoder enc(32);
  auto params = init_parameters<double>(small_shape(32));
  params.W_feat(0, 0) = std::nan("");
  TrainConfig cfg;
  cfg.epochs = 2;
  try {
    train(kb, params, cfg, enc);
    FAIL("training continued with NaN parameters");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteLoss);
  }
}

TEST_CASE("invalid training configuration") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.temperature = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.weight_qa = cfg.weight_cg = cfg.weight_preserve = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.weight_cg = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.drop_rate = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("corruption seeds differ per epoch and entry") {
  CHECK(corruption_seed(7, 1, 0) != corruption_seed(7, 2, 0));
  CHECK(corruption_seed(7, 1, 0) != corruption_seed(7, 1, 1));
  CHECK(corruption_seed(7, 1, 0) == corruption_seed(7, 1, 0));
}

TEST_CASE("self-retrieval accuracy is a fraction") {
  auto kb = small_kb(10);
  FallbackEncoder enc(64);
  index_kb(kb, enc, init_parameters<double>(small_shape(64)));
  const double acc = qa_self_retrieval_accuracy(kb, enc);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  CHECK(qa_self_retrieval_accuracy(KnowledgeBase{}, enc) == 0.0);
}
