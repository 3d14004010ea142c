#include "codegrag/training.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "codegrag/retrieval.hpp"
#include "codegrag/rng.hpp"

namespace codegrag {

namespace {

using Mat = MatrixX<double>;
using Vec = VectorX<double>;

// Fisher-Yates with the portable uniform01 draw.
void shuffle_indices(std::vector<std::size_t>& idx, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(gen) * static_cast<double>(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

Mat stack(const std::vector<Vec>& cols) {
  Mat m(cols.empty() ? 0 : cols.front().size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = cols[i];
  return m;
}

bool all_finite(const GnnParameters<double>& p) {
  bool ok = true;
  p.for_each([&](const std::string&, const Mat& m) { ok = ok && m.allFinite(); });
  return ok;
}

}  // namespace

std::string_view to_string(PairMode mode) {
  switch (mode) {
    case PairMode::qa: return "qa";
    case PairMode::cg: return "cg";
    case PairMode::preserve: return "preserve";
  }
  return "unknown";
}

void TrainConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw Error(ErrorCode::UsageError, "temperature must be positive");
  if (weight_qa < 0.0 || weight_cg < 0.0 || weight_preserve < 0.0)
    throw Error(ErrorCode::UsageError, "loss weights must be non-negative");
  if (weight_qa + weight_cg + weight_preserve <= 0.0)
    throw Error(ErrorCode::UsageError, "at least one loss weight must be positive");
  if (!(drop_rate >= 0.0 && drop_rate < 1.0)) throw Error(ErrorCode::UsageError, "drop rate must be in [0, 1)");
  if (epochs < 0) throw Error(ErrorCode::UsageError, "epochs must be non-negative");
  if (batch_size < 1) throw Error(ErrorCode::UsageError, "batch size must be positive");
  if (!(learning_rate >= 0.0) || !(momentum >= 0.0 && momentum < 1.0))
    throw Error(ErrorCode::UsageError, "learning rate must be >= 0 and momentum in [0, 1)");
}

std::uint64_t corruption_seed(std::uint64_t seed, int epoch, std::int64_t id) {
  return derive_seed(seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(id));
}

std::vector<ContrastivePair> build_pairs(const KnowledgeBase& kb, PairMode mode, double drop_rate, std::uint64_t seed,
                                         TextEncoder& encoder, const GnnParameters<double>& params) {
  EmbeddingCache cache(encoder);
  std::vector<ContrastivePair> pairs;
  for (const auto& e : kb.entries) {
    if (e.graph.nodes.empty()) throw Error(ErrorCode::MissingVectors, "entry " + std::to_string(e.id) + " has no graph");
    ContrastivePair pair;
    pair.id = e.id;
    const Vec graph_vec = encode_graph_vector(params, e.graph, cache);
    switch (mode) {
      case PairMode::qa: {
        if (e.description.empty())
          throw Error(ErrorCode::MissingVectors, "entry " + std::to_string(e.id) + " has no description");
        const Vec code_vec = e.code_vec ? *e.code_vec : embed_texts({e.code}, encoder).front();
        pair.anchor = fuse<double>(code_vec, graph_vec, &params);
        pair.positive = encode_query(e.description, e.declaration, encoder);
        break;
      }
      case PairMode::cg:
        pair.anchor = e.code_vec ? *e.code_vec : embed_texts({e.code}, encoder).front();
        pair.positive = graph_vec;
        break;
      case PairMode::preserve:
        pair.anchor = graph_vec;
        pair.positive = encode_graph_vector(params, corrupt_graph(e.graph, drop_rate, corruption_seed(seed, 0, e.id)), cache);
        break;
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<TrainingExample> prepare_examples(const KnowledgeBase& kb, EmbeddingCache& cache) {
  std::vector<std::string> codes, queries;
  for (const auto& e : kb.entries) {
    if (e.description.empty())
      throw Error(ErrorCode::MissingVectors, "entry " + std::to_string(e.id) + " has no description for its query");
    codes.push_back(e.code);
    queries.push_back(query_text(e.description, e.declaration));
  }
  std::vector<std::string> texts = codes;
  texts.insert(texts.end(), queries.begin(), queries.end());
  cache.prefetch(texts);
  std::vector<TrainingExample> out;
  for (std::size_t i = 0; i < kb.entries.size(); ++i) {
    const auto& e = kb.entries[i];
    TrainingExample ex;
    ex.id = e.id;
    ex.graph = e.graph;
    ex.input = init_states<double>(e.graph, cache);
    ex.code_vec = cache.get(codes[i]);
    ex.query_vec = cache.get(queries[i]);
    out.push_back(std::move(ex));
  }
  return out;
}

EpochLoss batch_objective(const GnnParameters<double>& params, const std::vector<const TrainingExample*>& batch,
                          const std::vector<GraphInput<double>>& corrupted, const TrainConfig& cfg,
                          GnnParameters<double>* grad) {
  const std::size_t B = batch.size();
  const bool use_pres = cfg.weight_preserve > 0.0;
  if (use_pres && corrupted.size() != B) throw Error(ErrorCode::ShapeMismatch, "missing corrupted views");
  std::vector<ForwardCache<double>> caches(B), ccaches(use_pres ? B : 0);
  std::vector<Vec> hg(B), hc(use_pres ? B : 0), hv(B), codes(B), queries(B);
  for (std::size_t k = 0; k < B; ++k) {
    hg[k] = encode_graph<double>(params, batch[k]->input, &caches[k]);
    codes[k] = batch[k]->code_vec;
    queries[k] = batch[k]->query_vec;
    hv[k] = fuse<double>(codes[k], hg[k], &params);
    if (use_pres) hc[k] = encode_graph<double>(params, corrupted[k], &ccaches[k]);
  }
  const double tau = cfg.temperature;
  const Mat G = stack(hg);
  Mat dG = Mat::Zero(G.rows(), G.cols());
  Mat dC;
  EpochLoss out;
  if (cfg.weight_qa > 0.0) {
    Mat dV;
    out.qa = contrastive_loss<double>(stack(hv), stack(queries), tau, grad ? &dV : nullptr, nullptr);
    if (grad) {
      for (std::size_t k = 0; k < B; ++k) {
        const Vec dv = cfg.weight_qa * dV.col(static_cast<Eigen::Index>(k));
        dG.col(static_cast<Eigen::Index>(k)) += fuse_backward<double>(codes[k], hg[k], dv, params, grad);
      }
    }
  }
  if (cfg.weight_cg > 0.0) {
    Mat dP;
    out.cg = contrastive_loss<double>(stack(codes), G, tau, nullptr, grad ? &dP : nullptr);
    if (grad) dG += cfg.weight_cg * dP;
  }
  if (use_pres) {
    Mat dA, dP;
    out.preserve = contrastive_loss<double>(G, stack(hc), tau, grad ? &dA : nullptr, grad ? &dP : nullptr);
    if (grad) {
      dG += cfg.weight_preserve * dA;
      dC = cfg.weight_preserve * dP;
    }
  }
  out.total = cfg.weight_qa * out.qa + cfg.weight_cg * out.cg + cfg.weight_preserve * out.preserve;
  if (grad) {
    for (std::size_t k = 0; k < B; ++k) {
      encode_graph_backward<double>(params, batch[k]->input, caches[k], dG.col(static_cast<Eigen::Index>(k)), *grad);
      if (use_pres)
        encode_graph_backward<double>(params, corrupted[k], ccaches[k], dC.col(static_cast<Eigen::Index>(k)), *grad);
    }
  }
  return out;
}

GradientCheckResult gradient_check(const GnnParameters<double>& params,
                                   const std::vector<const TrainingExample*>& batch,
                                   const std::vector<GraphInput<double>>& corrupted, const TrainConfig& cfg,
                                   double step, double tolerance) {
  GnnParameters<double> analytic = params.zeros_like();
  const double loss = batch_objective(params, batch, corrupted, cfg, &analytic).total;
  // Gradients below the rounding noise of the difference quotient count as zero.
  const double noise_floor = 1e-7 * std::max(1.0, std::abs(loss));
  GnnParameters<double> probe = params;
  std::map<std::string, Mat*> probe_mats;
  probe.for_each([&](const std::string& name, Mat& m) { probe_mats[name] = &m; });
  GradientCheckResult result;
  analytic.for_each([&](const std::string& name, const Mat& ga) {
    Mat& m = *probe_mats.at(name);
    Mat gn(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double keep = m.data()[i];
      m.data()[i] = keep + step;
      const double up = batch_objective(probe, batch, corrupted, cfg, nullptr).total;
      m.data()[i] = keep - step;
      const double down = batch_objective(probe, batch, corrupted, cfg, nullptr).total;
      m.data()[i] = keep;
      gn.data()[i] = (up - down) / (2.0 * step);
    }
    const double scale = std::max(ga.norm(), gn.norm());
    const double err = scale < noise_floor ? 0.0 : (ga - gn).norm() / scale;
    result.relative_error[name] = err;
    result.max_relative_error = std::max(result.max_relative_error, err);
  });
  result.passed = result.max_relative_error < tolerance;
  return result;
}

GradientCheckResult probe_gradient_check(const GnnConfig& shape, const TrainConfig& cfg) {
  GnnConfig small;
  small.d_in = 6;
  small.d = shape.heads * 2;
  small.layers = shape.layers;
  small.heads = shape.heads;
  small.seed = derive_seed(cfg.seed, 0x9c);
  small.fusion = shape.fusion;
  const auto params = init_parameters<double>(small);
  std::mt19937_64 gen(derive_seed(cfg.seed, 0x9d));
  auto random_vec = [&](int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = 2.0 * uniform01(gen) - 1.0;
    return v;
  };
  // A 5-node graph with a cycle, a node without in-edges and two labels.
  const std::vector<std::pair<int, int>> topo = {{0, 1}, {1, 2}, {2, 3}, {3, 1}, {0, 4}, {4, 2}, {1, 4}};
  auto make_input = [&](const std::vector<std::pair<int, int>>& edges) {
    GraphInput<double> in;
    in.num_nodes = 5;
    in.X.resize(small.d_in, 5);
    for (int i = 0; i < 5; ++i) in.X.col(i) = random_vec(small.d_in);
    in.U.resize(small.d_in, 2);
    in.U.col(0) = random_vec(small.d_in);
    in.U.col(1) = random_vec(small.d_in);
    in.in_edges.assign(5, {});
    for (std::size_t e = 0; e < edges.size(); ++e) {
      in.src.push_back(edges[e].first);
      in.dst.push_back(edges[e].second);
      in.edge_label.push_back(static_cast<int>(e % 2));
      in.in_edges[static_cast<std::size_t>(edges[e].second)].push_back(static_cast<int>(e));
    }
    return in;
  };
  std::vector<TrainingExample> examples(3);
  std::vector<GraphInput<double>> corrupted;
  for (int k = 0; k < 3; ++k) {
    examples[k].id = k;
    examples[k].input = make_input(topo);
    examples[k].code_vec = random_vec(small.d_in);
    examples[k].query_vec = random_vec(small.d_in);
    auto dropped = topo;
    dropped.erase(dropped.begin() + k);
    corrupted.push_back(make_input(dropped));
  }
  std::vector<const TrainingExample*> batch;
  for (const auto& ex : examples) batch.push_back(&ex);
  return gradient_check(params, batch, corrupted, cfg);
}

TrainResult train(const KnowledgeBase& kb, GnnParameters<double> params, const TrainConfig& cfg, TextEncoder& encoder,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (kb.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot train on an empty knowledge base");
  if (encoder.dim() != params.config.d_in)
    throw Error(ErrorCode::DimensionMismatch, "encoder dim differs from the encoder input width");
  TrainResult result;
  if (cfg.check_gradients) {
    const auto check = probe_gradient_check(params.config, cfg);
    result.report.gradient_check_max_error = check.max_relative_error;
    if (!check.passed)
      throw Error(ErrorCode::GradientCheckFailed,
                  "max relative gradient error " + std::to_string(check.max_relative_error));
    result.report.gradient_check = "passed";
  }
  EmbeddingCache cache(encoder);
  const auto examples = prepare_examples(kb, cache);
  GnnParameters<double> velocity = params.zeros_like();
  std::vector<std::size_t> order(examples.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle_indices(order, derive_seed(cfg.seed, 0x5f, static_cast<std::uint64_t>(epoch)));
    EpochLoss sum;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const TrainingExample*> batch;
      std::vector<GraphInput<double>> corrupted;
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = examples[order[k]];
        batch.push_back(&ex);
        if (cfg.weight_preserve > 0.0) {
          const auto view = corrupt_graph(ex.graph, cfg.drop_rate, corruption_seed(cfg.seed, epoch, ex.id));
          corrupted.push_back(init_states<double>(view, cache));
        }
      }
      GnnParameters<double> grad = params.zeros_like();
      const EpochLoss loss = batch_objective(params, batch, corrupted, cfg, &grad);
      if (!std::isfinite(loss.total))
        throw Error(ErrorCode::NonFiniteLoss, "loss became non-finite in epoch " + std::to_string(epoch));
      sum.qa += loss.qa;
      sum.cg += loss.cg;
      sum.preserve += loss.preserve;
      sum.total += loss.total;
      ++batches;
      std::map<std::string, Mat*> grads;
      grad.for_each([&](const std::string& name, Mat& m) { grads[name] = &m; });
      std::map<std::string, Mat*> vel;
      velocity.for_each([&](const std::string& name, Mat& m) { vel[name] = &m; });
      params.for_each([&](const std::string& name, Mat& m) {
        Mat& v = *vel.at(name);
        v = cfg.momentum * v + *grads.at(name);
        m -= cfg.learning_rate * v;
      });
      if (!all_finite(params))
        throw Error(ErrorCode::NonFiniteLoss, "parameters became non-finite in epoch " + std::to_string(epoch));
    }
    EpochLoss mean;
    mean.epoch = epoch;
    mean.qa = sum.qa / batches;
    mean.cg = sum.cg / batches;
    mean.preserve = sum.preserve / batches;
    mean.total = sum.total / batches;
    result.report.epochs.push_back(mean);
    if (on_epoch) on_epoch(mean);
  }
  result.params = std::move(params);
  return result;
}

double qa_self_retrieval_accuracy(const KnowledgeBase& kb, TextEncoder& encoder) {
  if (kb.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < kb.entries.size(); ++i) {
    const auto& e = kb.entries[i];
    QueryBundle q;
    q.vector = encode_query(e.description, e.declaration, encoder);
    q.target_language = q.pool_language = e.language;
    if (retrieve_top1(q, kb).index == i) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(kb.entries.size());
}

}  // namespace codegrag
