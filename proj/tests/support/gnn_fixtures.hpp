#pragma once

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "codegrag/graph_encoder.hpp"

namespace codegrag::testing {

using Plain = std::vector<std::vector<double>>;  // row-major

inline std::vector<double> matvec(const Plain& m, const std::vector<double>& x) {
  std::vector<double> y(m.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += m[i][j] * x[j];
  return y;
}

inline std::vector<double> add(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline MatrixX<double> to_eigen(const Plain& m) {
  MatrixX<double> out(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m[0].size()));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[0].size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m[i][j];
  return out;
}

inline GraphInput<double> make_input(int n, const std::vector<std::pair<int, int>>& edges,
                                     const std::vector<int>& labels, const MatrixX<double>& X,
                                     const MatrixX<double>& U) {
  GraphInput<double> in;
  in.num_nodes = n;
  in.X = X;
  in.U = U;
  in.in_edges.assign(static_cast<std::size_t>(n), {});
  for (std::size_t e = 0; e < edges.size(); ++e) {
    in.src.push_back(edges[e].first);
    in.dst.push_back(edges[e].second);
    in.edge_label.push_back(labels[e]);
    in.in_edges[static_cast<std::size_t>(edges[e].second)].push_back(static_cast<int>(e));
  }
  return in;
}

inline GraphInput<double> random_graph(std::mt19937_64& gen, int d_in) {
  std::uniform_int_distribution<int> nodes(1, 12);
  const int n = nodes(gen);
  std::uniform_int_distribution<int> pick(0, n - 1);
  std::uniform_int_distribution<int> count(0, 3 * n);
  std::uniform_int_distribution<int> label(0, 2);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::vector<std::pair<int, int>> edges;
  std::vector<int> labels;
  const int m = count(gen);
  for (int e = 0; e < m; ++e) {
    edges.emplace_back(pick(gen), pick(gen));
    labels.push_back(label(gen));
  }
  MatrixX<double> X(d_in, n), U(d_in, 3);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = normal(gen);
  for (Eigen::Index i = 0; i < U.size(); ++i) U.data()[i] = normal(gen);
  return make_input(n, edges, labels, X, U);
}

/// Largest deviation from 1 of any attention row or readout gate sum over
/// `seeds` random graphs, or -1 when a weight is negative.
inline double distribution_error(int seeds) {
  double worst = 0.0;
  for (int seed = 0; seed < seeds; ++seed) {
    GnnConfig cfg;
    cfg.d_in = 8;
    cfg.d = 6;
    cfg.heads = 1 + seed % 3;
    cfg.layers = 2;
    cfg.seed = static_cast<std::uint64_t>(seed);
    const auto p = init_parameters<double>(cfg);
    std::mt19937_64 gen(static_cast<std::uint64_t>(seed));
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
            if (layer.A(h, e) < 0.0) return -1.0;
            s += layer.A(h, e);
          }
          worst = std::max(worst, std::abs(s - 1.0));
        }
      }
    }
    if ((cache.alpha.array() < 0.0).any()) return -1.0;
    worst = std::max(worst, std::abs(cache.alpha.sum() - 1.0));
  }
  return worst;
}

/// Two nodes, one layer, one head, with every intermediate worked out in
/// plain arithmetic.
struct TwoNodeCase {
  GnnParameters<double> params;
  GraphInput<double> input;
  std::vector<double> expected;
  double attention_a = 0.0;
  double attention_b = 0.0;
};

inline TwoNodeCase two_node_case() {
  // d_in = d = 2; edges 0->1 (label a), 1->1 (label b), 1->0 (label a).
  const Plain Wn = {{0.5, -0.2}, {0.1, 0.3}};
  const Plain We = {{0.2, 0.0}, {-0.1, 0.4}};
  const Plain Wq = {{1.0, 0.5}, {-0.5, 0.2}};
  const Plain Wk = {{0.3, -0.7}, {0.6, 0.1}};
  const Plain Wv = {{0.9, 0.2}, {-0.3, 0.8}};
  const std::vector<double> w_gate = {0.7, -0.4};
  const double b_gate = 0.05;
  const Plain Wf = {{0.25, -0.5}, {1.0, 0.75}};
  const std::vector<double> b_feat = {0.1, -0.2};
  const std::vector<double> x0 = {1.0, 2.0}, x1 = {-1.0, 0.5};
  const std::vector<double> ua = {0.3, -0.6}, ub = {0.8, 0.1};

  GnnConfig cfg;
  cfg.d_in = 2;
  cfg.d = 2;
  cfg.layers = 1;
  cfg.heads = 1;
  cfg.fusion = FusionKind::mean;
  TwoNodeCase c{init_parameters<double>(cfg), {}, {}, 0.0, 0.0};
  auto& p = c.params;
  p.layers[0].W_n = to_eigen(Wn);
  p.layers[0].W_e = to_eigen(We);
  p.layers[0].W_q = to_eigen(Wq);
  p.layers[0].W_k = to_eigen(Wk);
  p.layers[0].W_v = to_eigen(Wv);
  p.w_gate = to_eigen({{w_gate[0]}, {w_gate[1]}});
  p.b_gate(0, 0) = b_gate;
  p.W_feat = to_eigen(Wf);
  p.b_feat = to_eigen({{b_feat[0]}, {b_feat[1]}});
  MatrixX<double> X(2, 2), U(2, 2);
  X << x0[0], x1[0], x0[1], x1[1];
  U << ua[0], ub[0], ua[1], ub[1];
  c.input = make_input(2, {{0, 1}, {1, 1}, {1, 0}}, {0, 1, 0}, X, U);

  // Messages.
  const auto m01 = add(matvec(Wn, x0), matvec(We, ua));
  const auto m11 = add(matvec(Wn, x1), matvec(We, ub));
  const auto m10 = add(matvec(Wn, x1), matvec(We, ua));
  const double scale = 1.0 / std::sqrt(2.0);
  // Node 0 has a single in-edge, so it takes that value directly.
  const auto n0 = matvec(Wv, m10);
  // Node 1 attends over two in-edges.
  const auto q1 = matvec(Wq, x1);
  const double s_a = dot(q1, matvec(Wk, m01)) * scale;
  const double s_b = dot(q1, matvec(Wk, m11)) * scale;
  c.attention_a = std::exp(s_a) / (std::exp(s_a) + std::exp(s_b));
  c.attention_b = 1.0 - c.attention_a;
  const auto v_a = matvec(Wv, m01), v_b = matvec(Wv, m11);
  const std::vector<double> n1 = {c.attention_a * v_a[0] + c.attention_b * v_b[0],
                                  c.attention_a * v_a[1] + c.attention_b * v_b[1]};
  // Readout.
  const double g0 = dot(w_gate, n0) + b_gate, g1 = dot(w_gate, n1) + b_gate;
  const double al0 = std::exp(g0) / (std::exp(g0) + std::exp(g1)), al1 = 1.0 - al0;
  const auto f0 = add(matvec(Wf, n0), b_feat), f1 = add(matvec(Wf, n1), b_feat);
  c.expected = {al0 * f0[0] + al1 * f1[0], al0 * f0[1] + al1 * f1[1]};
  return c;
}

}  // namespace codegrag::testing
