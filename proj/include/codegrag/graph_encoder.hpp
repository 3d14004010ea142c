#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "codegrag/embedding.hpp"
#include "codegrag/error.hpp"
#include "codegrag/rng.hpp"
#include "codegrag/syntax_graph.hpp"

namespace codegrag {

enum class FusionKind { mean, learned };

struct GnnConfig {
  int d_in = kFallbackDim;  // text encoder width
  int d = 128;              // hidden width
  int layers = 2;
  int heads = 1;
  std::uint64_t seed = 7;
  FusionKind fusion = FusionKind::learned;
};

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Trainable state of the graph encoder and the fusion map.
///
/// Layer l computes m_e = W_n n_src + W_e e for every edge, then
/// multiplicative attention of Q = W_q n_dst against K = W_k m, V = W_v m.
/// The readout is softmax(w_gate . n + b_gate) over nodes applied to
/// f_feat(n) = W_feat n + b_feat.
template <typename Scalar>
struct GnnParameters {
  using Mat = MatrixX<Scalar>;

  struct Layer {
    Mat W_n, W_e, W_q, W_k, W_v;  // each d x d
  };

  GnnConfig config;
  Mat proj;  // d x d_in; empty when d_in == d
  std::vector<Layer> layers;
  Mat w_gate;  // d x 1
  Mat b_gate;  // 1 x 1
  Mat W_feat;  // d_in x d
  Mat b_feat;  // d_in x 1
  Mat fusion;  // d_in x 2 d_in; empty for FusionKind::mean

  bool has_projection() const { return proj.size() > 0; }

  /// Visits every matrix with a stable name, in a stable order.
  template <typename F>
  void for_each(F&& f) {
    if (has_projection()) f("proj", proj);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      f(p + "W_n", layers[l].W_n);
      f(p + "W_e", layers[l].W_e);
      f(p + "W_q", layers[l].W_q);
      f(p + "W_k", layers[l].W_k);
      f(p + "W_v", layers[l].W_v);
    }
    f("w_gate", w_gate);
    f("b_gate", b_gate);
    f("W_feat", W_feat);
    f("b_feat", b_feat);
    if (fusion.size() > 0) f("fusion", fusion);
  }

  template <typename F>
  void for_each(F&& f) const {
    const_cast<GnnParameters*>(this)->for_each(
        [&](const std::string& name, Mat& m) { f(name, static_cast<const Mat&>(m)); });
  }

  /// Same shapes, all zeros (gradient accumulator).
  GnnParameters zeros_like() const {
    GnnParameters z = *this;
    z.for_each([](const std::string&, Mat& m) { m.setZero(); });
    return z;
  }

  template <typename Other>
  GnnParameters<Other> cast() const {
    GnnParameters<Other> out;
    out.config = config;
    out.proj = proj.template cast<Other>();
    for (const auto& l : layers) {
      out.layers.push_back({l.W_n.template cast<Other>(), l.W_e.template cast<Other>(), l.W_q.template cast<Other>(),
                            l.W_k.template cast<Other>(), l.W_v.template cast<Other>()});
    }
    out.w_gate = w_gate.template cast<Other>();
    out.b_gate = b_gate.template cast<Other>();
    out.W_feat = W_feat.template cast<Other>();
    out.b_feat = b_feat.template cast<Other>();
    out.fusion = fusion.template cast<Other>();
    return out;
  }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) entries from a seeded generator.
template <typename Scalar>
GnnParameters<Scalar> init_parameters(const GnnConfig& cfg) {
  if (cfg.d_in <= 0 || cfg.d <= 0 || cfg.layers < 0 || cfg.heads <= 0)
    throw Error(ErrorCode::ShapeMismatch, "non-positive encoder dimensions");
  if (cfg.d % cfg.heads != 0) throw Error(ErrorCode::ShapeMismatch, "hidden dim not divisible by heads");
  using Mat = MatrixX<Scalar>;
  std::mt19937_64 gen(cfg.seed);
  auto uniform = [&](int rows, int cols, int fan_in) {
    Mat m(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>((2.0 * uniform01(gen) - 1.0) * bound);
    return m;
  };
  GnnParameters<Scalar> p;
  p.config = cfg;
  if (cfg.d_in != cfg.d) p.proj = uniform(cfg.d, cfg.d_in, cfg.d_in);
  for (int l = 0; l < cfg.layers; ++l) {
    typename GnnParameters<Scalar>::Layer layer;
    // W = [W_n | W_e] acts on the 2d-wide concatenation.
    layer.W_n = uniform(cfg.d, cfg.d, 2 * cfg.d);
    layer.W_e = uniform(cfg.d, cfg.d, 2 * cfg.d);
    layer.W_q = uniform(cfg.d, cfg.d, cfg.d);
    layer.W_k = uniform(cfg.d, cfg.d, cfg.d);
    layer.W_v = uniform(cfg.d, cfg.d, cfg.d);
    p.layers.push_back(std::move(layer));
  }
  p.w_gate = uniform(cfg.d, 1, cfg.d);
  p.b_gate = Mat::Zero(1, 1);
  p.W_feat = uniform(cfg.d_in, cfg.d, cfg.d);
  p.b_feat = Mat::Zero(cfg.d_in, 1);
  if (cfg.fusion == FusionKind::learned) {
    p.fusion.resize(cfg.d_in, 2 * cfg.d_in);
    p.fusion << Mat::Identity(cfg.d_in, cfg.d_in), Mat::Identity(cfg.d_in, cfg.d_in);
    p.fusion *= Scalar(0.5);
  }
  return p;
}

/// Topology plus initial node/edge features. Edge features are stored once
/// per distinct edge label and referenced by index.
template <typename Scalar>
struct GraphInput {
  int num_nodes = 0;
  std::vector<int> src, dst, edge_label;
  std::vector<std::vector<int>> in_edges;  // per node, incoming edge ids
  MatrixX<Scalar> X;  // d_in x N
  MatrixX<Scalar> U;  // d_in x (distinct edge labels)
};

inline std::string node_text(const SyntaxNode& n) { return n.node_name + " " + n.node_type; }

/// Initial states: n_i = phi1(name + " " + type), e_ij = phi1(edge type).
template <typename Scalar>
GraphInput<Scalar> init_states(const ComposedSyntaxGraph& g, EmbeddingCache& cache) {
  GraphInput<Scalar> in;
  in.num_nodes = static_cast<int>(g.nodes.size());
  std::vector<std::string> labels;
  for (const auto& n : g.nodes) labels.push_back(node_text(n));
  std::map<std::string, int> edge_index;
  std::vector<std::string> edge_labels;
  for (const auto& e : g.edges) {
    auto [it, fresh] = edge_index.emplace(e.edge_type, static_cast<int>(edge_labels.size()));
    if (fresh) edge_labels.push_back(e.edge_type);
    in.src.push_back(e.src);
    in.dst.push_back(e.dst);
    in.edge_label.push_back(it->second);
  }
  labels.insert(labels.end(), edge_labels.begin(), edge_labels.end());
  cache.prefetch(labels);
  const int dim = cache.dim();
  in.X.resize(dim, in.num_nodes);
  for (int i = 0; i < in.num_nodes; ++i) in.X.col(i) = cache.get(node_text(g.nodes[static_cast<std::size_t>(i)])).template cast<Scalar>();
  in.U.resize(dim, static_cast<Eigen::Index>(edge_labels.size()));
  for (std::size_t k = 0; k < edge_labels.size(); ++k)
    in.U.col(static_cast<Eigen::Index>(k)) = cache.get(edge_labels[k]).template cast<Scalar>();
  in.in_edges.assign(static_cast<std::size_t>(in.num_nodes), {});
  for (std::size_t e = 0; e < in.dst.size(); ++e) in.in_edges[static_cast<std::size_t>(in.dst[e])].push_back(static_cast<int>(e));
  return in;
}

template <typename Scalar>
struct LayerCache {
  MatrixX<Scalar> Nin, M, Q, K, V, A, Nout;  // A: heads x edges
};

template <typename Scalar>
struct ForwardCache {
  MatrixX<Scalar> N0, Ep;
  std::vector<LayerCache<Scalar>> layers;
  VectorX<Scalar> gate, alpha;
  MatrixX<Scalar> F;
  VectorX<Scalar> out;
};

namespace detail {

template <typename Scalar>
void check_input(const GnnParameters<Scalar>& p, const GraphInput<Scalar>& in) {
  if (in.num_nodes == 0) throw Error(ErrorCode::EmptyGraph, "graph has no nodes");
  if (in.X.rows() != p.config.d_in || in.X.cols() != in.num_nodes)
    throw Error(ErrorCode::ShapeMismatch, "node features do not match d_in");
  if (!in.src.empty() && in.U.rows() != p.config.d_in)
    throw Error(ErrorCode::ShapeMismatch, "edge features do not match d_in");
}

}  // namespace detail

/// One attention message-passing layer. Nodes without in-edges pass through.
template <typename Scalar>
void message_passing_layer(const typename GnnParameters<Scalar>::Layer& w, const GraphInput<Scalar>& in,
                           const MatrixX<Scalar>& Ep, int heads, LayerCache<Scalar>& c) {
  using Mat = MatrixX<Scalar>;
  const Eigen::Index d = c.Nin.rows();
  const Eigen::Index num_edges = static_cast<Eigen::Index>(in.src.size());
  const Eigen::Index dh = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  const Mat WnN = w.W_n * c.Nin;
  const Mat WeE = w.W_e * Ep;
  c.M.resize(d, num_edges);
  for (Eigen::Index e = 0; e < num_edges; ++e) c.M.col(e) = WnN.col(in.src[e]) + WeE.col(in.edge_label[e]);
  c.Q.noalias() = w.W_q * c.Nin;
  c.K.noalias() = w.W_k * c.M;
  c.V.noalias() = w.W_v * c.M;
  c.A.setZero(heads, num_edges);
  c.Nout = c.Nin;
  for (int j = 0; j < in.num_nodes; ++j) {
    const auto& incoming = in.in_edges[static_cast<std::size_t>(j)];
    if (incoming.empty()) continue;
    c.Nout.col(j).setZero();
    for (int h = 0; h < heads; ++h) {
      const auto q = c.Q.col(j).segment(h * dh, dh);
      Scalar top = -std::numeric_limits<Scalar>::infinity();
      for (int e : incoming) {
        const Scalar s = q.dot(c.K.col(e).segment(h * dh, dh)) * scale;
        c.A(h, e) = s;
        top = std::max(top, s);
      }
      Scalar z = 0;
      for (int e : incoming) {
        c.A(h, e) = std::exp(c.A(h, e) - top);
        z += c.A(h, e);
      }
      for (int e : incoming) {
        c.A(h, e) /= z;
        c.Nout.col(j).segment(h * dh, dh) += c.A(h, e) * c.V.col(e).segment(h * dh, dh);
      }
    }
  }
}

/// phi2: projection, L message-passing layers, attention readout.
template <typename Scalar>
VectorX<Scalar> encode_graph(const GnnParameters<Scalar>& p, const GraphInput<Scalar>& in,
                             ForwardCache<Scalar>* cache = nullptr) {
  detail::check_input(p, in);
  ForwardCache<Scalar> local;
  ForwardCache<Scalar>& c = cache ? *cache : local;
  if (p.has_projection()) {
    c.N0.noalias() = p.proj * in.X;
    c.Ep.noalias() = p.proj * in.U;
  } else {
    c.N0 = in.X;
    c.Ep = in.U;
  }
  c.layers.assign(p.layers.size(), {});
  const MatrixX<Scalar>* current = &c.N0;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    c.layers[l].Nin = *current;
    message_passing_layer<Scalar>(p.layers[l], in, c.Ep, p.config.heads, c.layers[l]);
    current = &c.layers[l].Nout;
  }
  const MatrixX<Scalar>& NL = *current;
  c.gate = (NL.transpose() * p.w_gate).col(0).array() + p.b_gate(0, 0);
  const Scalar top = c.gate.maxCoeff();
  c.alpha = (c.gate.array() - top).exp();
  c.alpha /= c.alpha.sum();
  c.F = (p.W_feat * NL).colwise() + p.b_feat.col(0);
  c.out = c.F * c.alpha;
  return c.out;
}

/// Accumulates dL/dparams into `grad` given dL/d(encode_graph output).
template <typename Scalar>
void encode_graph_backward(const GnnParameters<Scalar>& p, const GraphInput<Scalar>& in,
                           const ForwardCache<Scalar>& c, const VectorX<Scalar>& dout, GnnParameters<Scalar>& grad) {
  using Mat = MatrixX<Scalar>;
  using Vec = VectorX<Scalar>;
  const Mat& NL = p.layers.empty() ? c.N0 : c.layers.back().Nout;
  // Readout.
  const Mat dF = dout * c.alpha.transpose();
  const Vec dalpha = c.F.transpose() * dout;
  const Vec dgate = c.alpha.array() * (dalpha.array() - c.alpha.dot(dalpha));
  grad.W_feat.noalias() += dF * NL.transpose();
  grad.b_feat.col(0) += dF.rowwise().sum();
  grad.w_gate.col(0).noalias() += NL * dgate;
  grad.b_gate(0, 0) += dgate.sum();
  Mat dN = p.W_feat.transpose() * dF;
  dN.noalias() += p.w_gate.col(0) * dgate.transpose();

  const int heads = p.config.heads;
  const Eigen::Index num_edges = static_cast<Eigen::Index>(in.src.size());
  Mat dEp = Mat::Zero(c.Ep.rows(), c.Ep.cols());
  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const auto& w = p.layers[li];
    const auto& lc = c.layers[li];
    auto& gw = grad.layers[li];
    const Eigen::Index d = lc.Nin.rows();
    const Eigen::Index dh = d / heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    Mat dNin = Mat::Zero(d, in.num_nodes);
    Mat dQ = Mat::Zero(d, in.num_nodes);
    Mat dK = Mat::Zero(d, num_edges);
    Mat dV = Mat::Zero(d, num_edges);
    for (int j = 0; j < in.num_nodes; ++j) {
      const auto& incoming = in.in_edges[static_cast<std::size_t>(j)];
      if (incoming.empty()) {
        dNin.col(j) += dN.col(j);
        continue;
      }
      for (int h = 0; h < heads; ++h) {
        const auto dn = dN.col(j).segment(h * dh, dh);
        Scalar weighted = 0;
        std::vector<Scalar> da(incoming.size());
        for (std::size_t k = 0; k < incoming.size(); ++k) {
          const int e = incoming[k];
          dV.col(e).segment(h * dh, dh) += lc.A(h, e) * dn;
          da[k] = dn.dot(lc.V.col(e).segment(h * dh, dh));
          weighted += lc.A(h, e) * da[k];
        }
        for (std::size_t k = 0; k < incoming.size(); ++k) {
          const int e = incoming[k];
          const Scalar ds = lc.A(h, e) * (da[k] - weighted) * scale;
          dQ.col(j).segment(h * dh, dh) += ds * lc.K.col(e).segment(h * dh, dh);
          dK.col(e).segment(h * dh, dh) += ds * lc.Q.col(j).segment(h * dh, dh);
        }
      }
    }
    gw.W_q.noalias() += dQ * lc.Nin.transpose();
    dNin.noalias() += w.W_q.transpose() * dQ;
    gw.W_k.noalias() += dK * lc.M.transpose();
    gw.W_v.noalias() += dV * lc.M.transpose();
    Mat dM = w.W_k.transpose() * dK;
    dM.noalias() += w.W_v.transpose() * dV;
    // Scatter message gradients onto their source nodes and edge labels.
    Mat dSrc = Mat::Zero(d, in.num_nodes);
    Mat dLab = Mat::Zero(d, c.Ep.cols());
    for (Eigen::Index e = 0; e < num_edges; ++e) {
      dSrc.col(in.src[e]) += dM.col(e);
      dLab.col(in.edge_label[e]) += dM.col(e);
    }
    gw.W_n.noalias() += dSrc * lc.Nin.transpose();
    gw.W_e.noalias() += dLab * c.Ep.transpose();
    dNin.noalias() += w.W_n.transpose() * dSrc;
    dEp.noalias() += w.W_e.transpose() * dLab;
    dN = std::move(dNin);
  }
  if (p.has_projection()) {
    grad.proj.noalias() += dN * in.X.transpose();
    if (in.U.cols() > 0) grad.proj.noalias() += dEp * in.U.transpose();
  }
}

/// psi: normalized mean of the normalized inputs, or normalize(M [a; b]).
template <typename Scalar>
VectorX<Scalar> fuse(const VectorX<Scalar>& code_vec, const VectorX<Scalar>& graph_vec,
                     const GnnParameters<Scalar>* p = nullptr) {
  if (code_vec.size() != graph_vec.size())
    throw Error(ErrorCode::DimensionMismatch, "fuse inputs differ in dimension");
  const VectorX<Scalar> a = l2_normalize(code_vec);
  const VectorX<Scalar> b = l2_normalize(graph_vec);
  if (p && p->fusion.size() > 0) {
    if (p->fusion.cols() != 2 * a.size()) throw Error(ErrorCode::DimensionMismatch, "fusion map shape");
    VectorX<Scalar> ab(2 * a.size());
    ab << a, b;
    return l2_normalize(p->fusion * ab);
  }
  return l2_normalize((a + b) / Scalar(2));
}

/// Backward of y = x / |x| (zero-safe).
template <typename Scalar>
VectorX<Scalar> normalize_backward(const VectorX<Scalar>& x, const VectorX<Scalar>& dy) {
  const Scalar n = x.norm();
  if (n == Scalar(0)) return VectorX<Scalar>::Zero(x.size());
  const VectorX<Scalar> y = x / n;
  return (dy - y * y.dot(dy)) / n;
}

/// Gradient of fuse() w.r.t. graph_vec (and the fusion map when learned).
template <typename Scalar>
VectorX<Scalar> fuse_backward(const VectorX<Scalar>& code_vec, const VectorX<Scalar>& graph_vec,
                              const VectorX<Scalar>& dout, const GnnParameters<Scalar>& p,
                              GnnParameters<Scalar>* grad) {
  const VectorX<Scalar> a = l2_normalize(code_vec);
  const VectorX<Scalar> b = l2_normalize(graph_vec);
  VectorX<Scalar> db;
  if (p.fusion.size() > 0) {
    VectorX<Scalar> ab(2 * a.size());
    ab << a, b;
    const VectorX<Scalar> z = p.fusion * ab;
    const VectorX<Scalar> dz = normalize_backward<Scalar>(z, dout);
    if (grad) grad->fusion.noalias() += dz * ab.transpose();
    db = (p.fusion.transpose() * dz).tail(b.size());
  } else {
    const VectorX<Scalar> s = (a + b) / Scalar(2);
    db = normalize_backward<Scalar>(s, dout) / Scalar(2);
  }
  return normalize_backward<Scalar>(graph_vec, db);
}

/// h^Q = phi1(description + "\n" + declaration).
EmbeddingVector encode_query(const std::string& description, const std::string& declaration, TextEncoder& encoder);
std::string query_text(const std::string& description, const std::string& declaration);

/// Versioned JSON checkpoint with config, seed and every matrix.
void save_checkpoint(const GnnParameters<double>& params, const std::string& path);
GnnParameters<double> load_checkpoint(const std::string& path);
std::string checkpoint_to_string(const GnnParameters<double>& params);
GnnParameters<double> checkpoint_from_string(const std::string& text);

/// Convenience wrapper: init states through the cache and run phi2.
EmbeddingVector encode_graph_vector(const GnnParameters<double>& params, const ComposedSyntaxGraph& g,
                                    EmbeddingCache& cache);

}  // namespace codegrag
