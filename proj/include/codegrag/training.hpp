#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "codegrag/embedding.hpp"
#include "codegrag/graph_encoder.hpp"
#include "codegrag/knowledge_base.hpp"

namespace codegrag {

enum class PairMode { qa, cg, preserve };

std::string_view to_string(PairMode mode);

struct TrainConfig {
  double temperature = 0.07;
  double learning_rate = 0.03;
  double momentum = 0.0;
  int epochs = 30;
  int batch_size = 8;
  double weight_qa = 1.0;
  double weight_cg = 1.0;
  double weight_preserve = 1.0;
  double drop_rate = 0.15;
  std::uint64_t seed = 7;
  bool check_gradients = false;

  /// Throws UsageError on a non-positive temperature, negative weights or
  /// all-zero weights.
  void validate() const;
};

struct EpochLoss {
  int epoch = 0;
  double qa = 0.0;
  double cg = 0.0;
  double preserve = 0.0;
  double total = 0.0;

  bool operator==(const EpochLoss&) const = default;
};

struct LossReport {
  std::vector<EpochLoss> epochs;
  std::string gradient_check = "skipped";  // skipped | passed
  double gradient_check_max_error = 0.0;
};

/// Symmetric InfoNCE over cosine similarities of matching columns.
///
/// S_ij = cos(a_i, p_j) / tau and the loss is the mean of the row-wise and
/// column-wise cross-entropies with the diagonal as targets. Gradients with
/// respect to the raw (unnormalized) columns are written when requested.
template <typename Scalar>
Scalar contrastive_loss(const MatrixX<Scalar>& anchors, const MatrixX<Scalar>& positives, Scalar tau,
                        MatrixX<Scalar>* d_anchors = nullptr, MatrixX<Scalar>* d_positives = nullptr) {
  using Mat = MatrixX<Scalar>;
  if (anchors.rows() != positives.rows() || anchors.cols() != positives.cols())
    throw Error(ErrorCode::DimensionMismatch, "anchor and positive batches differ in shape");
  if (!(tau > Scalar(0))) throw Error(ErrorCode::UsageError, "temperature must be positive");
  const Eigen::Index B = anchors.cols();
  if (d_anchors) d_anchors->setZero(anchors.rows(), B);
  if (d_positives) d_positives->setZero(positives.rows(), B);
  if (B == 0) return Scalar(0);
  Mat An(anchors.rows(), B), Pn(positives.rows(), B);
  for (Eigen::Index i = 0; i < B; ++i) {
    An.col(i) = l2_normalize(anchors.col(i));
    Pn.col(i) = l2_normalize(positives.col(i));
  }
  const Mat S = (An.transpose() * Pn) / tau;
  Mat R(B, B), C(B, B);
  Scalar row_loss = 0, col_loss = 0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const Scalar top = S.row(i).maxCoeff();
    R.row(i) = (S.row(i).array() - top).exp();
    const Scalar z = R.row(i).sum();
    R.row(i) /= z;
    row_loss += top + std::log(z) - S(i, i);
  }
  for (Eigen::Index j = 0; j < B; ++j) {
    const Scalar top = S.col(j).maxCoeff();
    C.col(j) = (S.col(j).array() - top).exp();
    const Scalar z = C.col(j).sum();
    C.col(j) /= z;
    col_loss += top + std::log(z) - S(j, j);
  }
  const Scalar loss = (row_loss + col_loss) / (Scalar(2) * static_cast<Scalar>(B));
  if (d_anchors || d_positives) {
    const Mat I = Mat::Identity(B, B);
    const Mat dCos = ((R - I) + (C - I)) / (Scalar(2) * static_cast<Scalar>(B) * tau);
    if (d_anchors) {
      const Mat dAn = Pn * dCos.transpose();
      for (Eigen::Index i = 0; i < B; ++i)
        d_anchors->col(i) = normalize_backward<Scalar>(anchors.col(i), dAn.col(i));
    }
    if (d_positives) {
      const Mat dPn = An * dCos;
      for (Eigen::Index i = 0; i < B; ++i)
        d_positives->col(i) = normalize_backward<Scalar>(positives.col(i), dPn.col(i));
    }
  }
  return loss;
}

struct ContrastivePair {
  std::int64_t id = 0;
  EmbeddingVector anchor;
  EmbeddingVector positive;
};

/// Positive pairs of one objective; negatives are the other pairs of the
/// same batch.
///   qa:       (h^V, h^Q)
///   cg:       (phi1(code), phi2(graph))
///   preserve: (phi2(graph), phi2(corrupt(graph)))
std::vector<ContrastivePair> build_pairs(const KnowledgeBase& kb, PairMode mode, double drop_rate, std::uint64_t seed,
                                         TextEncoder& encoder, const GnnParameters<double>& params);

/// Cached inputs of one knowledge entry for training.
struct TrainingExample {
  std::int64_t id = 0;
  ComposedSyntaxGraph graph;
  GraphInput<double> input;
  EmbeddingVector query_vec;
  EmbeddingVector code_vec;
};

std::vector<TrainingExample> prepare_examples(const KnowledgeBase& kb, EmbeddingCache& cache);

/// Seed of the corrupted view of entry `id` in epoch `epoch`.
std::uint64_t corruption_seed(std::uint64_t seed, int epoch, std::int64_t id);

/// Weighted loss of one batch. `corrupted[k]` is the corrupted view of
/// batch[k]. Gradients are accumulated into `grad` when given.
EpochLoss batch_objective(const GnnParameters<double>& params, const std::vector<const TrainingExample*>& batch,
                          const std::vector<GraphInput<double>>& corrupted, const TrainConfig& cfg,
                          GnnParameters<double>* grad);

struct GradientCheckResult {
  std::map<std::string, double> relative_error;
  double max_relative_error = 0.0;
  bool passed = false;
};

/// Compares batch_objective gradients against central differences, per
/// matrix: |g_analytic - g_numeric| / max(|g_analytic|, |g_numeric|).
/// Matrices whose gradients both sit below the rounding noise of the
/// difference quotient count as agreeing.
GradientCheckResult gradient_check(const GnnParameters<double>& params,
                                   const std::vector<const TrainingExample*>& batch,
                                   const std::vector<GraphInput<double>>& corrupted, const TrainConfig& cfg,
                                   double step = 1e-6, double tolerance = 1e-4);

/// Small random problem (5-node graphs, tiny widths) used to gate training.
GradientCheckResult probe_gradient_check(const GnnConfig& shape, const TrainConfig& cfg);

struct TrainResult {
  GnnParameters<double> params;
  LossReport report;
};

using EpochCallback = std::function<void(const EpochLoss&)>;

/// Mini-batch gradient descent on the weighted objectives. Deterministic
/// for a fixed (kb, params, cfg).
TrainResult train(const KnowledgeBase& kb, GnnParameters<double> params, const TrainConfig& cfg, TextEncoder& encoder,
                  const EpochCallback& on_epoch = {});

/// Fraction of entries whose own query retrieves them first among all
/// entries of the same language.
double qa_self_retrieval_accuracy(const KnowledgeBase& kb, TextEncoder& encoder);

}  // namespace codegrag
