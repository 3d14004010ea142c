#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "codegrag/embedding.hpp"
#include "codegrag/knowledge_base.hpp"
#include "codegrag/problem.hpp"

namespace codegrag {

struct QueryBundle {
  std::string description;
  std::string declaration;
  EmbeddingVector vector;
  Language target_language = Language::cpp;
  Language pool_language = Language::cpp;
};

/// h^Q from the problem's description and signature. The pool language
/// defaults to the problem's own language.
QueryBundle build_query(const Problem& problem, TextEncoder& encoder, std::optional<Language> pool = std::nullopt);

/// 1 - cos(a, b), in [0, 2]; 1 when either side is zero.
template <typename A, typename B>
typename A::Scalar distance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using Scalar = typename A::Scalar;
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "distance between vectors of different dims");
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return Scalar(1);
  const Scalar c = std::clamp(a.dot(b) / (na * nb), Scalar(-1), Scalar(1));
  return Scalar(1) - c;
}

struct RetrievalResult {
  std::size_t index = 0;
  double distance = 0.0;
  KnowledgeEntry entry;
};

/// Exact scan over entries in the pool language; ties go to the lower id.
RetrievalResult retrieve_top1(const QueryBundle& query, const KnowledgeBase& kb);
std::vector<RetrievalResult> retrieve_topk(const QueryBundle& query, const KnowledgeBase& kb, std::size_t k);

}  // namespace codegrag
