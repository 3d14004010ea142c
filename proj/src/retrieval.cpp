#include "codegrag/retrieval.hpp"

#include <algorithm>

namespace codegrag {

QueryBundle build_query(const Problem& problem, TextEncoder& encoder, std::optional<Language> pool) {
  QueryBundle q;
  q.description = problem_description(problem);
  q.declaration = problem_signature(problem);
  if (q.description.empty())
    throw Error(ErrorCode::MissingDescription, "problem " + problem.task_id + " has no description");
  q.vector = encode_query(q.description, q.declaration, encoder);
  q.target_language = problem.language;
  q.pool_language = pool.value_or(problem.language);
  return q;
}

std::vector<RetrievalResult> retrieve_topk(const QueryBundle& query, const KnowledgeBase& kb, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < kb.entries.size(); ++i) {
    const auto& e = kb.entries[i];
    if (e.language != query.pool_language) continue;
    if (!e.fused_vec) throw Error(ErrorCode::MissingVectors, "entry " + std::to_string(e.id) + " is not indexed");
    scored.emplace_back(distance(query.vector, *e.fused_vec), i);
  }
  if (scored.empty())
    throw Error(ErrorCode::EmptyPool, "no knowledge entries in language " + std::string(to_string(query.pool_language)));
  const std::size_t n = std::min(k, scored.size());
  // Entries are sorted by id, so the index breaks ties by id.
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end());
  std::vector<RetrievalResult> out;
  for (std::size_t r = 0; r < n; ++r) out.push_back({scored[r].second, scored[r].first, kb.entries[scored[r].second]});
  return out;
}

RetrievalResult retrieve_top1(const QueryBundle& query, const KnowledgeBase& kb) {
  return retrieve_topk(query, kb, 1).front();
}

}  // namespace codegrag
