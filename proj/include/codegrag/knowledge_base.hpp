#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "codegrag/embedding.hpp"
#include "codegrag/graph_encoder.hpp"
#include "codegrag/syntax_graph.hpp"

namespace codegrag {

struct KnowledgeEntry {
  std::int64_t id = 0;
  std::string code;
  ComposedSyntaxGraph graph;
  std::string description;
  std::string declaration;
  Language language = Language::cpp;
  std::string origin;
  std::optional<EmbeddingVector> code_vec;
  std::optional<EmbeddingVector> graph_vec;
  std::optional<EmbeddingVector> fused_vec;

  bool operator==(const KnowledgeEntry&) const = default;
};

struct BuildMeta {
  std::string corpus_label;
  std::int64_t attempted = 0;
  std::int64_t succeeded = 0;
  std::string encoder_fingerprint;

  bool operator==(const BuildMeta&) const = default;
};

struct KnowledgeBase {
  std::vector<KnowledgeEntry> entries;
  BuildMeta meta;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  bool operator==(const KnowledgeBase&) const = default;
};

/// One pool item: a code block plus the text a query would carry.
struct CorpusItem {
  SourceUnit source;
  std::string description;
  std::string declaration;
  std::string key;  // task key used for disjointness against evaluation problems
};

/// Accepts records {code, language, description, declaration, task_id}
/// or HumanEval-X records {task_id, prompt, canonical_solution, ...}.
std::vector<CorpusItem> load_corpus(const std::string& path);
CorpusItem corpus_item_from_json(const std::string& line);

/// Drops items whose key is in `keys`.
std::vector<CorpusItem> exclude_keys(std::vector<CorpusItem> items, const std::set<std::string>& keys);

struct KbBuildOptions {
  std::string corpus_label = "corpus";
  bool embed = false;
};

/// Extracts one entry per item; failed extractions are skipped and counted.
/// With options.embed, `encoder` and `params` must be given.
KnowledgeBase build_kb(const std::vector<CorpusItem>& corpus, const KbBuildOptions& options,
                       TextEncoder* encoder = nullptr, const GnnParameters<double>* params = nullptr);

/// Recomputes code_vec, graph_vec and fused_vec for every entry.
void index_kb(KnowledgeBase& kb, TextEncoder& encoder, const GnnParameters<double>& params);

const KnowledgeEntry& lookup(const KnowledgeBase& kb, std::int64_t i);

inline constexpr const char* kKbKind = "codegrag-kb";
inline constexpr int kKbSchemaVersion = 1;

void save_kb(const KnowledgeBase& kb, const std::string& path);
KnowledgeBase load_kb(const std::string& path);
std::string kb_to_string(const KnowledgeBase& kb);
KnowledgeBase kb_from_string(const std::string& text);

}  // namespace codegrag
