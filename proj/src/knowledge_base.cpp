#include "codegrag/knowledge_base.hpp"

#include <fstream>
#include <sstream>

#include "codegrag/problem.hpp"
#include "json.hpp"

namespace codegrag {

namespace {

using ojson = nlohmann::ordered_json;

ojson vector_to_json(const std::optional<EmbeddingVector>& v) {
  if (!v) return nullptr;
  return std::vector<double>(v->data(), v->data() + v->size());
}

std::optional<EmbeddingVector> vector_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  const auto data = j.get<std::vector<double>>();
  EmbeddingVector v(static_cast<Eigen::Index>(data.size()));
  std::copy(data.begin(), data.end(), v.data());
  return v;
}

ojson entry_to_json(const KnowledgeEntry& e) {
  ojson j;
  j["id"] = e.id;
  j["language"] = std::string(to_string(e.language));
  j["origin"] = e.origin;
  j["description"] = e.description;
  j["declaration"] = e.declaration;
  j["code"] = e.code;
  j["graph"] = ojson::parse(serialize_graph(e.graph));
  j["code_vec"] = vector_to_json(e.code_vec);
  j["graph_vec"] = vector_to_json(e.graph_vec);
  j["fused_vec"] = vector_to_json(e.fused_vec);
  return j;
}

KnowledgeEntry entry_from_json(const nlohmann::json& j) {
  KnowledgeEntry e;
  e.id = j.at("id").get<std::int64_t>();
  e.language = parse_language(j.at("language").get<std::string>());
  e.origin = j.value("origin", std::string());
  e.description = j.value("description", std::string());
  e.declaration = j.value("declaration", std::string());
  e.code = j.at("code").get<std::string>();
  e.graph = deserialize_graph(j.at("graph").dump());
  e.code_vec = vector_from_json(j.value("code_vec", nlohmann::json()));
  e.graph_vec = vector_from_json(j.value("graph_vec", nlohmann::json()));
  e.fused_vec = vector_from_json(j.value("fused_vec", nlohmann::json()));
  return e;
}

}  // namespace

CorpusItem corpus_item_from_json(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::IoFailure, std::string("malformed corpus record: ") + ex.what());
  }
  CorpusItem item;
  if (j.contains("code")) {
    item.source.code = j.at("code").get<std::string>();
    item.source.language = parse_language(j.at("language").get<std::string>());
    item.description = j.value("description", std::string());
    item.declaration = j.value("declaration", std::string());
    const std::string id = j.value("task_id", std::string());
    item.source.origin = id;
    item.key = task_key(id);
    return item;
  }
  if (!j.contains("canonical_solution")) throw Error(ErrorCode::IoFailure, "corpus record has neither code nor canonical_solution");
  const Problem p = problem_from_json_line(line);
  item.source.code = p.prompt + p.canonical_solution;
  item.source.language = p.language;
  item.source.origin = p.task_id;
  item.description = problem_description(p);
  item.declaration = problem_signature(p);
  item.key = task_key(p.task_id);
  return item;
}

std::vector<CorpusItem> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read corpus " + path);
  std::vector<CorpusItem> items;
  for (std::string line; std::getline(in, line);) {
    if (trim(line).empty()) continue;
    items.push_back(corpus_item_from_json(line));
  }
  return items;
}

std::vector<CorpusItem> exclude_keys(std::vector<CorpusItem> items, const std::set<std::string>& keys) {
  std::erase_if(items, [&](const CorpusItem& item) { return !item.key.empty() && keys.count(item.key) > 0; });
  return items;
}

KnowledgeBase build_kb(const std::vector<CorpusItem>& corpus, const KbBuildOptions& options, TextEncoder* encoder,
                       const GnnParameters<double>* params) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus has no items");
  if (options.embed && (!encoder || !params))
    throw Error(ErrorCode::UsageError, "embedding a knowledge base needs an encoder and parameters");
  KnowledgeBase kb;
  kb.meta.corpus_label = options.corpus_label;
  for (const auto& item : corpus) {
    ++kb.meta.attempted;
    ComposedSyntaxGraph g;
    try {
      g = extract_graph(item.source);
    } catch (const Error& ex) {
      if (ex.code() == ErrorCode::ExtractionFailed || ex.code() == ErrorCode::UnsupportedLanguage) continue;
      throw;
    }
    KnowledgeEntry e;
    e.id = static_cast<std::int64_t>(kb.entries.size());
    e.code = item.source.code;
    e.graph = std::move(g);
    e.description = item.description;
    e.declaration = item.declaration;
    e.language = item.source.language;
    e.origin = item.source.origin.value_or("");
    kb.entries.push_back(std::move(e));
    ++kb.meta.succeeded;
  }
  if (options.embed) index_kb(kb, *encoder, *params);
  return kb;
}

void index_kb(KnowledgeBase& kb, TextEncoder& encoder, const GnnParameters<double>& params) {
  if (encoder.dim() != params.config.d_in)
    throw Error(ErrorCode::DimensionMismatch, "encoder dim " + std::to_string(encoder.dim()) +
                                                  " differs from encoder input dim " +
                                                  std::to_string(params.config.d_in));
  std::vector<std::string> codes;
  for (const auto& e : kb.entries) codes.push_back(e.code);
  auto code_vecs = embed_texts(codes, encoder);
  EmbeddingCache cache(encoder);
  for (std::size_t i = 0; i < kb.entries.size(); ++i) {
    auto& e = kb.entries[i];
    e.code_vec = std::move(code_vecs[i]);
    e.graph_vec = encode_graph_vector(params, e.graph, cache);
    e.fused_vec = fuse<double>(*e.code_vec, *e.graph_vec, &params);
  }
  kb.meta.encoder_fingerprint = encoder.fingerprint();
}

const KnowledgeEntry& lookup(const KnowledgeBase& kb, std::int64_t i) {
  if (i < 0 || i >= static_cast<std::int64_t>(kb.entries.size()))
    throw Error(ErrorCode::IndexOutOfRange,
                "entry " + std::to_string(i) + " outside [0, " + std::to_string(kb.entries.size()) + ")");
  return kb.entries[static_cast<std::size_t>(i)];
}

std::string kb_to_string(const KnowledgeBase& kb) {
  ojson header;
  header["kind"] = kKbKind;
  header["schema_version"] = kKbSchemaVersion;
  header["build_meta"] = {{"corpus_label", kb.meta.corpus_label},
                          {"extraction_attempted", kb.meta.attempted},
                          {"extraction_succeeded", kb.meta.succeeded},
                          {"encoder_fingerprint", kb.meta.encoder_fingerprint}};
  header["count"] = kb.entries.size();
  std::string out = header.dump() + "\n";
  for (const auto& e : kb.entries) out += entry_to_json(e).dump() + "\n";
  return out;
}

KnowledgeBase kb_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoFailure, "knowledge base file is empty");
  KnowledgeBase kb;
  std::size_t count = 0;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.value("kind", std::string()) != kKbKind)
      throw Error(ErrorCode::SchemaVersionMismatch, "not a knowledge base file");
    const int version = header.at("schema_version").get<int>();
    if (version != kKbSchemaVersion)
      throw Error(ErrorCode::SchemaVersionMismatch, "knowledge base schema " + std::to_string(version) +
                                                        ", expected " + std::to_string(kKbSchemaVersion));
    const auto& meta = header.at("build_meta");
    kb.meta.corpus_label = meta.value("corpus_label", std::string());
    kb.meta.attempted = meta.value("extraction_attempted", std::int64_t{0});
    kb.meta.succeeded = meta.value("extraction_succeeded", std::int64_t{0});
    kb.meta.encoder_fingerprint = meta.value("encoder_fingerprint", std::string());
    count = header.at("count").get<std::size_t>();
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      kb.entries.push_back(entry_from_json(nlohmann::json::parse(line)));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::IoFailure, std::string("malformed knowledge base: ") + ex.what());
  }
  if (kb.entries.size() != count)
    throw Error(ErrorCode::IoFailure, "knowledge base declares " + std::to_string(count) + " entries, found " +
                                          std::to_string(kb.entries.size()));
  for (std::size_t i = 0; i < kb.entries.size(); ++i) {
    if (kb.entries[i].id != static_cast<std::int64_t>(i))
      throw Error(ErrorCode::IoFailure, "knowledge base ids are not dense and sorted");
  }
  return kb;
}

void save_kb(const KnowledgeBase& kb, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write knowledge base " + path);
  out << kb_to_string(kb);
  if (!out) throw Error(ErrorCode::IoFailure, "write to " + path + " failed");
}

KnowledgeBase load_kb(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read knowledge base " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return kb_from_string(ss.str());
}

}  // namespace codegrag
