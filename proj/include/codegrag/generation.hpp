#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "codegrag/knowledge_base.hpp"
#include "codegrag/problem.hpp"
#include "codegrag/syntax_graph.hpp"

namespace codegrag {

enum class RagMode { none, code_rag, graph_rag, cross_lingual_code_rag, cross_lingual_graph_rag };

std::string_view to_string(RagMode mode);
RagMode parse_rag_mode(std::string_view text);
bool uses_graph(RagMode mode);
bool is_cross_lingual(RagMode mode);
/// Language the knowledge pool is drawn from for a problem in `target`.
Language pool_language(RagMode mode, Language target);

inline constexpr std::string_view kSystemDelimiter = "<<<SYSTEM>>>";
inline constexpr std::string_view kKnowledgeDelimiter = "<<<KNOWLEDGE>>>";
inline constexpr std::string_view kProblemDelimiter = "<<<PROBLEM>>>";
inline constexpr std::string_view kTemplateVersion = "three-part-v1";

struct GenerationConfig {
  std::string endpoint;  // full chat-completions URL
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_tokens = 1024;
  double timeout_seconds = 120.0;
  int retries = 0;
  std::string api_key_env = "CODEGRAG_API_KEY";
  RagMode mode = RagMode::none;
  SummaryVariant variant = SummaryVariant::edge_type_topological;
};

struct PromptBundle {
  std::string system_text;
  std::string knowledge_text;
  std::string problem_text;
  std::string rendered;
};

std::string system_prompt(Language lang);

/// Renders knowledge for the configured mode from a retrieved entry.
std::string knowledge_section(const KnowledgeEntry& entry, RagMode mode, SummaryVariant variant);

/// system, knowledge and problem in that order, each after its delimiter.
/// The knowledge delimiter is omitted when there is no knowledge.
PromptBundle assemble_prompt(const Problem& problem, const KnowledgeEntry* knowledge, const GenerationConfig& cfg);

/// Splits a rendered prompt back into its sections.
PromptBundle parse_prompt(std::string_view rendered);

/// Chat-completion client, one request per call.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const PromptBundle& prompt) = 0;
};

class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(GenerationConfig cfg);
  std::string complete(const PromptBundle& prompt) override;

 private:
  GenerationConfig cfg_;
};

/// Request body for the chat-completion endpoint.
std::string chat_request_body(const PromptBundle& prompt, const GenerationConfig& cfg);

/// One completion from the configured endpoint. Throws LlmUnavailable or
/// LlmRefusal.
std::string generate(const PromptBundle& prompt, const GenerationConfig& cfg);

/// First fenced code block of a completion, else the whole text.
std::string extract_code(std::string_view completion);

}  // namespace codegrag
