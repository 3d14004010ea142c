#include "codegrag/generation.hpp"

#include <cctype>
#include <cstdlib>

#include "httplib.h"
#include "json.hpp"
#include "url.hpp"

namespace codegrag {

namespace {

std::string lower(std::string_view text) {
  std::string s(text);
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string fence_tag(Language lang) { return lang == Language::cpp ? "cpp" : "python"; }

std::string language_name(Language lang) { return lang == Language::cpp ? "C++" : "Python"; }

std::string rstrip(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

}  // namespace

std::string_view to_string(RagMode mode) {
  switch (mode) {
    case RagMode::none: return "none";
    case RagMode::code_rag: return "code_rag";
    case RagMode::graph_rag: return "graph_rag";
    case RagMode::cross_lingual_code_rag: return "cross_lingual_code_rag";
    case RagMode::cross_lingual_graph_rag: return "cross_lingual_graph_rag";
  }
  return "unknown";
}

RagMode parse_rag_mode(std::string_view text) {
  std::string s = lower(text);
  for (auto& c : s)
    if (c == '-') c = '_';
  for (RagMode m : {RagMode::none, RagMode::code_rag, RagMode::graph_rag, RagMode::cross_lingual_code_rag,
                    RagMode::cross_lingual_graph_rag}) {
    if (s == to_string(m)) return m;
  }
  throw Error(ErrorCode::UsageError, "unknown generation mode '" + std::string(text) + "'");
}

bool uses_graph(RagMode mode) { return mode == RagMode::graph_rag || mode == RagMode::cross_lingual_graph_rag; }

bool is_cross_lingual(RagMode mode) {
  return mode == RagMode::cross_lingual_code_rag || mode == RagMode::cross_lingual_graph_rag;
}

Language pool_language(RagMode mode, Language target) {
  if (!is_cross_lingual(mode)) return target;
  return target == Language::cpp ? Language::python : Language::cpp;
}

std::string system_prompt(Language lang) {
  return "You are an expert " + language_name(lang) +
         " programmer. Complete the function given in the problem section. "
         "The knowledge section, when present, describes a solution to a related problem; "
         "use it as a hint about syntax and structure. "
         "Reply with the complete function in one fenced code block.";
}

std::string knowledge_section(const KnowledgeEntry& entry, RagMode mode, SummaryVariant variant) {
  switch (mode) {
    case RagMode::none: return "";
    case RagMode::code_rag:
    case RagMode::cross_lingual_code_rag:
      return "Code of a related " + language_name(entry.language) + " solution:\n```" + fence_tag(entry.language) +
             "\n" + rstrip(entry.code) + "\n```";
    case RagMode::graph_rag:
    case RagMode::cross_lingual_graph_rag:
      return "Composed syntax graph of a related " + language_name(entry.language) + " solution (" +
             std::string(to_string(variant)) + "):\n" + summarize_graph(entry.graph, variant).text;
  }
  return "";
}

PromptBundle assemble_prompt(const Problem& problem, const KnowledgeEntry* knowledge, const GenerationConfig& cfg) {
  PromptBundle b;
  b.system_text = system_prompt(problem.language);
  if (cfg.mode != RagMode::none) {
    if (!knowledge)
      throw Error(ErrorCode::MissingKnowledge,
                  "mode " + std::string(to_string(cfg.mode)) + " needs a retrieved entry for " + problem.task_id);
    b.knowledge_text = knowledge_section(*knowledge, cfg.mode, cfg.variant);
  }
  b.problem_text = rstrip(problem.prompt);
  if (b.problem_text.empty()) throw Error(ErrorCode::MissingDescription, "problem " + problem.task_id + " has no prompt");
  b.rendered = std::string(kSystemDelimiter) + "\n" + b.system_text + "\n";
  if (!b.knowledge_text.empty()) b.rendered += std::string(kKnowledgeDelimiter) + "\n" + b.knowledge_text + "\n";
  b.rendered += std::string(kProblemDelimiter) + "\n" + b.problem_text;
  return b;
}

PromptBundle parse_prompt(std::string_view rendered) {
  const std::string sys = std::string(kSystemDelimiter) + "\n";
  const std::string know = "\n" + std::string(kKnowledgeDelimiter) + "\n";
  const std::string prob = "\n" + std::string(kProblemDelimiter) + "\n";
  if (rendered.substr(0, sys.size()) != sys) throw Error(ErrorCode::UsageError, "prompt lacks the system section");
  const auto p = rendered.find(prob, sys.size());
  if (p == std::string_view::npos) throw Error(ErrorCode::UsageError, "prompt lacks the problem section");
  PromptBundle b;
  const auto k = rendered.substr(0, p).find(know, sys.size());
  if (k == std::string_view::npos) {
    b.system_text = std::string(rendered.substr(sys.size(), p - sys.size()));
  } else {
    b.system_text = std::string(rendered.substr(sys.size(), k - sys.size()));
    b.knowledge_text = std::string(rendered.substr(k + know.size(), p - k - know.size()));
  }
  b.problem_text = std::string(rendered.substr(p + prob.size()));
  b.rendered = std::string(rendered);
  return b;
}

std::string chat_request_body(const PromptBundle& prompt, const GenerationConfig& cfg) {
  nlohmann::ordered_json body;
  body["model"] = cfg.model;
  std::string user;
  if (!prompt.knowledge_text.empty()) user += std::string(kKnowledgeDelimiter) + "\n" + prompt.knowledge_text + "\n";
  user += std::string(kProblemDelimiter) + "\n" + prompt.problem_text;
  body["messages"] = nlohmann::ordered_json::array({{{"role", "system"}, {"content", prompt.system_text}},
                                                    {{"role", "user"}, {"content", user}}});
  body["temperature"] = cfg.temperature;
  body["max_tokens"] = cfg.max_tokens;
  return body.dump();
}

HttpLlmClient::HttpLlmClient(GenerationConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw Error(ErrorCode::UsageError, "generation needs an LLM endpoint URL");
}

std::string HttpLlmClient::complete(const PromptBundle& prompt) { return generate(prompt, cfg_); }

std::string generate(const PromptBundle& prompt, const GenerationConfig& cfg) {
  if (cfg.endpoint.empty()) throw Error(ErrorCode::UsageError, "generation needs an LLM endpoint URL");
  const auto [origin, path] = detail::split_url(cfg.endpoint);
  httplib::Client client(origin);
  client.set_connection_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
  client.set_read_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
  client.set_write_timeout(std::chrono::duration<double>(cfg.timeout_seconds));
  httplib::Headers headers;
  if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);
  const std::string body = chat_request_body(prompt, cfg);
  const int attempts = 1 + std::max(0, cfg.retries);
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto res = client.Post(path.empty() ? "/" : path, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw Error(ErrorCode::LlmUnavailable, "endpoint returned HTTP " + std::to_string(res->status) +
                                                 " (attempts=" + std::to_string(attempt) + ")");
    std::string content;
    try {
      const auto j = nlohmann::json::parse(res->body);
      const auto& message = j.at("choices").at(0).at("message");
      if (message.contains("content") && message.at("content").is_string()) content = message.at("content");
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::LlmRefusal, std::string("malformed completion: ") + ex.what());
    }
    if (rstrip(content).empty()) throw Error(ErrorCode::LlmRefusal, "endpoint returned an empty completion");
    return content;
  }
  throw Error(ErrorCode::LlmUnavailable,
              "request to " + cfg.endpoint + " failed: " + last_error + " (attempts=" + std::to_string(attempts) + ")");
}

std::string extract_code(std::string_view completion) {
  const auto open = completion.find("```");
  if (open != std::string_view::npos) {
    const auto line_end = completion.find('\n', open);
    if (line_end != std::string_view::npos) {
      const auto close = completion.find("```", line_end + 1);
      const auto body = completion.substr(line_end + 1, close == std::string_view::npos ? std::string_view::npos
                                                                                          : close - line_end - 1);
      return std::string(body);
    }
  }
  return std::string(completion);
}

}  // namespace codegrag
