#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "codegrag/error.hpp"

namespace codegrag {

enum class Language { cpp, python };

std::string_view to_string(Language lang);
/// Accepts "cpp", "c++", "python", "py" (case-insensitive).
Language parse_language(std::string_view text);

struct SourceUnit {
  std::string code;
  Language language = Language::cpp;
  std::optional<std::string> origin;
};

using NodeId = std::int32_t;

struct SyntaxNode {
  NodeId id = 0;
  std::string node_type;
  std::string node_name;
  bool is_temporary = false;

  bool operator==(const SyntaxNode&) const = default;
};

struct SyntaxEdge {
  NodeId src = 0;
  NodeId dst = 0;
  std::string edge_type;

  bool operator==(const SyntaxEdge&) const = default;
};

/// Typed-node, typed-edge graph of one code block: AST-child/operation
/// edges, function edges, control flow and read/write flow in one edge list.
struct ComposedSyntaxGraph {
  std::vector<SyntaxNode> nodes;
  std::vector<SyntaxEdge> edges;
  std::map<std::string, std::int64_t> edge_type_counts;
  /// Set when the front-end skipped unparseable regions.
  bool partial = false;

  NodeId add_node(std::string node_type, std::string node_name, bool temporary = false);
  void add_edge(NodeId src, NodeId dst, std::string edge_type);
  /// Rebuilds edge_type_counts from edges.
  void recount();
  /// Checks ids, endpoints and the histogram. Throws MalformedGraphData.
  void validate() const;

  bool operator==(const ComposedSyntaxGraph&) const = default;
};

std::map<std::string, std::int64_t> edge_histogram(const std::vector<SyntaxEdge>& edges);

enum class EdgeCategory { control, read_write, data_flow };
EdgeCategory categorize_edge(std::string_view edge_type);

ComposedSyntaxGraph extract_graph(const SourceUnit& src);
std::vector<SyntaxEdge> extract_control_flow(const SourceUnit& src);
std::vector<SyntaxEdge> extract_data_flow(const SourceUnit& src);
std::vector<SyntaxEdge> extract_read_write(const SourceUnit& src);

enum class SummaryVariant {
  edge_type_only,
  edge_type_node_name,
  edge_type_node_type,
  edge_type_topological,
};

std::string_view to_string(SummaryVariant variant);
SummaryVariant parse_summary_variant(std::string_view text);

struct GraphSummary {
  SummaryVariant variant = SummaryVariant::edge_type_topological;
  std::string text;
};

GraphSummary summarize_graph(const ComposedSyntaxGraph& g, SummaryVariant variant);

/// Drops each edge independently with probability drop_rate; nodes are kept.
ComposedSyntaxGraph corrupt_graph(const ComposedSyntaxGraph& g, double drop_rate, std::uint64_t seed);

std::string serialize_graph(const ComposedSyntaxGraph& g);
ComposedSyntaxGraph deserialize_graph(std::string_view bytes);

}  // namespace codegrag
