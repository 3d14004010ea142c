#include "codegrag/syntax_graph.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <sstream>

#include "json.hpp"

#include "codegrag/rng.hpp"
#include "syntax/cpp_parser.hpp"
#include "syntax/graph_builder.hpp"
#include "syntax/python_parser.hpp"

namespace codegrag {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::vector<SyntaxEdge> select(const ComposedSyntaxGraph& g, EdgeCategory category) {
  std::vector<SyntaxEdge> out;
  for (const auto& e : g.edges)
    if (categorize_edge(e.edge_type) == category) out.push_back(e);
  return out;
}

void append_quoted_list(std::ostringstream& os, const char* key, const std::vector<std::string>& items) {
  os << key << "=[";
  for (std::size_t i = 0; i < items.size(); ++i) os << (i ? ", " : "") << "'" << items[i] << "'";
  os << "]";
}

}  // namespace

std::string_view to_string(Language lang) { return lang == Language::cpp ? "cpp" : "python"; }

Language parse_language(std::string_view text) {
  const std::string t = lower(text);
  if (t == "cpp" || t == "c++" || t == "cxx") return Language::cpp;
  if (t == "python" || t == "py") return Language::python;
  throw Error(ErrorCode::UnsupportedLanguage, "unsupported language '" + std::string(text) + "'");
}

NodeId ComposedSyntaxGraph::add_node(std::string node_type, std::string node_name, bool temporary) {
  const auto id = static_cast<NodeId>(nodes.size());
  nodes.push_back(SyntaxNode{id, std::move(node_type), std::move(node_name), temporary});
  return id;
}

void ComposedSyntaxGraph::add_edge(NodeId src, NodeId dst, std::string edge_type) {
  ++edge_type_counts[edge_type];
  edges.push_back(SyntaxEdge{src, dst, std::move(edge_type)});
}

void ComposedSyntaxGraph::recount() { edge_type_counts = edge_histogram(edges); }

void ComposedSyntaxGraph::validate() const {
  const auto n = static_cast<NodeId>(nodes.size());
  for (NodeId i = 0; i < n; ++i) {
    const auto& node = nodes[static_cast<std::size_t>(i)];
    if (node.id != i) throw Error(ErrorCode::MalformedGraphData, "node ids are not dense at " + std::to_string(i));
    if (node.node_type.empty()) throw Error(ErrorCode::MalformedGraphData, "empty node type at " + std::to_string(i));
  }
  for (const auto& e : edges) {
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n)
      throw Error(ErrorCode::MalformedGraphData, "edge endpoint out of range");
    if (e.edge_type.empty()) throw Error(ErrorCode::MalformedGraphData, "empty edge type");
  }
  if (edge_type_counts != edge_histogram(edges))
    throw Error(ErrorCode::MalformedGraphData, "edge_type_counts disagrees with edges");
}

std::map<std::string, std::int64_t> edge_histogram(const std::vector<SyntaxEdge>& edges) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& e : edges) ++counts[e.edge_type];
  return counts;
}

EdgeCategory categorize_edge(std::string_view edge_type) {
  if (edge_type == "next" || edge_type == "trueNext" || edge_type == "falseNext") return EdgeCategory::control;
  if (edge_type == "read" || edge_type == "write") return EdgeCategory::read_write;
  return EdgeCategory::data_flow;
}

ComposedSyntaxGraph extract_graph(const SourceUnit& src) {
  if (blank(src.code)) throw Error(ErrorCode::ExtractionFailed, "source is empty");
  const auto unit = src.language == Language::cpp ? syntax::parse_cpp(src.code) : syntax::parse_python(src.code);
  const bool any = std::any_of(unit.functions.begin(), unit.functions.end(),
                               [](const syntax::Function& f) { return !f.name.empty(); });
  if (!any) throw Error(ErrorCode::ExtractionFailed, "no function body could be recovered");
  return syntax::build_graph(unit, src.language);
}

std::vector<SyntaxEdge> extract_control_flow(const SourceUnit& src) {
  return select(extract_graph(src), EdgeCategory::control);
}

std::vector<SyntaxEdge> extract_data_flow(const SourceUnit& src) {
  return select(extract_graph(src), EdgeCategory::data_flow);
}

std::vector<SyntaxEdge> extract_read_write(const SourceUnit& src) {
  return select(extract_graph(src), EdgeCategory::read_write);
}

std::string_view to_string(SummaryVariant variant) {
  switch (variant) {
    case SummaryVariant::edge_type_only: return "edge_type_only";
    case SummaryVariant::edge_type_node_name: return "edge_type_node_name";
    case SummaryVariant::edge_type_node_type: return "edge_type_node_type";
    case SummaryVariant::edge_type_topological: return "edge_type_topological";
  }
  return "edge_type_topological";
}

SummaryVariant parse_summary_variant(std::string_view text) {
  const std::string t = lower(text);
  for (auto v : {SummaryVariant::edge_type_only, SummaryVariant::edge_type_node_name, SummaryVariant::edge_type_node_type,
                 SummaryVariant::edge_type_topological}) {
    if (t == to_string(v)) return v;
  }
  if (t == "topological") return SummaryVariant::edge_type_topological;
  if (t == "node_name") return SummaryVariant::edge_type_node_name;
  if (t == "node_type") return SummaryVariant::edge_type_node_type;
  if (t == "edge_type") return SummaryVariant::edge_type_only;
  throw Error(ErrorCode::UsageError, "unknown summary variant '" + std::string(text) + "'");
}

GraphSummary summarize_graph(const ComposedSyntaxGraph& g, SummaryVariant variant) {
  const auto counts = edge_histogram(g.edges);
  std::ostringstream os;
  if (variant == SummaryVariant::edge_type_topological) {
    os << "Graph(num_nodes={'node': " << g.nodes.size() << "},\n      num_edges={";
    bool first = true;
    for (const auto& [type, count] : counts) {
      os << (first ? "" : ", ") << "('node', '" << type << "', 'node'): " << count;
      first = false;
    }
    os << "},\n      metagraph=[";
    first = true;
    for (const auto& [type, count] : counts) {
      os << (first ? "" : ", ") << "('node', 'node', '" << type << "')";
      first = false;
    }
    os << "])";
    return {variant, os.str()};
  }
  std::vector<std::string> types;
  for (const auto& [type, count] : counts) types.push_back(type);
  append_quoted_list(os, "edge_types", types);
  if (variant == SummaryVariant::edge_type_node_name || variant == SummaryVariant::edge_type_node_type) {
    std::vector<std::string> items;
    for (const auto& n : g.nodes)
      items.push_back(variant == SummaryVariant::edge_type_node_name ? n.node_name : n.node_type);
    os << "\n";
    append_quoted_list(os, variant == SummaryVariant::edge_type_node_name ? "node_names" : "node_types", items);
  }
  return {variant, os.str()};
}

ComposedSyntaxGraph corrupt_graph(const ComposedSyntaxGraph& g, double drop_rate, std::uint64_t seed) {
  if (!(drop_rate >= 0.0 && drop_rate <= 1.0)) throw Error(ErrorCode::UsageError, "drop rate must lie in [0, 1]");
  ComposedSyntaxGraph out;
  out.nodes = g.nodes;
  out.partial = g.partial;
  std::mt19937_64 gen(seed);
  for (const auto& e : g.edges) {
    const bool drop = drop_rate > 0.0 && uniform01(gen) < drop_rate;
    if (!drop) out.edges.push_back(e);
  }
  out.recount();
  return out;
}

std::string serialize_graph(const ComposedSyntaxGraph& g) {
  nlohmann::ordered_json j;
  j["format"] = "codegrag-graph";
  j["version"] = 1;
  j["partial"] = g.partial;
  auto nodes = nlohmann::ordered_json::array();
  for (const auto& n : g.nodes) {
    nodes.push_back({{"id", n.id}, {"type", n.node_type}, {"name", n.node_name}, {"temporary", n.is_temporary}});
  }
  j["nodes"] = std::move(nodes);
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : g.edges) edges.push_back({{"src", e.src}, {"dst", e.dst}, {"type", e.edge_type}});
  j["edges"] = std::move(edges);
  j["edge_type_counts"] = g.edge_type_counts;
  j["rendering"] = summarize_graph(g, SummaryVariant::edge_type_topological).text;
  return j.dump();
}

ComposedSyntaxGraph deserialize_graph(std::string_view bytes) {
  ComposedSyntaxGraph g;
  try {
    const auto j = nlohmann::json::parse(bytes);
    if (j.value("format", std::string()) != "codegrag-graph")
      throw Error(ErrorCode::MalformedGraphData, "not a graph record");
    if (j.at("version").get<int>() != 1) throw Error(ErrorCode::MalformedGraphData, "unsupported graph version");
    g.partial = j.value("partial", false);
    for (const auto& n : j.at("nodes")) {
      g.nodes.push_back(SyntaxNode{n.at("id").get<NodeId>(), n.at("type").get<std::string>(),
                                   n.at("name").get<std::string>(), n.at("temporary").get<bool>()});
    }
    for (const auto& e : j.at("edges")) {
      g.edges.push_back(
          SyntaxEdge{e.at("src").get<NodeId>(), e.at("dst").get<NodeId>(), e.at("type").get<std::string>()});
    }
    g.edge_type_counts = j.at("edge_type_counts").get<std::map<std::string, std::int64_t>>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::MalformedGraphData, ex.what());
  }
  g.validate();
  return g;
}

}  // namespace codegrag
