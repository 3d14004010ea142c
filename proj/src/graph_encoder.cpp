#include "codegrag/graph_encoder.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace codegrag {

namespace {

constexpr const char* kCheckpointFormat = "codegrag-gnn";
constexpr int kCheckpointVersion = 1;

nlohmann::ordered_json matrix_to_json(const MatrixX<double>& m) {
  nlohmann::ordered_json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data(m.data(), m.data() + m.size());
  j["data"] = std::move(data);
  return j;
}

MatrixX<double> matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  if (j.at("rows").get<Eigen::Index>() != rows || j.at("cols").get<Eigen::Index>() != cols)
    throw Error(ErrorCode::ShapeMismatch, "checkpoint matrix " + name + " has unexpected shape");
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw Error(ErrorCode::ShapeMismatch, "checkpoint matrix " + name + " has wrong element count");
  MatrixX<double> m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  if (!m.allFinite()) throw Error(ErrorCode::ShapeMismatch, "checkpoint matrix " + name + " is not finite");
  return m;
}

}  // namespace

std::string query_text(const std::string& description, const std::string& declaration) {
  return description + "\n" + declaration;
}

EmbeddingVector encode_query(const std::string& description, const std::string& declaration, TextEncoder& encoder) {
  if (description.empty()) throw Error(ErrorCode::MissingDescription, "query needs a description");
  return embed_texts({query_text(description, declaration)}, encoder).front();
}

std::string checkpoint_to_string(const GnnParameters<double>& params) {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  const auto& c = params.config;
  j["config"] = {{"d_in", c.d_in},
                 {"d", c.d},
                 {"layers", c.layers},
                 {"heads", c.heads},
                 {"seed", c.seed},
                 {"fusion", c.fusion == FusionKind::learned ? "learned" : "mean"}};
  nlohmann::ordered_json mats;
  params.for_each([&](const std::string& name, const MatrixX<double>& m) { mats[name] = matrix_to_json(m); });
  j["matrices"] = std::move(mats);
  return j.dump();
}

GnnParameters<double> checkpoint_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::IoFailure, std::string("checkpoint is not valid JSON: ") + ex.what());
  }
  try {
    if (j.value("format", std::string()) != kCheckpointFormat)
      throw Error(ErrorCode::SchemaVersionMismatch, "not an encoder checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw Error(ErrorCode::SchemaVersionMismatch,
                  "checkpoint version " + std::to_string(j.at("version").get<int>()) + " is not supported");
    const auto& cj = j.at("config");
    GnnConfig cfg;
    cfg.d_in = cj.at("d_in").get<int>();
    cfg.d = cj.at("d").get<int>();
    cfg.layers = cj.at("layers").get<int>();
    cfg.heads = cj.at("heads").get<int>();
    cfg.seed = cj.at("seed").get<std::uint64_t>();
    cfg.fusion = cj.at("fusion").get<std::string>() == "learned" ? FusionKind::learned : FusionKind::mean;
    auto params = init_parameters<double>(cfg);
    const auto& mats = j.at("matrices");
    params.for_each([&](const std::string& name, MatrixX<double>& m) {
      if (!mats.contains(name)) throw Error(ErrorCode::ShapeMismatch, "checkpoint lacks matrix " + name);
      m = matrix_from_json(mats.at(name), m.rows(), m.cols(), name);
    });
    return params;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::IoFailure, std::string("malformed checkpoint: ") + ex.what());
  }
}

void save_checkpoint(const GnnParameters<double>& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write checkpoint " + path);
  out << checkpoint_to_string(params) << "\n";
  if (!out) throw Error(ErrorCode::IoFailure, "failed writing checkpoint " + path);
}

GnnParameters<double> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_string(ss.str());
}

EmbeddingVector encode_graph_vector(const GnnParameters<double>& params, const ComposedSyntaxGraph& g,
                                    EmbeddingCache& cache) {
  if (cache.dim() != params.config.d_in)
    throw Error(ErrorCode::DimensionMismatch, "encoder dim " + std::to_string(cache.dim()) +
                                                  " does not match checkpoint d_in " +
                                                  std::to_string(params.config.d_in));
  const auto input = init_states<double>(g, cache);
  return encode_graph<double>(params, input);
}

}  // namespace codegrag
