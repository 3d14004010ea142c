#include "codegrag/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "codegrag/embedding.hpp"
#include "codegrag/evaluation.hpp"
#include "codegrag/generation.hpp"
#include "codegrag/graph_encoder.hpp"
#include "codegrag/knowledge_base.hpp"
#include "codegrag/problem.hpp"
#include "codegrag/retrieval.hpp"
#include "codegrag/training.hpp"
#include "json.hpp"

namespace codegrag::cli {

namespace {

using ojson = nlohmann::ordered_json;

struct EncoderOptions {
  std::string url;
  int dim = kFallbackDim;
  double timeout = 30.0;
};

struct ModelOptions {
  std::string ckpt;
  int hidden = 128;
  int layers = 2;
  int heads = 1;
  std::string fusion = "learned";
  std::uint64_t seed = 7;
};

struct Options {
  EncoderOptions encoder;
  ModelOptions model;

  // extract-graph
  std::string lang;
  std::string variant = "edge_type_topological";
  std::string format = "summary";
  std::string file;

  // shared paths
  std::string corpus, kb, out, problems, generations, kb_out, prompts_out, generations_out;

  // build-kb
  bool embed = false;
  bool allow_self_retrieval = false;
  std::string exclude_problems;
  std::string label;

  // train-gnn
  TrainConfig train;

  // retrieve
  std::string pool_lang;
  std::size_t k = 1;

  // generate
  std::string mode = "none";
  std::string llm_url;
  std::string model_id = "gpt-3.5-turbo";
  int max_tokens = 1024;
  double llm_timeout = 120.0;
  int retries = 0;

  // evaluate
  double timeout = 10.0;
  int jobs = 1;
};

class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err) {}
  void emit(ojson record) { err_ << record.dump() << "\n" << std::flush; }
  void event(const std::string& name, ojson fields = ojson::object()) {
    ojson rec;
    rec["event"] = name;
    for (auto& [k, v] : fields.items()) rec[k] = v;
    emit(std::move(rec));
  }

 private:
  std::ostream& err_;
};

std::unique_ptr<TextEncoder> open_encoder(const EncoderOptions& o) {
  EncoderConfig cfg;
  if (!o.url.empty()) {
    cfg.provider = EncoderProvider::remote;
    cfg.endpoint = o.url;
    cfg.dim = 0;
  }
  if (o.url.empty()) cfg.dim = o.dim;
  cfg.timeout_seconds = o.timeout;
  return make_encoder(cfg);
}

GnnParameters<double> open_params(const ModelOptions& m, int d_in) {
  if (!m.ckpt.empty()) {
    auto p = load_checkpoint(m.ckpt);
    if (p.config.d_in != d_in)
      throw Error(ErrorCode::DimensionMismatch, "checkpoint d_in " + std::to_string(p.config.d_in) +
                                                    " differs from encoder dim " + std::to_string(d_in));
    return p;
  }
  GnnConfig cfg;
  cfg.d_in = d_in;
  cfg.d = m.hidden;
  cfg.layers = m.layers;
  cfg.heads = m.heads;
  cfg.seed = m.seed;
  if (m.fusion == "learned") cfg.fusion = FusionKind::learned;
  else if (m.fusion != "mean") throw Error(ErrorCode::UsageError, "fusion must be mean or learned");
  return init_parameters<double>(cfg);
}

ojson model_echo(const ModelOptions& m) {
  return {{"ckpt", m.ckpt}, {"hidden", m.hidden}, {"layers", m.layers}, {"heads", m.heads},
          {"fusion", m.fusion}, {"seed", m.seed}};
}

ojson encoder_echo(const EncoderOptions& e, const TextEncoder* enc) {
  ojson j = {{"url", e.url}, {"dim", enc ? enc->dim() : e.dim}};
  if (enc) j["fingerprint"] = enc->fingerprint();
  return j;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path);
}

bool kb_indexed(const KnowledgeBase& kb) {
  for (const auto& e : kb.entries)
    if (!e.fused_vec) return false;
  return true;
}

std::optional<Language> optional_language(const std::string& text) {
  if (text.empty()) return std::nullopt;
  return parse_language(text);
}

std::vector<Problem> read_problems(const std::string& path, const std::string& lang) {
  auto problems = load_problems(path);
  if (const auto l = optional_language(lang)) {
    std::erase_if(problems, [&](const Problem& p) { return p.language != *l; });
  }
  std::sort(problems.begin(), problems.end(),
            [](const Problem& a, const Problem& b) { return task_id_less(a.task_id, b.task_id); });
  return problems;
}

// Builds or loads an indexed knowledge base for the retrieval stages.
KnowledgeBase prepare_kb(const Options& o, const std::vector<Problem>& problems, TextEncoder& encoder,
                         const GnnParameters<double>& params, Logger& log) {
  KnowledgeBase kb;
  if (!o.kb.empty()) {
    kb = load_kb(o.kb);
    if (!kb_indexed(kb) || !o.model.ckpt.empty()) index_kb(kb, encoder, params);
    log.event("kb_loaded", {{"path", o.kb}, {"entries", kb.size()}});
    return kb;
  }
  if (o.corpus.empty()) throw Error(ErrorCode::UsageError, "a retrieval mode needs --kb or --corpus");
  auto corpus = load_corpus(o.corpus);
  const std::size_t before = corpus.size();
  if (!o.allow_self_retrieval) {
    std::set<std::string> keys;
    for (const auto& p : problems) keys.insert(task_key(p.task_id));
    corpus = exclude_keys(std::move(corpus), keys);
  }
  KbBuildOptions bo;
  bo.corpus_label = o.label.empty() ? o.corpus : o.label;
  bo.embed = true;
  kb = build_kb(corpus, bo, &encoder, &params);
  log.event("kb_built", {{"corpus", o.corpus},
                         {"excluded", before - corpus.size()},
                         {"attempted", kb.meta.attempted},
                         {"succeeded", kb.meta.succeeded}});
  return kb;
}

struct GenerationRecord {
  std::string task_id;
  std::string completion;
  std::string raw;
  std::string prompt;
  std::optional<std::int64_t> retrieved_id;
  double distance = 0.0;
};

std::vector<GenerationRecord> run_generation(const Options& o, const std::vector<Problem>& problems,
                                             const KnowledgeBase* kb, TextEncoder& encoder, Logger& log) {
  GenerationConfig gc;
  gc.endpoint = o.llm_url;
  gc.model = o.model_id;
  gc.max_tokens = o.max_tokens;
  gc.timeout_seconds = o.llm_timeout;
  gc.retries = o.retries;
  gc.mode = parse_rag_mode(o.mode);
  gc.variant = parse_summary_variant(o.variant);
  HttpLlmClient client(gc);
  std::vector<GenerationRecord> records;
  for (const auto& p : problems) {
    GenerationRecord rec;
    rec.task_id = p.task_id;
    std::optional<RetrievalResult> hit;
    if (gc.mode != RagMode::none) {
      const auto q = build_query(p, encoder, pool_language(gc.mode, p.language));
      hit = retrieve_top1(q, *kb);
      rec.retrieved_id = hit->entry.id;
      rec.distance = hit->distance;
    }
    const auto prompt = assemble_prompt(p, hit ? &hit->entry : nullptr, gc);
    rec.prompt = prompt.rendered;
    rec.raw = client.complete(prompt);
    rec.completion = extract_code(rec.raw);
    ojson ev = {{"task_id", p.task_id}, {"prompt_chars", prompt.rendered.size()}};
    if (hit) {
      ev["retrieved_id"] = hit->entry.id;
      ev["retrieved_origin"] = hit->entry.origin;
      ev["distance"] = hit->distance;
    }
    log.event("generated", std::move(ev));
    records.push_back(std::move(rec));
  }
  return records;
}

std::string generations_jsonl(const std::vector<GenerationRecord>& records, const Options& o) {
  std::string text;
  for (const auto& r : records) {
    ojson j = {{"task_id", r.task_id}, {"completion", r.completion}, {"raw", r.raw}, {"mode", o.mode},
               {"variant", o.variant}};
    j["retrieved_id"] = r.retrieved_id ? ojson(*r.retrieved_id) : ojson(nullptr);
    text += j.dump() + "\n";
  }
  return text;
}

std::string prompts_jsonl(const std::vector<GenerationRecord>& records) {
  std::string text;
  for (const auto& r : records) text += ojson({{"task_id", r.task_id}, {"prompt", r.prompt}}).dump() + "\n";
  return text;
}

SandboxLimits limits_from(const Options& o) {
  SandboxLimits l;
  l.timeout_seconds = o.timeout;
  return l;
}

int cmd_extract_graph(const Options& o, std::ostream& out, Logger& log) {
  log.event("config", {{"command", "extract-graph"}, {"lang", o.lang}, {"variant", o.variant},
                       {"format", o.format}, {"file", o.file}});
  SourceUnit src{read_text(o.file), parse_language(o.lang), o.file};
  const auto g = extract_graph(src);
  log.event("extracted", {{"nodes", g.nodes.size()}, {"edges", g.edges.size()}, {"partial", g.partial}});
  if (o.format == "json") out << serialize_graph(g) << "\n";
  else out << summarize_graph(g, parse_summary_variant(o.variant)).text << "\n";
  return kExitOk;
}

int cmd_build_kb(const Options& o, std::ostream& out, Logger& log) {
  std::unique_ptr<TextEncoder> encoder;
  if (o.embed) encoder = open_encoder(o.encoder);
  log.event("config", {{"command", "build-kb"}, {"corpus", o.corpus}, {"out", o.out}, {"embed", o.embed},
                       {"exclude_problems", o.exclude_problems}, {"allow_self_retrieval", o.allow_self_retrieval},
                       {"encoder", encoder_echo(o.encoder, encoder.get())}, {"model", model_echo(o.model)}});
  auto corpus = load_corpus(o.corpus);
  const std::size_t before = corpus.size();
  if (!o.exclude_problems.empty() && !o.allow_self_retrieval) {
    std::set<std::string> keys;
    for (const auto& p : load_problems(o.exclude_problems)) keys.insert(task_key(p.task_id));
    corpus = exclude_keys(std::move(corpus), keys);
  }
  KbBuildOptions bo;
  bo.corpus_label = o.label.empty() ? o.corpus : o.label;
  bo.embed = o.embed;
  std::optional<GnnParameters<double>> params;
  if (o.embed) params = open_params(o.model, encoder->dim());
  const auto kb = build_kb(corpus, bo, encoder.get(), params ? &*params : nullptr);
  save_kb(kb, o.out);
  const ojson summary = {{"entries", kb.size()},
                         {"excluded", before - corpus.size()},
                         {"attempted", kb.meta.attempted},
                         {"succeeded", kb.meta.succeeded},
                         {"out", o.out}};
  log.event("kb_saved", summary);
  out << summary.dump() << "\n";
  return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out, Logger& log) {
  auto encoder = open_encoder(o.encoder);
  auto params = open_params(o.model, encoder->dim());
  const auto& t = o.train;
  log.event("config", {{"command", "train-gnn"},
                       {"kb", o.kb},
                       {"out", o.out},
                       {"epochs", t.epochs},
                       {"tau", t.temperature},
                       {"lr", t.learning_rate},
                       {"momentum", t.momentum},
                       {"batch_size", t.batch_size},
                       {"weights", {t.weight_qa, t.weight_cg, t.weight_preserve}},
                       {"drop_rate", t.drop_rate},
                       {"seed", t.seed},
                       {"check_gradients", t.check_gradients},
                       {"encoder", encoder_echo(o.encoder, encoder.get())},
                       {"model", model_echo(o.model)}});
  auto kb = load_kb(o.kb);
  const auto start = std::chrono::steady_clock::now();
  auto result = train(kb, std::move(params), t, *encoder, [&](const EpochLoss& e) {
    log.event("epoch", {{"epoch", e.epoch}, {"qa", e.qa}, {"cg", e.cg}, {"preserve", e.preserve}, {"total", e.total}});
  });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_checkpoint(result.params, o.out);
  if (!o.kb_out.empty()) {
    index_kb(kb, *encoder, result.params);
    save_kb(kb, o.kb_out);
  }
  ojson summary = {{"checkpoint", o.out}, {"epochs", result.report.epochs.size()}, {"seconds", seconds},
                   {"gradient_check", result.report.gradient_check}};
  if (!result.report.epochs.empty()) {
    summary["first_loss"] = result.report.epochs.front().total;
    summary["final_loss"] = result.report.epochs.back().total;
  }
  log.event("trained", summary);
  out << summary.dump() << "\n";
  return kExitOk;
}

int cmd_retrieve(const Options& o, std::ostream& out, Logger& log) {
  auto encoder = open_encoder(o.encoder);
  auto params = open_params(o.model, encoder->dim());
  log.event("config", {{"command", "retrieve"}, {"kb", o.kb}, {"problem", o.problems}, {"pool_lang", o.pool_lang},
                       {"k", o.k}, {"encoder", encoder_echo(o.encoder, encoder.get())}, {"model", model_echo(o.model)}});
  auto kb = load_kb(o.kb);
  if (!kb_indexed(kb) || !o.model.ckpt.empty()) index_kb(kb, *encoder, params);
  for (const auto& p : load_problems(o.problems)) {
    const auto q = build_query(p, *encoder, optional_language(o.pool_lang));
    ojson results = ojson::array();
    int rank = 1;
    for (const auto& r : retrieve_topk(q, kb, std::max<std::size_t>(1, o.k))) {
      results.push_back({{"rank", rank++}, {"id", r.entry.id}, {"distance", r.distance}, {"origin", r.entry.origin}});
    }
    out << ojson({{"task_id", p.task_id}, {"pool_language", std::string(to_string(q.pool_language))},
                  {"results", results}})
               .dump()
        << "\n";
  }
  return kExitOk;
}

int cmd_generate(const Options& o, std::ostream& out, Logger& log) {
  auto encoder = open_encoder(o.encoder);
  auto params = open_params(o.model, encoder->dim());
  log.event("config", {{"command", "generate"}, {"kb", o.kb}, {"corpus", o.corpus}, {"problems", o.problems},
                       {"mode", o.mode}, {"variant", o.variant}, {"llm_url", o.llm_url}, {"model_id", o.model_id},
                       {"max_tokens", o.max_tokens}, {"out", o.out}, {"encoder", encoder_echo(o.encoder, encoder.get())},
                       {"model", model_echo(o.model)}});
  const auto problems = read_problems(o.problems, o.lang);
  std::optional<KnowledgeBase> kb;
  if (parse_rag_mode(o.mode) != RagMode::none) kb = prepare_kb(o, problems, *encoder, params, log);
  const auto records = run_generation(o, problems, kb ? &*kb : nullptr, *encoder, log);
  const std::string text = generations_jsonl(records, o);
  if (o.out.empty()) out << text;
  else write_text(o.out, text);
  if (!o.prompts_out.empty()) write_text(o.prompts_out, prompts_jsonl(records));
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out, Logger& log) {
  log.event("config", {{"command", "evaluate"}, {"problems", o.problems}, {"generations", o.generations},
                       {"lang", o.lang}, {"timeout", o.timeout}, {"jobs", o.jobs}, {"out", o.out}});
  const auto problems = read_problems(o.problems, o.lang);
  const auto report = evaluate(problems, load_generations(o.generations), limits_from(o), o.jobs);
  const std::string json = report_to_json(report);
  if (!o.out.empty()) write_text(o.out, json + "\n");
  log.event("evaluated", {{"pass_at_1", report.pass_at_1}, {"extraction_rate", report.extraction_rate},
                          {"counts", report.counts}});
  out << ojson({{"pass_at_1", report.pass_at_1}, {"extraction_rate", report.extraction_rate}}).dump() << "\n";
  return kExitOk;
}

int cmd_pipeline(const Options& o, std::ostream& out, Logger& log) {
  auto encoder = open_encoder(o.encoder);
  auto params = open_params(o.model, encoder->dim());
  log.event("config", {{"command", "pipeline"},
                       {"problems", o.problems},
                       {"lang", o.lang},
                       {"kb", o.kb},
                       {"corpus", o.corpus},
                       {"allow_self_retrieval", o.allow_self_retrieval},
                       {"mode", o.mode},
                       {"variant", o.variant},
                       {"llm_url", o.llm_url},
                       {"model_id", o.model_id},
                       {"max_tokens", o.max_tokens},
                       {"timeout", o.timeout},
                       {"jobs", o.jobs},
                       {"out", o.out},
                       {"encoder", encoder_echo(o.encoder, encoder.get())},
                       {"model", model_echo(o.model)}});
  const auto problems = read_problems(o.problems, o.lang);
  if (problems.empty()) throw Error(ErrorCode::UsageError, "no problems selected");
  std::optional<KnowledgeBase> kb;
  if (parse_rag_mode(o.mode) != RagMode::none) kb = prepare_kb(o, problems, *encoder, params, log);
  const auto records = run_generation(o, problems, kb ? &*kb : nullptr, *encoder, log);
  if (!o.generations_out.empty()) write_text(o.generations_out, generations_jsonl(records, o));
  if (!o.prompts_out.empty()) write_text(o.prompts_out, prompts_jsonl(records));
  std::map<std::string, std::string> completions;
  for (const auto& r : records) completions[r.task_id] = r.completion;
  const auto report = evaluate(problems, completions, limits_from(o), o.jobs);
  const std::string json = report_to_json(report);
  if (!o.out.empty()) write_text(o.out, json + "\n");
  log.event("evaluated", {{"pass_at_1", report.pass_at_1}, {"extraction_rate", report.extraction_rate},
                          {"counts", report.counts}});
  out << ojson({{"pass_at_1", report.pass_at_1}, {"extraction_rate", report.extraction_rate},
                {"llm_calls", records.size()}})
             .dump()
      << "\n";
  return kExitOk;
}

void add_encoder_flags(CLI::App* sub, Options& o) {
  sub->add_option("--encoder-url", o.encoder.url, "Embedding service base URL (default: local hashing encoder)");
  sub->add_option("--encoder-dim", o.encoder.dim, "Dimension of the local hashing encoder")->check(CLI::PositiveNumber);
  sub->add_option("--encoder-timeout", o.encoder.timeout, "Embedding request timeout in seconds");
}

void add_model_flags(CLI::App* sub, Options& o) {
  sub->add_option("--ckpt", o.model.ckpt, "Graph encoder checkpoint (default: seeded initialization)");
  sub->add_option("--hidden-dim", o.model.hidden, "Hidden width of a freshly initialized encoder")
      ->check(CLI::PositiveNumber);
  sub->add_option("--layers", o.model.layers, "Message-passing layers of a freshly initialized encoder")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--heads", o.model.heads, "Attention heads of a freshly initialized encoder")
      ->check(CLI::PositiveNumber);
  sub->add_option("--fusion", o.model.fusion, "Fusion of code and graph vectors")
      ->check(CLI::IsMember({"mean", "learned"}));
  sub->add_option("--seed", o.model.seed, "Seed for every stochastic stage");
}

void add_generation_flags(CLI::App* sub, Options& o) {
  sub->add_option("--problems", o.problems, "Problems file (HumanEval-X records)")->required();
  sub->add_option("--lang", o.lang, "Only problems in this language");
  sub->add_option("--kb", o.kb, "Knowledge base file");
  sub->add_option("--corpus", o.corpus, "Corpus to build the knowledge base from when --kb is absent");
  sub->add_flag("--allow-self-retrieval", o.allow_self_retrieval, "Keep evaluation problems in the pool");
  sub->add_option("--mode", o.mode, "none | code_rag | graph_rag | cross_lingual_code_rag | cross_lingual_graph_rag");
  sub->add_option("--variant", o.variant, "Graph summary variant");
  sub->add_option("--llm-url", o.llm_url, "Chat-completion endpoint URL")->required();
  sub->add_option("--model-id", o.model_id, "Model name sent to the endpoint");
  sub->add_option("--max-tokens", o.max_tokens, "Completion token budget")->check(CLI::PositiveNumber);
  sub->add_option("--llm-timeout", o.llm_timeout, "LLM request timeout in seconds");
  sub->add_option("--retries", o.retries, "Retries on transport failures, 5xx and 429 responses")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--prompts-out", o.prompts_out, "Write rendered prompts as JSON lines");
  add_encoder_flags(sub, o);
  add_model_flags(sub, o);
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UsageError:
    case ErrorCode::UnsupportedLanguage:
      return kExitUsage;
    case ErrorCode::IoFailure:
    case ErrorCode::SchemaVersionMismatch:
    case ErrorCode::MalformedGraphData:
    case ErrorCode::EmptyCorpus:
      return kExitIo;
    case ErrorCode::ExtractionFailed:
      return kExitExtraction;
    case ErrorCode::EncoderUnavailable:
    case ErrorCode::DimensionMismatch:
      return kExitEncoder;
    case ErrorCode::LlmUnavailable:
    case ErrorCode::LlmRefusal:
    case ErrorCode::MissingKnowledge:
      return kExitLlm;
    case ErrorCode::SandboxFailure:
      return kExitSandbox;
    default:
      return kExitFailure;
  }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Logger log(err);
  Options o;
  CLI::App app{"Composed syntax graph retrieval for code generation", "codegrag"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  auto* extract = app.add_subcommand("extract-graph", "Extract and print the composed syntax graph of a source file");
  extract->add_option("--lang", o.lang, "cpp | python")->required();
  extract->add_option("--variant", o.variant, "Summary variant");
  extract->add_option("--format", o.format, "summary | json")->check(CLI::IsMember({"summary", "json"}));
  extract->add_option("file", o.file, "Source file")->required();

  auto* build = app.add_subcommand("build-kb", "Build a knowledge base from a corpus");
  build->add_option("--corpus", o.corpus, "Corpus file (JSON lines)")->required();
  build->add_option("--out", o.out, "Output knowledge base")->required();
  build->add_flag("--embed", o.embed, "Compute code, graph and fused vectors");
  build->add_option("--exclude-problems", o.exclude_problems, "Drop corpus items sharing a task key with these problems");
  build->add_flag("--allow-self-retrieval", o.allow_self_retrieval, "Ignore --exclude-problems");
  build->add_option("--label", o.label, "Corpus label stored in the build metadata");
  add_encoder_flags(build, o);
  add_model_flags(build, o);

  auto* trainer = app.add_subcommand("train-gnn", "Train the graph encoder with contrastive objectives");
  trainer->add_option("--kb", o.kb, "Knowledge base")->required();
  trainer->add_option("--out", o.out, "Output checkpoint")->required();
  trainer->add_option("--kb-out", o.kb_out, "Write the knowledge base re-indexed with the trained encoder");
  trainer->add_option("--epochs", o.train.epochs, "Epochs")->check(CLI::NonNegativeNumber);
  trainer->add_option("--tau", o.train.temperature, "Temperature")->check(CLI::PositiveNumber);
  trainer->add_option("--lr", o.train.learning_rate, "Learning rate")->check(CLI::NonNegativeNumber);
  trainer->add_option("--momentum", o.train.momentum, "Momentum")->check(CLI::Range(0.0, 0.999));
  trainer->add_option("--batch-size", o.train.batch_size, "Batch size")->check(CLI::PositiveNumber);
  trainer->add_option("--drop-rate", o.train.drop_rate, "Edge drop rate of the corrupted view")
      ->check(CLI::Range(0.0, 0.999));
  trainer->add_option("--weight-qa", o.train.weight_qa, "Weight of the QA objective")->check(CLI::NonNegativeNumber);
  trainer->add_option("--weight-cg", o.train.weight_cg, "Weight of the code-graph objective")
      ->check(CLI::NonNegativeNumber);
  trainer->add_option("--weight-preserve", o.train.weight_preserve, "Weight of the structure objective")
      ->check(CLI::NonNegativeNumber);
  trainer->add_flag("--check-gradients", o.train.check_gradients, "Run a gradient check before training");
  add_encoder_flags(trainer, o);
  add_model_flags(trainer, o);

  auto* retrieve = app.add_subcommand("retrieve", "Retrieve knowledge entries for problems");
  retrieve->add_option("--kb", o.kb, "Knowledge base")->required();
  retrieve->add_option("--problem", o.problems, "Problems file (HumanEval-X records)")->required();
  retrieve->add_option("--pool-lang", o.pool_lang, "Language of the retrieval pool")
      ->check(CLI::IsMember({"cpp", "python"}));
  retrieve->add_option("--k", o.k, "Results per problem")->check(CLI::PositiveNumber);
  add_encoder_flags(retrieve, o);
  add_model_flags(retrieve, o);

  auto* gen = app.add_subcommand("generate", "Generate one completion per problem");
  gen->add_option("--out", o.out, "Generations file (JSON lines); stdout when absent");
  add_generation_flags(gen, o);

  auto* eval = app.add_subcommand("evaluate", "Run generations against problem tests");
  eval->add_option("--problems", o.problems, "Problems file")->required();
  eval->add_option("--generations", o.generations, "Generations file")->required();
  eval->add_option("--lang", o.lang, "Only problems in this language");
  eval->add_option("--timeout", o.timeout, "Per-problem wall-clock limit in seconds")->check(CLI::PositiveNumber);
  eval->add_option("--jobs", o.jobs, "Parallel workers")->check(CLI::PositiveNumber);
  eval->add_option("--out", o.out, "Report file (JSON)");

  auto* pipe = app.add_subcommand("pipeline", "Retrieve, generate and evaluate end to end");
  pipe->add_option("--out", o.out, "Report file (JSON)");
  pipe->add_option("--generations-out", o.generations_out, "Write generations as JSON lines");
  pipe->add_option("--timeout", o.timeout, "Per-problem wall-clock limit in seconds")->check(CLI::PositiveNumber);
  pipe->add_option("--jobs", o.jobs, "Parallel workers")->check(CLI::PositiveNumber);
  add_generation_flags(pipe, o);

  std::vector<const char*> argv{"codegrag"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    log.emit({{"error", "UsageError"}, {"message", e.what()}});
    return kExitUsage;
  }
  // Training shares the model seed.
  o.train.seed = o.model.seed;
  try {
    if (*extract) return cmd_extract_graph(o, out, log);
    if (*build) return cmd_build_kb(o, out, log);
    if (*trainer) return cmd_train(o, out, log);
    if (*retrieve) return cmd_retrieve(o, out, log);
    if (*gen) return cmd_generate(o, out, log);
    if (*eval) return cmd_evaluate(o, out, log);
    if (*pipe) return cmd_pipeline(o, out, log);
  } catch (const Error& e) {
    log.emit({{"error", std::string(to_string(e.code()))}, {"message", e.what()}});
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    log.emit({{"error", "Failure"}, {"message", e.what()}});
    return kExitFailure;
  }
  return kExitUsage;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace codegrag::cli
