#include "graphgrade/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "graphgrade/artifact.hpp"
#include "graphgrade/error.hpp"
#include "graphgrade/extraction.hpp"
#include "graphgrade/parallel.hpp"
#include "graphgrade/text.hpp"

namespace graphgrade {

using nlohmann::json;

ConfiguredClient::ConfiguredClient(const RunConfig& config) {
  params_.temperature = config.llm.temperature;
  params_.max_tokens = config.llm.max_tokens;
  if (config.llm.mode == "replay") {
    base_ = std::make_unique<ReplayClient>(ReplayClient::from_file(config.resolve(config.paths.replay_store, "replay_store")));
    active_ = base_.get();
    return;
  }
  HttpClientOptions opts;
  opts.endpoint = config.llm.endpoint;
  opts.model = config.llm.model;
  if (const char* key = std::getenv(config.llm.api_key_env.c_str())) opts.api_key = key;
  opts.timeout = std::chrono::milliseconds(config.llm.timeout_ms);
  opts.max_retries = config.llm.max_retries;
  base_ = std::make_unique<HttpChatClient>(opts);
  active_ = base_.get();
  if (config.llm.mode == "record") {
    store_ = config.resolve(config.paths.replay_store, "replay_store");
    recorder_ = std::make_unique<RecordingClient>(*base_);
    active_ = recorder_.get();
  }
}

ConfiguredClient::~ConfiguredClient() = default;

void ConfiguredClient::finish() {
  if (recorder_) recorder_->save(store_);
}

std::unique_ptr<Embedder> make_embedder(const RunConfig& config) {
  if (config.embedder.kind == "hashing") return std::make_unique<HashingEmbedder>(config.embedder.dim);
  RemoteEmbedderOptions opts;
  opts.endpoint = config.embedder.endpoint;
  opts.model = config.embedder.model;
  if (const char* key = std::getenv(config.llm.api_key_env.c_str())) opts.api_key = key;
  opts.timeout = std::chrono::milliseconds(config.embedder.timeout_ms);
  opts.max_retries = config.embedder.max_retries;
  return std::make_unique<RemoteEmbedder>(opts, config.embedder.dim);
}

namespace {

std::vector<Document> load_documents(const RunConfig& config) {
  const auto path = config.resolve(config.paths.corpus, "corpus");
  auto docs = load_corpus(path);
  if (docs.empty()) throw ValidationError("no documents in " + path.string());
  return docs;
}

std::size_t total_communities(const CommunityPartition& p) {
  std::size_t n = 0;
  for (std::size_t l = 0; l < p.levels.size(); ++l) n += p.community_count(l);
  return n;
}

bool uses_llm(const RunConfig& c) { return c.extractor == "llm" || c.summarizer == "llm"; }

}  // namespace

void cmd_ingest(const RunConfig& config, std::ostream& out) {
  const auto docs = load_documents(config);
  const auto chunks = chunk_corpus(docs, config.chunking);
  std::map<DocKind, std::size_t> by_kind;
  for (const auto& d : docs) ++by_kind[d.kind];
  out << "documents " << docs.size() << " chunks " << chunks.size() << "\n";
  for (const auto& [kind, n] : by_kind) out << "  " << to_string(kind) << " " << n << "\n";
}

BuildStats cmd_build(const RunConfig& config, std::ostream& out) {
  const auto graph_path = config.resolve(config.paths.graph, "graph");
  const auto docs = load_documents(config);
  const auto chunks = chunk_corpus(docs, config.chunking);

  std::unique_ptr<ConfiguredClient> llm;
  if (uses_llm(config)) llm = std::make_unique<ConfiguredClient>(config);

  PatternExtractor pattern;
  std::unique_ptr<LlmExtractor> llm_extractor;
  Extractor* extractor = &pattern;
  if (config.extractor == "llm") {
    llm_extractor = std::make_unique<LlmExtractor>(llm->client(), llm->params());
    extractor = llm_extractor.get();
  }

  std::map<std::string, DocKind> kind_of;
  for (const auto& d : docs) kind_of[d.doc_id] = d.kind;
  BuildOptions build;
  build.max_in_flight = config.llm.max_in_flight;
  build.node_kind = [&](const Chunk& c) {
    return kind_of.at(c.doc_id) == DocKind::rubric ? NodeKind::criterion : NodeKind::concept_node;
  };
  KnowledgeGraph graph = build_graph(chunks, *extractor, build);
  KnowledgeGraph background = background_partition(graph, docs);

  ExtractiveSummaryClient extractive;
  LlmClient& summarizer = config.summarizer == "llm" ? llm->client() : extractive;
  const DecodingParams params = llm ? llm->params() : DecodingParams{};
  const LeidenOptions leiden{config.resolution, config.seed, config.randomness};

  GraphArtifact artifact;
  artifact.full = make_layer(std::move(graph), leiden, summarizer, config.llm.max_in_flight, params);
  artifact.background = make_layer(std::move(background), leiden, summarizer, config.llm.max_in_flight, params);
  artifact.stamp = BuildStamp{config_hash(config), config.seed, config.resolution};
  save_artifact(artifact, graph_path);
  if (llm) llm->finish();

  BuildStats s;
  s.documents = docs.size();
  s.chunks = chunks.size();
  s.nodes = artifact.full.graph.node_count();
  s.edges = artifact.full.graph.edge_count();
  s.communities = total_communities(artifact.full.partition);
  s.levels = artifact.full.partition.levels.size();
  s.background_nodes = artifact.background->graph.node_count();
  s.background_chunks = artifact.background->graph.chunks().size();
  out << "documents " << s.documents << " chunks " << s.chunks << "\n";
  out << "nodes " << s.nodes << " edges " << s.edges << " communities " << s.communities << " levels " << s.levels
      << "\n";
  out << "background nodes " << s.background_nodes << " chunks " << s.background_chunks << "\n";
  out << "wrote " << graph_path.string() << " (config " << artifact.stamp.config_hash << ")\n";
  return s;
}

namespace {

json context_to_json(const RetrievalContext& ctx) {
  json items = json::array();
  for (const auto& i : ctx.items) {
    items.push_back({{"kind", std::string(to_string(i.kind))},
                     {"id", i.id},
                     {"score", i.score},
                     {"provenance", i.provenance},
                     {"text", i.text}});
  }
  return {{"strategy", std::string(to_string(ctx.strategy))},
          {"background_only", ctx.background_only},
          {"unlinked", ctx.unlinked},
          {"items", items}};
}

struct LoadedStores {
  GraphArtifact artifact;
  std::unique_ptr<Embedder> embedder;
  Stores stores;
};

std::unique_ptr<LoadedStores> load_stores(const RunConfig& config) {
  auto loaded = std::make_unique<LoadedStores>();
  loaded->embedder = make_embedder(config);
  if (config.strategy == Strategy::non_rag) return loaded;
  loaded->artifact = load_artifact(config.resolve(config.paths.graph, "graph"));
  loaded->stores = make_stores(loaded->artifact, *loaded->embedder, config.node_link_threshold);
  return loaded;
}

}  // namespace

void cmd_retrieve(const RunConfig& config, const std::string& query, ReportFormat format, std::ostream& out) {
  const auto loaded = load_stores(config);
  const auto ctx = retrieve(config.strategy, query, loaded->stores, config.retrieval);
  if (format == ReportFormat::json) {
    out << context_to_json(ctx).dump(2) << "\n";
    return;
  }
  out << "strategy " << to_string(ctx.strategy) << " background_only " << (ctx.background_only ? "true" : "false")
      << " unlinked " << (ctx.unlinked ? "true" : "false") << "\n";
  if (ctx.items.empty()) {
    out << "no context" << (ctx.strategy == Strategy::non_rag ? " (non_rag retrieves nothing)" : "") << "\n";
    return;
  }
  std::size_t rank = 1;
  for (const auto& item : ctx.items) {
    char score[32];
    std::snprintf(score, sizeof score, "%.6f", item.score);
    out << rank++ << ". [" << to_string(item.kind) << "] " << item.id << " score " << score << " provenance "
        << join(item.provenance, ",") << "\n";
    std::istringstream lines(item.text);
    for (std::string line; std::getline(lines, line);) out << "   " << line << "\n";
  }
}

namespace {

struct GradingInputs {
  std::map<std::string, TaskRubrics> rubrics;
  LabeledDataset dataset;
};

GradingInputs preflight(const RunConfig& config) {
  GradingInputs in;
  in.rubrics = load_rubric_dir(config.resolve(config.paths.rubrics, "rubrics"));
  in.dataset = load_dataset(config.resolve(config.paths.dataset, "dataset"));
  check_dataset(in.dataset, in.rubrics);
  if (config.llm.mode == "replay") config.resolve(config.paths.replay_store, "replay_store");
  if (config.strategy != Strategy::non_rag) {
    const auto graph = config.resolve(config.paths.graph, "graph");
    if (!std::filesystem::exists(graph)) throw ValidationError("graph file " + graph.string() + " not found; run build");
  }
  return in;
}

// Grades `responses` concurrently; decisions come back in input order.
std::vector<std::vector<GradeDecision>> grade_all(const RunConfig& config, const GradingInputs& in,
                                                  const std::vector<const StudentResponse*>& responses,
                                                  std::vector<std::string>& failures) {
  const auto loaded = load_stores(config);
  ConfiguredClient llm(config);
  const Retriever retriever = [&](std::string_view query) {
    return retrieve(config.strategy, query, loaded->stores, config.retrieval);
  };
  std::vector<std::vector<GradeDecision>> out(responses.size());
  std::vector<std::string> errors(responses.size());
  parallel_for_index(responses.size(), config.llm.max_in_flight, [&](std::size_t i) {
    const auto& r = *responses[i];
    try {
      out[i] = grade_response(r, in.rubrics.at(r.task_id), retriever, llm.client(), llm.params());
    } catch (const Error& e) {
      errors[i] = e.what();
      for (Dimension d : kDimensions) {
        GradeDecision g;
        g.response_id = r.response_id;
        g.dimension = d;
        g.ungradable = true;
        g.strategy = config.strategy;
        g.background_only = config.retrieval.background_only;
        g.failure = e.what();
        out[i].push_back(std::move(g));
      }
    }
  });
  for (std::size_t i = 0; i < responses.size(); ++i) {
    if (!errors[i].empty()) failures.push_back(responses[i]->response_id + ": " + errors[i]);
  }
  llm.finish();
  return out;
}

}  // namespace

std::size_t cmd_grade(const RunConfig& config, const std::optional<std::string>& response_id, std::ostream& out,
                      std::ostream& err) {
  const auto in = preflight(config);
  std::vector<const StudentResponse*> chosen;
  for (const auto& r : in.dataset.responses) {
    if (!response_id || r.response_id == *response_id) chosen.push_back(&r);
  }
  if (response_id && chosen.empty()) throw ValidationError("no response with id " + *response_id);
  std::vector<std::string> failures;
  for (const auto& decisions : grade_all(config, in, chosen, failures)) {
    for (const auto& d : decisions) out << decision_to_json(d).dump() << "\n";
  }
  for (const auto& f : failures) err << "failed: " << f << "\n";
  return failures.size();
}

EvaluationRun run_evaluation(const RunConfig& config) {
  const auto in = preflight(config);
  std::vector<const StudentResponse*> all;
  for (const auto& r : in.dataset.responses) all.push_back(&r);
  EvaluationRun run;
  for (auto& decisions : grade_all(config, in, all, run.failures)) {
    for (auto& d : decisions) run.decisions.push_back(std::move(d));
  }
  run.report = compute_accuracy(run.decisions, in.dataset);
  run.report.metadata = RunMetadata{std::string(to_string(config.strategy)), config.retrieval.background_only,
                                    config_hash(config), config.seed, run.failures.size()};
  return run;
}

std::size_t cmd_evaluate(const RunConfig& config, ReportFormat format, std::ostream& out, std::ostream& err) {
  const auto run = run_evaluation(config);
  out << render_report(run.report, format);
  std::size_t unlinked = 0, ungradable = 0;
  for (const auto& d : run.decisions) {
    unlinked += d.unlinked ? 1 : 0;
    ungradable += d.ungradable ? 1 : 0;
  }
  err << "graded " << run.decisions.size() << " decisions; ungradable " << ungradable << "; unlinked " << unlinked
      << "\n";
  if (!run.failures.empty()) {
    err << run.failures.size() << " responses failed:\n";
    for (const auto& f : run.failures) err << "  " << f << "\n";
  }
  return run.failures.size();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rubric grading with graph-grounded retrieval"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path = "graphgrade.json";
  std::optional<std::uint64_t> seed;
  std::string format_name = "table_text";
  std::optional<std::string> strategy_name;
  bool background_only = false;
  app.add_option("--config", config_path, "Run configuration file");
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_option("--format", format_name, "Output format: table_text, json or csv");
  app.add_option("--strategy", strategy_name, "Retrieval strategy: " + strategy_names());
  app.add_flag("--background-only", background_only, "Restrict retrieval to background documents");

  auto* ingest = app.add_subcommand("ingest", "Load and chunk the corpus");
  auto* build = app.add_subcommand("build", "Build the graph, communities and summaries");
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Print the context retrieved for a query");
  std::vector<std::string> query_words;
  retrieve_cmd->add_option("query", query_words, "Query text")->required();
  auto* grade = app.add_subcommand("grade", "Grade dataset responses and print decisions");
  std::optional<std::string> response_id;
  grade->add_option("--response-id", response_id, "Grade only this response");
  auto* evaluate = app.add_subcommand("evaluate", "Grade the dataset and report accuracy");
  std::optional<std::string> out_path;
  evaluate->add_option("--out", out_path, "Write the report to a file instead of stdout");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, r;
    const int code = app.exit(e, o, r);
    out << o.str();
    err << r.str();
    return code == 0 ? 0 : 2;
  }

  const auto format = parse_report_format(format_name);
  if (!format) {
    err << "error: unknown format \"" << format_name << "\" (expected table_text, json or csv)\n";
    return 2;
  }
  RunConfig config;
  try {
    config = load_config(config_path);
    if (seed) config.seed = *seed;
    if (strategy_name) {
      const auto s = parse_strategy(*strategy_name);
      if (!s) {
        err << "error: unknown strategy \"" << *strategy_name << "\" (valid: " << strategy_names() << ")\n";
        return 2;
      }
      config.strategy = *s;
    }
    if (background_only) config.retrieval.background_only = true;
    validate_config(config);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (ingest->parsed()) {
      cmd_ingest(config, out);
    } else if (build->parsed()) {
      cmd_build(config, out);
    } else if (retrieve_cmd->parsed()) {
      cmd_retrieve(config, join(query_words, " "), *format, out);
    } else if (grade->parsed()) {
      return cmd_grade(config, response_id, out, err) == 0 ? 0 : 1;
    } else if (evaluate->parsed()) {
      std::size_t failures = 0;
      if (out_path) {
        std::ostringstream buf;
        failures = cmd_evaluate(config, *format, buf, err);
        std::ofstream file(*out_path, std::ios::binary | std::ios::trunc);
        if (!file) throw IoError("cannot write " + *out_path);
        file << buf.str();
      } else {
        failures = cmd_evaluate(config, *format, out, err);
      }
      return failures == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  if (args.empty()) args.emplace_back("graphgrade");
  return run_cli(args, out, err);
}

}  // namespace graphgrade
