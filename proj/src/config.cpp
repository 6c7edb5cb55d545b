#include "graphgrade/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "graphgrade/error.hpp"
#include "graphgrade/text.hpp"

namespace graphgrade {

using nlohmann::json;

namespace {

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ValidationError("config: " + where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) {
      throw ValidationError("config: unknown key \"" + (where == "top level" ? key : where + "." + key) + "\"");
    }
  }
}

template <typename T>
void take(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  const std::string name = where.empty() ? key : where + "." + key;
  bool ok = false;
  if constexpr (std::is_same_v<T, bool>) {
    ok = v.is_boolean();
  } else if constexpr (std::is_same_v<T, std::string>) {
    ok = v.is_string();
  } else if constexpr (std::is_floating_point_v<T>) {
    ok = v.is_number();
  } else if constexpr (std::is_unsigned_v<T>) {
    ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  } else {
    ok = v.is_number_integer();
  }
  if (!ok) throw ValidationError("config: \"" + name + "\" has the wrong type");
  out = v.get<T>();
}

void take_path(const json& obj, const char* key, std::optional<std::string>& out) {
  if (!obj.contains(key)) return;
  if (!obj.at(key).is_string() || obj.at(key).get<std::string>().empty()) {
    throw ValidationError(std::string("config: \"paths.") + key + "\" must be a non-empty string");
  }
  out = obj.at(key).get<std::string>();
}

json opt(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

std::filesystem::path RunConfig::resolve(const std::optional<std::string>& path, const char* key) const {
  if (!path) throw ValidationError(std::string("config: \"paths.") + key + "\" is required for this command");
  std::filesystem::path p(*path);
  if (p.is_relative()) p = base_dir / p;
  return p.lexically_normal();
}

void validate_config(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw ValidationError("config: " + msg); };
  if (c.chunking.chunk_size == 0) fail("chunking.chunk_size must be positive");
  if (c.chunking.overlap >= c.chunking.chunk_size) fail("chunking.overlap must be smaller than chunk_size");
  if (c.extractor != "pattern" && c.extractor != "llm") fail("extractor must be \"pattern\" or \"llm\"");
  if (c.summarizer != "extractive" && c.summarizer != "llm") fail("summarizer must be \"extractive\" or \"llm\"");
  if (c.embedder.kind != "hashing" && c.embedder.kind != "remote") fail("embedder.kind must be \"hashing\" or \"remote\"");
  if (c.embedder.kind == "hashing" && c.embedder.dim == 0) fail("embedder.dim must be positive");
  if (c.embedder.kind == "remote" && c.embedder.endpoint.empty()) fail("embedder.endpoint is required for remote");
  if (c.embedder.timeout_ms <= 0 || c.embedder.max_retries < 0) fail("embedder timeout/retries out of range");
  if (c.llm.mode != "replay" && c.llm.mode != "http" && c.llm.mode != "record") {
    fail("llm.mode must be \"replay\", \"http\" or \"record\"");
  }
  if (c.llm.mode != "replay" && c.llm.endpoint.empty()) fail("llm.endpoint is required for " + c.llm.mode);
  if (c.llm.timeout_ms <= 0) fail("llm.timeout_ms must be positive");
  if (c.llm.max_retries < 0) fail("llm.max_retries must be non-negative");
  if (!(c.llm.temperature >= 0.0)) fail("llm.temperature must be non-negative");
  if (c.llm.max_tokens <= 0) fail("llm.max_tokens must be positive");
  if (c.llm.max_in_flight == 0) fail("llm.max_in_flight must be at least 1");
  if (c.retrieval.budget == 0) fail("retrieval.budget must be at least 1");
  if (!(c.retrieval.ppr.restart_prob > 0.0 && c.retrieval.ppr.restart_prob < 1.0)) {
    fail("retrieval.restart_prob must lie in (0, 1)");
  }
  if (!(c.retrieval.ppr.eps > 0.0)) fail("retrieval.ppr_eps must be positive");
  if (c.retrieval.ppr.max_iter < 1) fail("retrieval.ppr_max_iter must be at least 1");
  if (!(c.resolution > 0.0) || !std::isfinite(c.resolution)) fail("community.resolution must be positive");
  if (!(c.randomness > 0.0)) fail("community.randomness must be positive");
  if (!(c.node_link_threshold >= -1.0 && c.node_link_threshold <= 1.0)) fail("thresholds.node_link must lie in [-1, 1]");
}

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  only_keys(doc, "top level",
            {"paths", "chunking", "extractor", "summarizer", "embedder", "llm", "retrieval", "community", "thresholds",
             "seed"});
  if (doc.contains("paths")) {
    const auto& p = doc.at("paths");
    only_keys(p, "paths", {"corpus", "rubrics", "dataset", "graph", "replay_store"});
    take_path(p, "corpus", c.paths.corpus);
    take_path(p, "rubrics", c.paths.rubrics);
    take_path(p, "dataset", c.paths.dataset);
    take_path(p, "graph", c.paths.graph);
    take_path(p, "replay_store", c.paths.replay_store);
  }
  if (doc.contains("chunking")) {
    const auto& s = doc.at("chunking");
    only_keys(s, "chunking", {"chunk_size", "overlap"});
    take(s, "chunk_size", "chunking", c.chunking.chunk_size);
    take(s, "overlap", "chunking", c.chunking.overlap);
  }
  take(doc, "extractor", "", c.extractor);
  take(doc, "summarizer", "", c.summarizer);
  if (doc.contains("embedder")) {
    const auto& s = doc.at("embedder");
    only_keys(s, "embedder", {"kind", "dim", "endpoint", "model", "timeout_ms", "max_retries"});
    take(s, "kind", "embedder", c.embedder.kind);
    take(s, "dim", "embedder", c.embedder.dim);
    take(s, "endpoint", "embedder", c.embedder.endpoint);
    take(s, "model", "embedder", c.embedder.model);
    take(s, "timeout_ms", "embedder", c.embedder.timeout_ms);
    take(s, "max_retries", "embedder", c.embedder.max_retries);
  }
  if (doc.contains("llm")) {
    const auto& s = doc.at("llm");
    only_keys(s, "llm",
              {"mode", "endpoint", "model", "api_key_env", "timeout_ms", "max_retries", "temperature", "max_tokens",
               "max_in_flight"});
    take(s, "mode", "llm", c.llm.mode);
    take(s, "endpoint", "llm", c.llm.endpoint);
    take(s, "model", "llm", c.llm.model);
    take(s, "api_key_env", "llm", c.llm.api_key_env);
    take(s, "timeout_ms", "llm", c.llm.timeout_ms);
    take(s, "max_retries", "llm", c.llm.max_retries);
    take(s, "temperature", "llm", c.llm.temperature);
    take(s, "max_tokens", "llm", c.llm.max_tokens);
    take(s, "max_in_flight", "llm", c.llm.max_in_flight);
  }
  if (doc.contains("retrieval")) {
    const auto& s = doc.at("retrieval");
    only_keys(s, "retrieval",
              {"strategy", "k", "budget", "background_only", "restart_prob", "ppr_eps", "ppr_max_iter",
               "community_level"});
    std::string strategy(to_string(c.strategy));
    take(s, "strategy", "retrieval", strategy);
    const auto parsed = parse_strategy(strategy);
    if (!parsed) {
      throw ValidationError("config: unknown strategy \"" + strategy + "\" (expected one of " + strategy_names() + ")");
    }
    c.strategy = *parsed;
    take(s, "k", "retrieval", c.retrieval.k);
    take(s, "budget", "retrieval", c.retrieval.budget);
    take(s, "background_only", "retrieval", c.retrieval.background_only);
    take(s, "restart_prob", "retrieval", c.retrieval.ppr.restart_prob);
    take(s, "ppr_eps", "retrieval", c.retrieval.ppr.eps);
    take(s, "ppr_max_iter", "retrieval", c.retrieval.ppr.max_iter);
    take(s, "community_level", "retrieval", c.retrieval.community_level);
  }
  if (doc.contains("community")) {
    const auto& s = doc.at("community");
    only_keys(s, "community", {"resolution", "randomness"});
    take(s, "resolution", "community", c.resolution);
    take(s, "randomness", "community", c.randomness);
  }
  if (doc.contains("thresholds")) {
    const auto& s = doc.at("thresholds");
    only_keys(s, "thresholds", {"node_link"});
    take(s, "node_link", "thresholds", c.node_link_threshold);
  }
  take(doc, "seed", "", c.seed);
  validate_config(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  auto dir = std::filesystem::absolute(path).parent_path();
  return parse_config(doc, dir);
}

json config_to_json(const RunConfig& c) {
  return {
      {"paths",
       {{"corpus", opt(c.paths.corpus)},
        {"rubrics", opt(c.paths.rubrics)},
        {"dataset", opt(c.paths.dataset)},
        {"graph", opt(c.paths.graph)},
        {"replay_store", opt(c.paths.replay_store)}}},
      {"chunking", {{"chunk_size", c.chunking.chunk_size}, {"overlap", c.chunking.overlap}}},
      {"extractor", c.extractor},
      {"summarizer", c.summarizer},
      {"embedder",
       {{"kind", c.embedder.kind},
        {"dim", c.embedder.dim},
        {"endpoint", c.embedder.endpoint},
        {"model", c.embedder.model},
        {"timeout_ms", c.embedder.timeout_ms},
        {"max_retries", c.embedder.max_retries}}},
      {"llm",
       {{"mode", c.llm.mode},
        {"endpoint", c.llm.endpoint},
        {"model", c.llm.model},
        {"api_key_env", c.llm.api_key_env},
        {"timeout_ms", c.llm.timeout_ms},
        {"max_retries", c.llm.max_retries},
        {"temperature", c.llm.temperature},
        {"max_tokens", c.llm.max_tokens},
        {"max_in_flight", c.llm.max_in_flight}}},
      {"retrieval",
       {{"strategy", std::string(to_string(c.strategy))},
        {"k", c.retrieval.k},
        {"budget", c.retrieval.budget},
        {"background_only", c.retrieval.background_only},
        {"restart_prob", c.retrieval.ppr.restart_prob},
        {"ppr_eps", c.retrieval.ppr.eps},
        {"ppr_max_iter", c.retrieval.ppr.max_iter},
        {"community_level", c.retrieval.community_level}}},
      {"community", {{"resolution", c.resolution}, {"randomness", c.randomness}}},
      {"thresholds", {{"node_link", c.node_link_threshold}}},
      {"seed", c.seed},
  };
}

std::string config_hash(const RunConfig& config) { return hex64(fnv1a64(config_to_json(config).dump())); }

}  // namespace graphgrade
