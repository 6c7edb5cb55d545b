#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "graphgrade/context.hpp"
#include "graphgrade/corpus.hpp"
#include "graphgrade/linking.hpp"
#include "graphgrade/llm.hpp"
#include "graphgrade/retrieval.hpp"

namespace graphgrade {

struct PathSettings {
  // As written in the file; resolved against the config directory on use.
  std::optional<std::string> corpus, rubrics, dataset, graph, replay_store;
};

struct EmbedderSettings {
  std::string kind = "hashing";  // hashing | remote
  std::size_t dim = 256;         // 0 with remote: learn from the first reply
  std::string endpoint;
  std::string model;
  int timeout_ms = 30000;
  int max_retries = 2;
};

struct LlmSettings {
  std::string mode = "replay";  // replay | http | record
  std::string endpoint;
  std::string model;
  std::string api_key_env = "GRAPHGRADE_API_KEY";
  int timeout_ms = 60000;
  int max_retries = 2;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::size_t max_in_flight = 1;
};

struct RunConfig {
  std::filesystem::path base_dir;
  PathSettings paths;
  ChunkingOptions chunking;
  std::string extractor = "pattern";      // pattern | llm
  std::string summarizer = "extractive";  // extractive | llm
  EmbedderSettings embedder;
  LlmSettings llm;
  Strategy strategy = Strategy::hipporag;
  RetrievalConfig retrieval;
  double resolution = 1.0;
  double randomness = 0.01;
  double node_link_threshold = kDefaultLinkThreshold;
  std::uint64_t seed = 0;

  /// Absolute form of a configured path; throws ValidationError naming the key when unset.
  std::filesystem::path resolve(const std::optional<std::string>& path, const char* key) const;
};

/// Validates every key and value; unknown keys are errors at any depth.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Effective settings as canonical JSON (keys sorted, every default spelled out).
nlohmann::json config_to_json(const RunConfig& config);
/// 16 hex digits identifying the effective settings.
std::string config_hash(const RunConfig& config);

/// Throws ValidationError for out-of-range values.
void validate_config(const RunConfig& config);

}  // namespace graphgrade
