#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "graphgrade/community.hpp"
#include "graphgrade/kgraph.hpp"
#include "graphgrade/llm.hpp"

namespace graphgrade {

struct BuildStamp {
  std::string config_hash;
  std::uint64_t seed = 0;
  double resolution = 1.0;
};

/// Everything `build` writes: the full layer, the background-only layer and a
/// stamp identifying the configuration that produced them.
struct GraphArtifact {
  GraphLayer full;
  std::optional<GraphLayer> background;
  BuildStamp stamp;
};

/// Partitions `graph` and summarizes every community.
GraphLayer make_layer(KnowledgeGraph graph, const LeidenOptions& leiden, LlmClient& summarizer,
                      std::size_t max_in_flight = 1, const DecodingParams& params = {});

/// Graph JSON plus "partition" and "communities".
nlohmann::json layer_to_json(const GraphLayer& layer, const BuildStamp& stamp);
GraphLayer layer_from_json(const nlohmann::json& doc);

nlohmann::json artifact_to_json(const GraphArtifact& artifact);
GraphArtifact artifact_from_json(const nlohmann::json& doc);

void save_artifact(const GraphArtifact& artifact, const std::filesystem::path& path);
GraphArtifact load_artifact(const std::filesystem::path& path);

}  // namespace graphgrade
