#include "graphgrade/artifact.hpp"

#include "graphgrade/error.hpp"

namespace graphgrade {

using nlohmann::json;

namespace {

const json& require(const json& doc, const char* key, const char* what) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw ValidationError(std::string(what) + " is missing \"" + key + "\"");
  }
  return doc.at(key);
}

template <typename T>
T get(const json& doc, const char* key, const char* what) {
  try {
    return require(doc, key, what).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string(what) + " field \"" + key + "\" has the wrong type");
  }
}

NodeId node_by_name(const KnowledgeGraph& graph, const std::string& name) {
  const auto id = graph.find(name);
  if (!id) throw IntegrityError("community references unknown node \"" + name + "\"");
  return *id;
}

}  // namespace

GraphLayer make_layer(KnowledgeGraph graph, const LeidenOptions& leiden, LlmClient& summarizer,
                      std::size_t max_in_flight, const DecodingParams& params) {
  GraphLayer layer;
  layer.partition = leiden_partition(graph, leiden);
  layer.reports = summarize_partition(graph, layer.partition, summarizer, max_in_flight, params);
  layer.graph = std::move(graph);
  return layer;
}

json layer_to_json(const GraphLayer& layer, const BuildStamp& stamp) {
  json doc = graph_to_json(layer.graph);
  json levels = json::array();
  for (const auto& m : layer.partition.levels) levels.push_back(m);
  doc["partition"] = {{"resolution", stamp.resolution},
                      {"seed", stamp.seed},
                      {"levels", levels},
                      {"quality", layer.partition.quality}};
  json communities = json::array();
  for (const auto& r : layer.reports) {
    json members = json::array();
    for (NodeId v : r.members) members.push_back(layer.graph.node(v).canonical_name);
    json keys = json::array();
    for (NodeId v : r.key_entities) keys.push_back(layer.graph.node(v).canonical_name);
    communities.push_back({{"id", r.community_id},
                           {"level", r.level},
                           {"members", members},
                           {"summary", r.summary},
                           {"key_entities", keys}});
  }
  doc["communities"] = communities;
  return doc;
}

GraphLayer layer_from_json(const json& doc) {
  GraphLayer layer;
  layer.graph = graph_from_json(doc);
  const std::size_t n = layer.graph.node_count();

  const auto& partition = require(doc, "partition", "graph file");
  const auto levels = get<std::vector<Membership>>(partition, "levels", "partition");
  const auto quality = get<std::vector<double>>(partition, "quality", "partition");
  if (levels.size() != quality.size()) throw IntegrityError("partition has " + std::to_string(levels.size()) +
                                                            " levels but " + std::to_string(quality.size()) +
                                                            " quality values");
  for (std::size_t l = 0; l < levels.size(); ++l) {
    if (levels[l].size() != n) {
      throw IntegrityError("partition level " + std::to_string(l) + " covers " + std::to_string(levels[l].size()) +
                           " nodes, graph has " + std::to_string(n));
    }
  }
  layer.partition.levels = levels;
  layer.partition.quality = quality;

  for (const auto& c : require(doc, "communities", "graph file")) {
    CommunityReport r;
    r.community_id = get<CommunityId>(c, "id", "community");
    r.level = get<std::size_t>(c, "level", "community");
    r.summary = get<std::string>(c, "summary", "community");
    for (const auto& name : get<std::vector<std::string>>(c, "members", "community")) {
      r.members.push_back(node_by_name(layer.graph, name));
    }
    for (const auto& name : get<std::vector<std::string>>(c, "key_entities", "community")) {
      r.key_entities.push_back(node_by_name(layer.graph, name));
    }
    if (r.level >= levels.size()) {
      throw IntegrityError("community " + std::to_string(r.community_id) + " names missing level " +
                           std::to_string(r.level));
    }
    for (NodeId v : r.members) {
      if (levels[r.level][v] != r.community_id) {
        throw IntegrityError("node \"" + layer.graph.node(v).canonical_name + "\" is not in community " +
                             std::to_string(r.community_id) + " at level " + std::to_string(r.level));
      }
    }
    layer.reports.push_back(std::move(r));
  }
  return layer;
}

json artifact_to_json(const GraphArtifact& artifact) {
  json doc = layer_to_json(artifact.full, artifact.stamp);
  if (artifact.background) doc["background"] = layer_to_json(*artifact.background, artifact.stamp);
  doc["build"] = {{"config_hash", artifact.stamp.config_hash}, {"seed", artifact.stamp.seed}};
  return doc;
}

GraphArtifact artifact_from_json(const json& doc) {
  GraphArtifact artifact;
  artifact.full = layer_from_json(doc);
  if (doc.contains("background")) artifact.background = layer_from_json(doc.at("background"));
  const auto& build = require(doc, "build", "graph file");
  artifact.stamp.config_hash = get<std::string>(build, "config_hash", "build");
  artifact.stamp.seed = get<std::uint64_t>(build, "seed", "build");
  artifact.stamp.resolution = get<double>(doc.at("partition"), "resolution", "partition");
  return artifact;
}

void save_artifact(const GraphArtifact& artifact, const std::filesystem::path& path) {
  write_json_file(artifact_to_json(artifact), path);
}

GraphArtifact load_artifact(const std::filesystem::path& path) { return artifact_from_json(read_json_file(path)); }

}  // namespace graphgrade
