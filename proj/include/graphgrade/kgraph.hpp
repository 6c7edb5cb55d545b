#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphgrade/corpus.hpp"

namespace graphgrade {

using NodeId = std::uint32_t;

enum class NodeKind { concept_node, criterion, exemplar };

std::string_view to_string(NodeKind kind);
std::optional<NodeKind> parse_node_kind(std::string_view name);

struct EntityNode {
  NodeId id = 0;
  std::string canonical_name;
  std::set<std::string> surface_forms;
  NodeKind kind = NodeKind::concept_node;
};

struct RelationEdge {
  NodeId a = 0;  // a < b
  NodeId b = 0;
  double weight = 0.0;
  std::string label;  // empty when no predicate was recorded
};

struct ChunkLink {
  NodeId node = 0;
  std::string chunk_id;
  std::uint32_t mention_count = 0;
};

struct Neighbor {
  NodeId node;
  double weight;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Entity graph with undirected weighted edges and node-to-chunk links.
///
/// Node handles are dense and assigned in insertion order. Edges are keyed by
/// the unordered endpoint pair; repeated additions accumulate weight. Chunks
/// must be registered before nodes can link to them.
class KnowledgeGraph {
 public:
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edge_store_.size(); }

  /// Returns the node whose canonical name matches `surface_form`, creating it if needed.
  /// Throws ValidationError for a blank surface form.
  NodeId upsert_entity(std::string_view surface_form, NodeKind kind = NodeKind::concept_node);

  /// Adds `increment` to the {a,b} edge weight and returns the new weight.
  /// The first non-empty label seen for a pair is kept.
  double add_relation(NodeId a, NodeId b, double increment, std::string_view label = {});

  /// Adjacency of `node` in ascending neighbor order.
  const std::vector<Neighbor>& neighbors(NodeId node) const;

  double weighted_degree(NodeId node) const;

  const EntityNode& node(NodeId id) const;
  const std::vector<EntityNode>& nodes() const noexcept { return nodes_; }
  std::optional<NodeId> find(std::string_view name) const;

  /// Edges sorted by (a, b).
  std::vector<RelationEdge> edges() const;
  std::optional<RelationEdge> edge(NodeId a, NodeId b) const;

  void register_chunk(const Chunk& chunk);
  bool has_chunk(std::string_view chunk_id) const;
  const Chunk& chunk(std::string_view chunk_id) const;
  /// Registered chunks in registration order.
  const std::vector<Chunk>& chunks() const noexcept { return chunks_; }

  /// Increments the (node, chunk) mention count and returns the new count.
  std::uint32_t link_chunk(NodeId node, std::string_view chunk_id, std::uint32_t mentions = 1);

  /// Links of one node, ascending chunk_id.
  std::vector<ChunkLink> links_of(NodeId node) const;
  /// Every link, ordered by (node, chunk_id).
  std::vector<ChunkLink> chunk_links() const;
  std::size_t chunk_link_count() const noexcept { return link_total_; }

  friend bool operator==(const KnowledgeGraph& lhs, const KnowledgeGraph& rhs);

 private:
  void check_node(NodeId id) const;

  std::vector<EntityNode> nodes_;
  std::unordered_map<std::string, NodeId> by_name_;
  std::map<std::pair<NodeId, NodeId>, std::size_t> edge_index_;
  std::vector<RelationEdge> edge_store_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<Chunk> chunks_;
  std::unordered_map<std::string, std::size_t> chunk_index_;
  std::vector<std::map<std::string, std::uint32_t>> links_;
  std::size_t link_total_ = 0;
};

inline constexpr int kGraphSchemaVersion = 1;

/// Structural JSON encoding; nodes are referenced by canonical name.
nlohmann::json graph_to_json(const KnowledgeGraph& graph);
/// Inverse of graph_to_json. Throws ValidationError on a schema mismatch and
/// IntegrityError on dangling or duplicate references.
KnowledgeGraph graph_from_json(const nlohmann::json& doc);

void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& path);
KnowledgeGraph load_graph(const std::filesystem::path& path);

/// Shared helpers for artifact files.
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace graphgrade
