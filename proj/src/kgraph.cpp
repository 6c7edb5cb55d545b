#include "graphgrade/kgraph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "graphgrade/error.hpp"
#include "graphgrade/text.hpp"

namespace graphgrade {

using nlohmann::json;

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::concept_node:
      return "concept";
    case NodeKind::criterion:
      return "criterion";
    case NodeKind::exemplar:
      return "exemplar";
  }
  return "concept";
}

std::optional<NodeKind> parse_node_kind(std::string_view name) {
  if (name == "concept") return NodeKind::concept_node;
  if (name == "criterion") return NodeKind::criterion;
  if (name == "exemplar") return NodeKind::exemplar;
  return std::nullopt;
}

void KnowledgeGraph::check_node(NodeId id) const {
  if (id >= nodes_.size()) throw ValidationError("unknown node id " + std::to_string(id));
}

NodeId KnowledgeGraph::upsert_entity(std::string_view surface_form, NodeKind kind) {
  std::string name = canonicalize(surface_form);
  if (name.empty()) throw ValidationError("blank entity surface form");
  if (auto it = by_name_.find(name); it != by_name_.end()) {
    nodes_[it->second].surface_forms.emplace(surface_form);
    return it->second;
  }
  const auto id = static_cast<NodeId>(nodes_.size());
  EntityNode node;
  node.id = id;
  node.canonical_name = name;
  node.surface_forms.emplace(surface_form);
  node.kind = kind;
  nodes_.push_back(std::move(node));
  by_name_.emplace(std::move(name), id);
  adjacency_.emplace_back();
  links_.emplace_back();
  return id;
}

namespace {

void bump_adjacency(std::vector<Neighbor>& adj, NodeId other, double increment) {
  auto it = std::lower_bound(adj.begin(), adj.end(), other,
                             [](const Neighbor& n, NodeId id) { return n.node < id; });
  if (it != adj.end() && it->node == other) {
    it->weight += increment;
  } else {
    adj.insert(it, Neighbor{other, increment});
  }
}

}  // namespace

double KnowledgeGraph::add_relation(NodeId a, NodeId b, double increment, std::string_view label) {
  check_node(a);
  check_node(b);
  if (a == b) throw ValidationError("self-loop on node " + std::to_string(a) + " is not allowed");
  if (!(increment > 0.0)) throw ValidationError("relation increment must be positive");
  const auto key = std::minmax(a, b);
  auto [it, inserted] = edge_index_.emplace(std::pair{key.first, key.second}, edge_store_.size());
  if (inserted) edge_store_.push_back(RelationEdge{key.first, key.second, 0.0, {}});
  RelationEdge& e = edge_store_[it->second];
  e.weight += increment;
  if (e.label.empty() && !label.empty()) e.label = std::string(label);
  bump_adjacency(adjacency_[a], b, increment);
  bump_adjacency(adjacency_[b], a, increment);
  return e.weight;
}

const std::vector<Neighbor>& KnowledgeGraph::neighbors(NodeId node) const {
  check_node(node);
  return adjacency_[node];
}

double KnowledgeGraph::weighted_degree(NodeId node) const {
  double sum = 0.0;
  for (const auto& n : neighbors(node)) sum += n.weight;
  return sum;
}

const EntityNode& KnowledgeGraph::node(NodeId id) const {
  check_node(id);
  return nodes_[id];
}

std::optional<NodeId> KnowledgeGraph::find(std::string_view name) const {
  auto it = by_name_.find(canonicalize(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::vector<RelationEdge> KnowledgeGraph::edges() const {
  std::vector<RelationEdge> out;
  out.reserve(edge_store_.size());
  for (const auto& [key, idx] : edge_index_) out.push_back(edge_store_[idx]);
  return out;
}

std::optional<RelationEdge> KnowledgeGraph::edge(NodeId a, NodeId b) const {
  const auto key = std::minmax(a, b);
  auto it = edge_index_.find({key.first, key.second});
  if (it == edge_index_.end()) return std::nullopt;
  return edge_store_[it->second];
}

void KnowledgeGraph::register_chunk(const Chunk& chunk) {
  if (chunk_index_.count(chunk.chunk_id)) {
    throw IntegrityError("duplicate chunk_id \"" + chunk.chunk_id + "\"");
  }
  chunk_index_.emplace(chunk.chunk_id, chunks_.size());
  chunks_.push_back(chunk);
}

bool KnowledgeGraph::has_chunk(std::string_view chunk_id) const {
  return chunk_index_.count(std::string(chunk_id)) > 0;
}

const Chunk& KnowledgeGraph::chunk(std::string_view chunk_id) const {
  auto it = chunk_index_.find(std::string(chunk_id));
  if (it == chunk_index_.end()) throw IntegrityError("unknown chunk_id \"" + std::string(chunk_id) + "\"");
  return chunks_[it->second];
}

std::uint32_t KnowledgeGraph::link_chunk(NodeId node, std::string_view chunk_id, std::uint32_t mentions) {
  check_node(node);
  if (mentions == 0) throw ValidationError("mention count must be at least 1");
  if (!has_chunk(chunk_id)) throw IntegrityError("unknown chunk_id \"" + std::string(chunk_id) + "\"");
  auto [it, inserted] = links_[node].emplace(std::string(chunk_id), 0u);
  if (inserted) ++link_total_;
  it->second += mentions;
  return it->second;
}

std::vector<ChunkLink> KnowledgeGraph::links_of(NodeId node) const {
  check_node(node);
  std::vector<ChunkLink> out;
  for (const auto& [chunk_id, count] : links_[node]) out.push_back(ChunkLink{node, chunk_id, count});
  return out;
}

std::vector<ChunkLink> KnowledgeGraph::chunk_links() const {
  std::vector<ChunkLink> out;
  out.reserve(link_total_);
  for (NodeId n = 0; n < nodes_.size(); ++n) {
    for (const auto& [chunk_id, count] : links_[n]) out.push_back(ChunkLink{n, chunk_id, count});
  }
  return out;
}

bool operator==(const KnowledgeGraph& lhs, const KnowledgeGraph& rhs) {
  if (lhs.nodes_.size() != rhs.nodes_.size() || lhs.chunks_ != rhs.chunks_ ||
      lhs.edge_store_.size() != rhs.edge_store_.size() || lhs.links_ != rhs.links_) {
    return false;
  }
  for (std::size_t i = 0; i < lhs.nodes_.size(); ++i) {
    const auto& l = lhs.nodes_[i];
    const auto& r = rhs.nodes_[i];
    if (l.canonical_name != r.canonical_name || l.surface_forms != r.surface_forms || l.kind != r.kind) return false;
  }
  const auto le = lhs.edges();
  const auto re = rhs.edges();
  for (std::size_t i = 0; i < le.size(); ++i) {
    if (le[i].a != re[i].a || le[i].b != re[i].b || le[i].weight != re[i].weight || le[i].label != re[i].label) {
      return false;
    }
  }
  return true;
}

json graph_to_json(const KnowledgeGraph& graph) {
  json chunks = json::array();
  for (const auto& c : graph.chunks()) {
    chunks.push_back({{"chunk_id", c.chunk_id},
                      {"doc_id", c.doc_id},
                      {"seq", c.seq},
                      {"start", c.token_span.start},
                      {"end", c.token_span.end},
                      {"text", c.text}});
  }
  json nodes = json::array();
  for (const auto& n : graph.nodes()) {
    nodes.push_back({{"name", n.canonical_name},
                     {"kind", to_string(n.kind)},
                     {"surface_forms", std::vector<std::string>(n.surface_forms.begin(), n.surface_forms.end())}});
  }
  json edges = json::array();
  for (const auto& e : graph.edges()) {
    json rec = {{"source", graph.node(e.a).canonical_name},
                {"target", graph.node(e.b).canonical_name},
                {"weight", e.weight}};
    if (!e.label.empty()) rec["label"] = e.label;
    edges.push_back(std::move(rec));
  }
  json links = json::array();
  for (const auto& l : graph.chunk_links()) {
    links.push_back(
        {{"node", graph.node(l.node).canonical_name}, {"chunk_id", l.chunk_id}, {"mention_count", l.mention_count}});
  }
  return json{{"schema_version", kGraphSchemaVersion},
              {"chunks", std::move(chunks)},
              {"nodes", std::move(nodes)},
              {"edges", std::move(edges)},
              {"chunk_links", std::move(links)}};
}

namespace {

const json& field(const json& obj, const char* key, const char* where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(std::string(where) + ": missing field \"" + key + "\"");
  return *it;
}

template <typename T>
T get_as(const json& obj, const char* key, const char* where) {
  try {
    return field(obj, key, where).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string(where) + ": field \"" + key + "\" has the wrong type");
  }
}

NodeId resolve(const KnowledgeGraph& g, const std::string& name, const char* where) {
  auto id = g.find(name);
  if (!id || g.node(*id).canonical_name != name) {
    throw IntegrityError(std::string(where) + " references unknown node \"" + name + "\"");
  }
  return *id;
}

}  // namespace

KnowledgeGraph graph_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("graph document is not a JSON object");
  const auto version = get_as<int>(doc, "schema_version", "graph");
  if (version != kGraphSchemaVersion) {
    throw ValidationError("graph schema_version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kGraphSchemaVersion) + ")");
  }
  KnowledgeGraph g;
  for (const auto& c : field(doc, "chunks", "graph")) {
    Chunk chunk;
    chunk.chunk_id = get_as<std::string>(c, "chunk_id", "chunk");
    chunk.doc_id = get_as<std::string>(c, "doc_id", "chunk");
    chunk.seq = get_as<std::size_t>(c, "seq", "chunk");
    chunk.token_span = {get_as<std::size_t>(c, "start", "chunk"), get_as<std::size_t>(c, "end", "chunk")};
    chunk.text = get_as<std::string>(c, "text", "chunk");
    g.register_chunk(chunk);
  }
  for (const auto& n : field(doc, "nodes", "graph")) {
    const auto name = get_as<std::string>(n, "name", "node");
    const auto kind = parse_node_kind(get_as<std::string>(n, "kind", "node"));
    if (!kind) throw ValidationError("node \"" + name + "\": unknown kind");
    if (canonicalize(name) != name || name.empty()) {
      throw IntegrityError("node name \"" + name + "\" is not canonical");
    }
    if (g.find(name)) throw IntegrityError("duplicate node \"" + name + "\"");
    const auto forms = get_as<std::vector<std::string>>(n, "surface_forms", "node");
    if (forms.empty()) throw IntegrityError("node \"" + name + "\" has no surface forms");
    for (const auto& form : forms) {
      if (canonicalize(form) != name) {
        throw IntegrityError("surface form \"" + form + "\" does not canonicalize to \"" + name + "\"");
      }
      g.upsert_entity(form, *kind);
    }
  }
  for (const auto& e : field(doc, "edges", "graph")) {
    const NodeId a = resolve(g, get_as<std::string>(e, "source", "edge"), "edge");
    const NodeId b = resolve(g, get_as<std::string>(e, "target", "edge"), "edge");
    const auto weight = get_as<double>(e, "weight", "edge");
    if (a == b) throw IntegrityError("edge is a self-loop on \"" + g.node(a).canonical_name + "\"");
    if (!(weight > 0.0)) throw IntegrityError("edge weight must be positive");
    if (g.edge(a, b)) {
      throw IntegrityError("duplicate edge between \"" + g.node(a).canonical_name + "\" and \"" +
                           g.node(b).canonical_name + "\"");
    }
    const std::string label = e.contains("label") ? get_as<std::string>(e, "label", "edge") : std::string();
    g.add_relation(a, b, weight, label);
  }
  for (const auto& l : field(doc, "chunk_links", "graph")) {
    const NodeId n = resolve(g, get_as<std::string>(l, "node", "chunk link"), "chunk link");
    const auto chunk_id = get_as<std::string>(l, "chunk_id", "chunk link");
    const auto count = get_as<std::uint32_t>(l, "mention_count", "chunk link");
    if (!g.has_chunk(chunk_id)) throw IntegrityError("chunk link references unknown chunk_id \"" + chunk_id + "\"");
    if (count == 0) throw IntegrityError("chunk link mention_count must be at least 1");
    for (const auto& existing : g.links_of(n)) {
      if (existing.chunk_id == chunk_id) {
        throw IntegrityError("duplicate chunk link (\"" + g.node(n).canonical_name + "\", \"" + chunk_id + "\")");
      }
    }
    g.link_chunk(n, chunk_id, count);
  }
  return g;
}

void write_json_file(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& path) {
  write_json_file(graph_to_json(graph), path);
}

KnowledgeGraph load_graph(const std::filesystem::path& path) { return graph_from_json(read_json_file(path)); }

}  // namespace graphgrade
