#include "graphgrade/linking.hpp"

#include <set>

#include "graphgrade/text.hpp"

namespace graphgrade {

std::vector<std::string> query_terms(std::string_view query) {
  const auto tokens = lexical_tokens(query);
  std::vector<std::string> terms;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string term;
    for (std::size_t n = 0; n < kMaxTermWords && i + n < tokens.size(); ++n) {
      if (n) term.push_back(' ');
      term += tokens[i + n];
      terms.push_back(term);
    }
  }
  return terms;
}

NodeLinker::NodeLinker(const KnowledgeGraph& graph, Embedder& embedder, double threshold)
    : graph_(&graph), embedder_(&embedder), threshold_(threshold) {
  name_embeddings_.reserve(graph.node_count());
  for (const auto& n : graph.nodes()) {
    by_key_[join(lexical_tokens(n.canonical_name), " ")].push_back(n.id);
    name_embeddings_.push_back(embedder.embed(n.canonical_name));
  }
}

std::map<NodeId, double> NodeLinker::link(std::string_view query) const {
  std::map<NodeId, double> weights;
  const auto terms = query_terms(query);
  for (const auto& term : terms) {
    if (auto it = by_key_.find(term); it != by_key_.end()) {
      for (NodeId id : it->second) weights[id] += 1.0;
    }
  }
  if (!weights.empty() || graph_->node_count() == 0) return weights;

  std::map<std::string, int> frequency;
  for (const auto& term : terms) ++frequency[term];
  for (const auto& [term, count] : frequency) {
    const Embedding e = embedder_->embed(term);
    bool zero = true;
    for (double x : e.values) zero = zero && x == 0.0;
    if (zero) continue;
    double best = threshold_;
    std::optional<NodeId> best_node;
    for (NodeId id = 0; id < name_embeddings_.size(); ++id) {
      const auto& name = name_embeddings_[id];
      if (name.dim() != e.dim()) continue;
      bool name_zero = true;
      for (double x : name.values) name_zero = name_zero && x == 0.0;
      if (name_zero) continue;
      const double s = cosine_similarity(e, name);
      if (s > best || (s == best && !best_node)) {
        best = s;
        best_node = id;
      }
    }
    if (best_node) weights[*best_node] += count;
  }
  return weights;
}

}  // namespace graphgrade
