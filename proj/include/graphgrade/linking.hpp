#pragma once

#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "graphgrade/embed_index.hpp"
#include "graphgrade/kgraph.hpp"

namespace graphgrade {

inline constexpr double kDefaultLinkThreshold = 0.6;
inline constexpr std::size_t kMaxTermWords = 3;

/// Candidate query terms: every 1..3-gram of lexical tokens, joined by one space.
std::vector<std::string> query_terms(std::string_view query);

/// Maps query text onto graph nodes.
///
/// Exact matches compare the lexical-token form of query n-grams with that of
/// node names; each occurrence adds 1 to the node. Only when nothing matches
/// exactly, each distinct term is embedded and credited to its most similar
/// node name if the cosine reaches the threshold.
class NodeLinker {
 public:
  NodeLinker(const KnowledgeGraph& graph, Embedder& embedder, double threshold = kDefaultLinkThreshold);

  /// node -> accumulated term frequency; empty when the query is unlinkable.
  std::map<NodeId, double> link(std::string_view query) const;

  double threshold() const noexcept { return threshold_; }

 private:
  const KnowledgeGraph* graph_;
  Embedder* embedder_;
  double threshold_;
  std::unordered_map<std::string, std::vector<NodeId>> by_key_;
  std::vector<Embedding> name_embeddings_;  // zero vectors are skipped
};

}  // namespace graphgrade
