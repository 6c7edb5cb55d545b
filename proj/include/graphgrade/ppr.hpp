#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "graphgrade/context.hpp"
#include "graphgrade/embed_index.hpp"
#include "graphgrade/kgraph.hpp"
#include "graphgrade/linking.hpp"

namespace graphgrade {

/// Restart distribution. Weights are non-negative and sum to 1.
struct SeedSet {
  std::map<NodeId, double> weights;
};

struct NodeScores {
  std::vector<double> scores;  // indexed by NodeId
  double restart_prob = 0.15;
  int iterations = 0;
  double residual = 0.0;  // L1 change of the final iteration
};

struct PprOptions {
  double restart_prob = 0.15;
  double eps = 1e-8;
  int max_iter = 200;
};

/// Normalizes node -> weight into a SeedSet. Throws ValidationError when empty,
/// negative, or summing to zero.
SeedSet make_seed_set(const std::map<NodeId, double>& weights);

/// Seeds from query terms, weighted by term frequency; nullopt when unlinkable.
std::optional<SeedSet> link_seeds(std::string_view query, const NodeLinker& linker);

/// Power iteration of p <- r*s + (1-r)*T^T p, T the weight-normalized
/// transition matrix. Mass on isolated nodes returns to the seeds. Stops once
/// the L1 change drops below eps or after max_iter sweeps.
NodeScores personalized_pagerank(const KnowledgeGraph& graph, const SeedSet& seeds, const PprOptions& options = {});

/// Chunk score = sum of node score * mention count over linked nodes. Chunks
/// with zero score are omitted. Descending score, ties by chunk id.
std::vector<ScoredId> rank_chunks(const KnowledgeGraph& graph, const NodeScores& scores);

struct HippoOptions {
  PprOptions ppr;
  std::size_t k = 5;
  std::size_t subgraph_nodes = 8;
};

/// link_seeds -> personalized_pagerank -> rank_chunks, top-k chunks plus an
/// evidence-subgraph item naming the best nodes and the edges among them.
/// When no seed links, returns an empty context with `unlinked` set.
RetrievalContext hippo_retrieve(std::string_view query, const KnowledgeGraph& graph, const NodeLinker& linker,
                                const HippoOptions& options = {});

/// Text of the evidence subgraph over the top `max_nodes` scored nodes. Its
/// score is the mean score of the listed nodes.
ContextItem evidence_subgraph(const KnowledgeGraph& graph, const NodeScores& scores, std::size_t max_nodes);

}  // namespace graphgrade
