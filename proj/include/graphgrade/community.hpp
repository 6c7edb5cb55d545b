#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "graphgrade/context.hpp"
#include "graphgrade/kgraph.hpp"
#include "graphgrade/linking.hpp"
#include "graphgrade/llm.hpp"

namespace graphgrade {

using CommunityId = std::uint32_t;
using Membership = std::vector<CommunityId>;  // indexed by NodeId

struct CommunityPartition {
  std::vector<Membership> levels;  // level 0 is the finest
  std::vector<double> quality;     // modularity per level

  std::size_t community_count(std::size_t level) const;
  /// Members of each community at `level`, ascending node ids.
  std::vector<std::vector<NodeId>> communities(std::size_t level) const;
};

struct LeidenOptions {
  double resolution = 1.0;
  std::uint64_t seed = 0;
  double randomness = 0.01;  // temperature of the refinement merge choice
};

/// Sum over communities of internal/m - resolution * (degree/2m)^2. Zero for a
/// graph without edges.
double modularity(const KnowledgeGraph& graph, const Membership& membership, double resolution = 1.0);

/// Leiden with modularity as quality. Each aggregation pass contributes the
/// partition it aggregated by; levels are split into connected components and
/// labelled by first member. Empty graph -> no levels.
CommunityPartition leiden_partition(const KnowledgeGraph& graph, const LeidenOptions& options = {});

struct CommunityReport {
  CommunityId community_id = 0;
  std::size_t level = 0;
  std::vector<NodeId> members;
  std::string summary;
  std::vector<NodeId> key_entities;  // at most 5, by weighted degree then id
};

inline constexpr std::size_t kKeyEntityCount = 5;

std::vector<NodeId> key_entities(const KnowledgeGraph& graph, const std::vector<NodeId>& members);

std::string community_system_prompt();
/// ENTITIES, RELATIONS and EXCERPTS sections for one community.
std::string community_user_prompt(const KnowledgeGraph& graph, CommunityId id, std::size_t level,
                                  const std::vector<NodeId>& members);

/// Throws ValidationError for an empty community; client failures are
/// rethrown as ClientError naming the community.
CommunityReport summarize_community(const KnowledgeGraph& graph, CommunityId id, std::size_t level,
                                    const std::vector<NodeId>& members, LlmClient& client,
                                    const DecodingParams& params = {});

/// Reports for every community at every level, ordered by (level, id).
std::vector<CommunityReport> summarize_partition(const KnowledgeGraph& graph, const CommunityPartition& partition,
                                                 LlmClient& client, std::size_t max_in_flight = 1,
                                                 const DecodingParams& params = {});

/// Graph plus its precomputed partition and reports.
struct GraphLayer {
  KnowledgeGraph graph;
  CommunityPartition partition;
  std::vector<CommunityReport> reports;

  const CommunityReport* report(std::size_t level, CommunityId id) const;
};

std::string report_item_id(std::size_t level, CommunityId id);

/// Matched nodes and their neighbors contribute their chunks (score = summed
/// mention counts); each matched node's community report follows the chunks.
/// `level` past the top of the hierarchy uses the top level.
RetrievalContext local_search(std::string_view query, const GraphLayer& layer, const NodeLinker& linker,
                              std::size_t budget, std::size_t level = 0);

}  // namespace graphgrade
