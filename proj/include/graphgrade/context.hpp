#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace graphgrade {

enum class Strategy { non_rag, flat, graphrag_local, hipporag };

std::string_view to_string(Strategy strategy);
std::optional<Strategy> parse_strategy(std::string_view name);
/// "non_rag, flat, graphrag_local, hipporag"
std::string strategy_names();

enum class ItemKind { chunk, community_report, evidence_subgraph };

std::string_view to_string(ItemKind kind);

struct ContextItem {
  ItemKind kind = ItemKind::chunk;
  std::string id;                       // what a grader cites as evidence
  std::string text;
  double score = 0.0;
  std::vector<std::string> provenance;  // supporting chunk ids, ascending
};

struct RetrievalContext {
  Strategy strategy = Strategy::non_rag;
  bool background_only = false;
  bool unlinked = false;  // graph strategy found no query terms in the graph
  std::vector<ContextItem> items;

  bool has_item(std::string_view id) const;
};

}  // namespace graphgrade
