#include "graphgrade/context.hpp"

#include <algorithm>

namespace graphgrade {

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::non_rag:
      return "non_rag";
    case Strategy::flat:
      return "flat";
    case Strategy::graphrag_local:
      return "graphrag_local";
    case Strategy::hipporag:
      return "hipporag";
  }
  return "non_rag";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (auto s : {Strategy::non_rag, Strategy::flat, Strategy::graphrag_local, Strategy::hipporag}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

std::string strategy_names() { return "non_rag, flat, graphrag_local, hipporag"; }

std::string_view to_string(ItemKind kind) {
  switch (kind) {
    case ItemKind::chunk:
      return "chunk";
    case ItemKind::community_report:
      return "community_report";
    case ItemKind::evidence_subgraph:
      return "evidence_subgraph";
  }
  return "chunk";
}

bool RetrievalContext::has_item(std::string_view id) const {
  return std::any_of(items.begin(), items.end(), [&](const ContextItem& item) { return item.id == id; });
}

}  // namespace graphgrade
