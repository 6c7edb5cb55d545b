#include "graphgrade/ppr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "graphgrade/error.hpp"

namespace graphgrade {

SeedSet make_seed_set(const std::map<NodeId, double>& weights) {
  if (weights.empty()) throw ValidationError("seed set is empty");
  double total = 0.0;
  for (const auto& [node, w] : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("seed weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("seed weights sum to zero");
  SeedSet seeds;
  for (const auto& [node, w] : weights) seeds.weights.emplace(node, w / total);
  return seeds;
}

std::optional<SeedSet> link_seeds(std::string_view query, const NodeLinker& linker) {
  const auto weights = linker.link(query);
  if (weights.empty()) return std::nullopt;
  return make_seed_set(weights);
}

NodeScores personalized_pagerank(const KnowledgeGraph& graph, const SeedSet& seeds, const PprOptions& options) {
  const double r = options.restart_prob;
  if (!(r > 0.0 && r < 1.0)) throw ValidationError("restart_prob must lie in (0, 1)");
  const std::size_t n = graph.node_count();
  if (n == 0) throw ValidationError("personalized PageRank needs at least one node");
  if (seeds.weights.empty()) throw ValidationError("seed set is empty");

  std::vector<double> restart(n, 0.0);
  double seed_total = 0.0;
  for (const auto& [node, w] : seeds.weights) {
    if (node >= n) throw ValidationError("seed references unknown node " + std::to_string(node));
    if (!(w >= 0.0)) throw ValidationError("seed weights must be non-negative");
    restart[node] = w;
    seed_total += w;
  }
  if (std::abs(seed_total - 1.0) > 1e-9) throw ValidationError("seed weights must sum to 1");

  std::vector<double> degree(n);
  for (NodeId v = 0; v < n; ++v) degree[v] = graph.weighted_degree(v);

  NodeScores out;
  out.restart_prob = r;
  std::vector<double> p = restart;
  std::vector<double> next(n);
  for (out.iterations = 0; out.iterations < options.max_iter;) {
    double dangling = 0.0;
    for (NodeId v = 0; v < n; ++v) {
      if (degree[v] == 0.0) dangling += p[v];
    }
    for (NodeId v = 0; v < n; ++v) next[v] = (r + (1.0 - r) * dangling) * restart[v];
    for (NodeId v = 0; v < n; ++v) {
      if (degree[v] == 0.0 || p[v] == 0.0) continue;
      const double share = (1.0 - r) * p[v] / degree[v];
      for (const auto& nb : graph.neighbors(v)) next[nb.node] += share * nb.weight;
    }
    double residual = 0.0;
    for (NodeId v = 0; v < n; ++v) residual += std::abs(next[v] - p[v]);
    p.swap(next);
    ++out.iterations;
    out.residual = residual;
    if (residual < options.eps) break;
  }
  out.scores = std::move(p);
  return out;
}

std::vector<ScoredId> rank_chunks(const KnowledgeGraph& graph, const NodeScores& scores) {
  std::map<std::string, double> by_chunk;
  for (const auto& link : graph.chunk_links()) {
    const double s = link.node < scores.scores.size() ? scores.scores[link.node] : 0.0;
    if (s > 0.0) by_chunk[link.chunk_id] += s * link.mention_count;
  }
  std::vector<ScoredId> ranked;
  ranked.reserve(by_chunk.size());
  for (auto& [id, s] : by_chunk) ranked.push_back(ScoredId{id, s});
  sort_ranked(ranked);
  return ranked;
}

namespace {

std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

ContextItem evidence_subgraph(const KnowledgeGraph& graph, const NodeScores& scores, std::size_t max_nodes) {
  std::vector<NodeId> order;
  for (NodeId v = 0; v < scores.scores.size(); ++v) {
    if (scores.scores[v] > 0.0) order.push_back(v);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeId a, NodeId b) { return scores.scores[a] > scores.scores[b]; });
  if (order.size() > max_nodes) order.resize(max_nodes);

  ContextItem item;
  item.kind = ItemKind::evidence_subgraph;
  item.id = "subgraph";
  std::set<NodeId> chosen(order.begin(), order.end());
  std::set<std::string> provenance;
  std::string text = "Concepts by relevance:";
  for (NodeId v : order) {
    text += "\n- " + graph.node(v).canonical_name + " (" + format_score(scores.scores[v]) + ")";
    item.score += scores.scores[v];
    for (const auto& l : graph.links_of(v)) provenance.insert(l.chunk_id);
  }
  text += "\nRelations among them:";
  bool any_edge = false;
  for (const auto& e : graph.edges()) {
    if (!chosen.count(e.a) || !chosen.count(e.b)) continue;
    any_edge = true;
    const std::string label = e.label.empty() ? "related to" : e.label;
    char weight[32];
    std::snprintf(weight, sizeof weight, "%g", e.weight);
    text += "\n- " + graph.node(e.a).canonical_name + " --" + label + "-- " + graph.node(e.b).canonical_name +
            " (weight " + weight + ")";
  }
  if (!any_edge) text += "\n- none";
  if (!order.empty()) item.score /= static_cast<double>(order.size());
  item.text = std::move(text);
  item.provenance.assign(provenance.begin(), provenance.end());
  return item;
}

RetrievalContext hippo_retrieve(std::string_view query, const KnowledgeGraph& graph, const NodeLinker& linker,
                                const HippoOptions& options) {
  RetrievalContext ctx;
  ctx.strategy = Strategy::hipporag;
  const auto seeds = link_seeds(query, linker);
  if (!seeds) {
    ctx.unlinked = true;
    return ctx;
  }
  const auto scores = personalized_pagerank(graph, *seeds, options.ppr);
  auto ranked = rank_chunks(graph, scores);
  if (ranked.size() > options.k) ranked.resize(options.k);
  for (const auto& r : ranked) {
    const auto& chunk = graph.chunk(r.id);
    ctx.items.push_back(ContextItem{ItemKind::chunk, r.id, chunk.text, r.score, {r.id}});
  }
  ctx.items.push_back(evidence_subgraph(graph, scores, options.subgraph_nodes));
  std::stable_sort(ctx.items.begin(), ctx.items.end(),
                   [](const ContextItem& a, const ContextItem& b) { return a.score > b.score; });
  return ctx;
}

}  // namespace graphgrade
