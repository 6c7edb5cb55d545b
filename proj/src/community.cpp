#include "graphgrade/community.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <random>
#include <set>

#include "graphgrade/error.hpp"
#include "graphgrade/parallel.hpp"
#include "graphgrade/text.hpp"

namespace graphgrade {

namespace {

constexpr double kTol = 1e-10;

// Working graph for one aggregation level. Self-loops hold the weight of edges
// collapsed inside an aggregate node and count twice toward its degree.
struct WorkGraph {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj;
  std::vector<double> self_loop;
  std::vector<double> degree;
  double total = 0.0;  // 2m

  std::size_t size() const { return adj.size(); }
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  void shuffle(std::vector<std::uint32_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(gen_() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

WorkGraph from_graph(const KnowledgeGraph& graph) {
  WorkGraph g;
  const std::size_t n = graph.node_count();
  g.adj.resize(n);
  g.self_loop.assign(n, 0.0);
  g.degree.assign(n, 0.0);
  for (NodeId v = 0; v < n; ++v) {
    for (const auto& nb : graph.neighbors(v)) {
      g.adj[v].emplace_back(nb.node, nb.weight);
      g.degree[v] += nb.weight;
    }
    g.total += g.degree[v];
  }
  return g;
}

// Renumbers community ids 0..k-1 in order of first appearance; returns k.
std::uint32_t compact(std::vector<std::uint32_t>& membership) {
  std::map<std::uint32_t, std::uint32_t> remap;
  for (auto& c : membership) {
    auto [it, inserted] = remap.emplace(c, static_cast<std::uint32_t>(remap.size()));
    c = it->second;
  }
  return static_cast<std::uint32_t>(remap.size());
}

// Queue-driven local moving. Membership ids must lie in [0, n).
void move_nodes(const WorkGraph& g, std::vector<std::uint32_t>& m, double gamma, Rng& rng) {
  const std::size_t n = g.size();
  std::vector<double> k_comm(n, 0.0);
  std::vector<std::uint32_t> size(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    k_comm[m[v]] += g.degree[v];
    ++size[m[v]];
  }
  std::vector<std::uint32_t> empty;
  for (std::uint32_t c = static_cast<std::uint32_t>(n); c-- > 0;) {
    if (size[c] == 0) empty.push_back(c);
  }

  std::vector<std::uint32_t> order(n);
  for (std::uint32_t v = 0; v < n; ++v) order[v] = v;
  rng.shuffle(order);
  std::deque<std::uint32_t> queue(order.begin(), order.end());
  std::vector<char> queued(n, 1);

  std::vector<double> w_to(n, 0.0);
  std::vector<char> seen(n, 0);
  std::vector<std::uint32_t> touched;

  while (!queue.empty()) {
    const std::uint32_t v = queue.front();
    queue.pop_front();
    queued[v] = 0;
    const std::uint32_t from = m[v];
    const double kv = g.degree[v];

    for (const auto& [u, w] : g.adj[v]) {
      const std::uint32_t c = m[u];
      if (!seen[c]) {
        seen[c] = 1;
        touched.push_back(c);
      }
      w_to[c] += w;
    }
    k_comm[from] -= kv;
    --size[from];

    std::uint32_t best = from;
    double best_gain = w_to[from] - gamma * kv * k_comm[from] / g.total;
    for (std::uint32_t c : touched) {
      if (c == from) continue;
      const double gain = w_to[c] - gamma * kv * k_comm[c] / g.total;
      if (gain > best_gain + kTol) {
        best = c;
        best_gain = gain;
      }
    }
    bool took_empty = false;
    if (best_gain < -kTol && size[from] > 0) {
      best = empty.back();
      took_empty = true;
    }

    k_comm[best] += kv;
    ++size[best];
    m[v] = best;
    if (took_empty) empty.pop_back();
    if (best != from) {
      if (size[from] == 0) empty.push_back(from);
      for (const auto& [u, w] : g.adj[v]) {
        if (!queued[u] && m[u] != best) {
          queued[u] = 1;
          queue.push_back(u);
        }
      }
    }

    for (std::uint32_t c : touched) {
      w_to[c] = 0.0;
      seen[c] = 0;
    }
    touched.clear();
  }
}

// Merges singletons inside each community of `p`, choosing among
// non-decreasing merges at random with weight exp(gain / theta).
std::vector<std::uint32_t> refine(const WorkGraph& g, const std::vector<std::uint32_t>& p, std::uint32_t p_count,
                                  double gamma, double theta, Rng& rng) {
  const std::size_t n = g.size();
  std::vector<std::uint32_t> r(n);
  std::vector<double> k_r(n), ext_r(n), k_in_s(n, 0.0);
  std::vector<std::uint32_t> size_r(n, 1);
  std::vector<double> k_s(p_count, 0.0);
  for (std::uint32_t v = 0; v < n; ++v) {
    r[v] = v;
    k_r[v] = g.degree[v];
    k_s[p[v]] += g.degree[v];
    for (const auto& [u, w] : g.adj[v]) {
      if (p[u] == p[v]) k_in_s[v] += w;
    }
    ext_r[v] = k_in_s[v];
  }

  std::vector<std::uint32_t> order(n);
  for (std::uint32_t v = 0; v < n; ++v) order[v] = v;
  rng.shuffle(order);

  std::vector<double> w_to(n, 0.0);
  std::vector<char> seen(n, 0);
  std::vector<std::uint32_t> touched;
  std::vector<std::pair<std::uint32_t, double>> candidates;

  for (std::uint32_t v : order) {
    if (r[v] != v || size_r[v] != 1) continue;
    const double kv = g.degree[v];
    const double ks = k_s[p[v]];
    if (k_in_s[v] + kTol < gamma * kv * (ks - kv) / g.total) continue;

    for (const auto& [u, w] : g.adj[v]) {
      if (p[u] != p[v]) continue;
      const std::uint32_t c = r[u];
      if (!seen[c]) {
        seen[c] = 1;
        touched.push_back(c);
      }
      w_to[c] += w;
    }
    candidates.clear();
    double max_gain = 0.0;
    for (std::uint32_t c : touched) {
      if (ext_r[c] + kTol < gamma * k_r[c] * (ks - k_r[c]) / g.total) continue;
      const double gain = w_to[c] - gamma * kv * k_r[c] / g.total;
      if (gain < 0.0) continue;
      candidates.emplace_back(c, gain);
      max_gain = std::max(max_gain, gain);
    }
    if (!candidates.empty()) {
      double total = std::exp(-max_gain / theta);  // staying put has gain 0
      for (auto& cand : candidates) {
        cand.second = std::exp((cand.second - max_gain) / theta);
        total += cand.second;
      }
      double draw = rng.uniform() * total - std::exp(-max_gain / theta);
      std::uint32_t target = v;
      if (draw >= 0.0) {
        target = candidates.back().first;
        for (const auto& [c, weight] : candidates) {
          if (draw < weight) {
            target = c;
            break;
          }
          draw -= weight;
        }
      }
      if (target != v) {
        ext_r[target] += k_in_s[v] - 2.0 * w_to[target];
        k_r[target] += kv;
        ++size_r[target];
        size_r[v] = 0;
        k_r[v] = 0.0;
        r[v] = target;
      }
    }

    for (std::uint32_t c : touched) {
      w_to[c] = 0.0;
      seen[c] = 0;
    }
    touched.clear();
  }
  return r;
}

WorkGraph aggregate(const WorkGraph& g, const std::vector<std::uint32_t>& part, std::uint32_t count) {
  WorkGraph out;
  out.adj.resize(count);
  out.self_loop.assign(count, 0.0);
  out.degree.assign(count, 0.0);
  out.total = g.total;
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> between;
  for (std::uint32_t v = 0; v < g.size(); ++v) {
    const std::uint32_t cv = part[v];
    out.degree[cv] += g.degree[v];
    out.self_loop[cv] += g.self_loop[v];
    for (const auto& [u, w] : g.adj[v]) {
      if (u <= v) continue;
      const std::uint32_t cu = part[u];
      if (cu == cv) {
        out.self_loop[cv] += w;
      } else {
        between[{std::min(cu, cv), std::max(cu, cv)}] += w;
      }
    }
  }
  for (const auto& [key, w] : between) {
    out.adj[key.first].emplace_back(key.second, w);
    out.adj[key.second].emplace_back(key.first, w);
  }
  for (auto& row : out.adj) std::sort(row.begin(), row.end());
  return out;
}

// Splits every community into its connected pieces, labelled by first member.
Membership split_components(const KnowledgeGraph& graph, const Membership& membership) {
  const std::size_t n = graph.node_count();
  constexpr CommunityId kUnset = ~CommunityId{0};
  Membership out(n, kUnset);
  CommunityId next = 0;
  std::vector<NodeId> stack;
  for (NodeId start = 0; start < n; ++start) {
    if (out[start] != kUnset) continue;
    out[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const NodeId v = stack.back();
      stack.pop_back();
      for (const auto& nb : graph.neighbors(v)) {
        if (out[nb.node] == kUnset && membership[nb.node] == membership[v]) {
          out[nb.node] = next;
          stack.push_back(nb.node);
        }
      }
    }
    ++next;
  }
  return out;
}

}  // namespace

std::size_t CommunityPartition::community_count(std::size_t level) const {
  const auto& m = levels.at(level);
  return m.empty() ? 0 : *std::max_element(m.begin(), m.end()) + 1;
}

std::vector<std::vector<NodeId>> CommunityPartition::communities(std::size_t level) const {
  std::vector<std::vector<NodeId>> out(community_count(level));
  const auto& m = levels.at(level);
  for (NodeId v = 0; v < m.size(); ++v) out[m[v]].push_back(v);
  return out;
}

double modularity(const KnowledgeGraph& graph, const Membership& membership, double resolution) {
  const std::size_t n = graph.node_count();
  if (membership.size() != n) throw ValidationError("membership size does not match the graph");
  std::map<CommunityId, double> internal, degree;
  double m = 0.0;
  for (const auto& e : graph.edges()) {
    m += e.weight;
    if (membership[e.a] == membership[e.b]) internal[membership[e.a]] += e.weight;
  }
  if (m == 0.0) return 0.0;
  for (NodeId v = 0; v < n; ++v) degree[membership[v]] += graph.weighted_degree(v);
  double q = 0.0;
  for (const auto& [c, k] : degree) {
    const auto it = internal.find(c);
    const double in = it == internal.end() ? 0.0 : it->second;
    q += in / m - resolution * (k / (2.0 * m)) * (k / (2.0 * m));
  }
  return q;
}

CommunityPartition leiden_partition(const KnowledgeGraph& graph, const LeidenOptions& options) {
  if (!(options.resolution > 0.0)) throw ValidationError("resolution must be positive");
  if (!(options.randomness > 0.0)) throw ValidationError("randomness must be positive");
  CommunityPartition out;
  const std::size_t n = graph.node_count();
  if (n == 0) return out;

  Membership identity(n);
  for (NodeId v = 0; v < n; ++v) identity[v] = v;

  std::vector<Membership> raw;
  WorkGraph g = from_graph(graph);
  if (g.total > 0.0) {
    Rng rng(options.seed);
    std::vector<std::uint32_t> flat = identity;  // original node -> aggregate node
    std::vector<std::uint32_t> p(g.size());
    for (std::uint32_t v = 0; v < g.size(); ++v) p[v] = v;
    for (;;) {
      move_nodes(g, p, options.resolution, rng);
      const std::uint32_t p_count = compact(p);
      if (p_count == g.size()) break;
      auto basis = refine(g, p, p_count, options.resolution, options.randomness, rng);
      std::uint32_t count = compact(basis);
      if (count == g.size()) {
        basis = p;
        count = p_count;
      }
      for (auto& a : flat) a = basis[a];
      raw.push_back(flat);

      std::vector<std::uint32_t> next_p(count);
      for (std::uint32_t v = 0; v < g.size(); ++v) next_p[basis[v]] = p[v];
      g = aggregate(g, basis, count);
      p = std::move(next_p);
    }
  }
  if (raw.empty()) raw.push_back(identity);

  for (const auto& level : raw) {
    auto split = split_components(graph, level);
    if (!out.levels.empty() && out.levels.back() == split) continue;
    out.quality.push_back(modularity(graph, split, options.resolution));
    out.levels.push_back(std::move(split));
  }
  return out;
}

std::vector<NodeId> key_entities(const KnowledgeGraph& graph, const std::vector<NodeId>& members) {
  std::vector<std::pair<double, NodeId>> ranked;
  ranked.reserve(members.size());
  for (NodeId v : members) ranked.emplace_back(graph.weighted_degree(v), v);
  std::sort(ranked.begin(), ranked.end(), [](const auto& l, const auto& r) {
    if (l.first != r.first) return l.first > r.first;
    return l.second < r.second;
  });
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < ranked.size() && i < kKeyEntityCount; ++i) out.push_back(ranked[i].second);
  return out;
}

std::string community_system_prompt() {
  return "You summarize clusters of a knowledge graph built from course materials. Write one short paragraph "
         "stating what the cluster is about and how its concepts relate. Use only the entities, relations and "
         "excerpts given. Reply with the paragraph only.";
}

std::string community_user_prompt(const KnowledgeGraph& graph, CommunityId id, std::size_t level,
                                  const std::vector<NodeId>& members) {
  constexpr std::size_t kMaxRelations = 20;
  constexpr std::size_t kMaxExcerpts = 5;
  const std::set<NodeId> in(members.begin(), members.end());

  std::string out = "COMMUNITY " + std::to_string(id) + " (level " + std::to_string(level) + ")\nENTITIES:\n";
  for (NodeId v : in) {
    const auto& node = graph.node(v);
    out += "- " + node.canonical_name + " (" + std::string(to_string(node.kind)) + ")\n";
  }

  std::vector<RelationEdge> relations;
  for (const auto& e : graph.edges()) {
    if (in.count(e.a) && in.count(e.b)) relations.push_back(e);
  }
  std::stable_sort(relations.begin(), relations.end(),
                   [](const RelationEdge& l, const RelationEdge& r) { return l.weight > r.weight; });
  if (relations.size() > kMaxRelations) relations.resize(kMaxRelations);
  out += "RELATIONS:\n";
  for (const auto& e : relations) {
    const std::string mid = e.label.empty() ? "--" : e.label;
    out += "- " + graph.node(e.a).canonical_name + " " + mid + " " + graph.node(e.b).canonical_name + "\n";
  }

  std::map<std::string, std::uint32_t> mentions;
  for (NodeId v : in) {
    for (const auto& link : graph.links_of(v)) mentions[link.chunk_id] += link.mention_count;
  }
  std::vector<std::pair<std::string, std::uint32_t>> excerpts(mentions.begin(), mentions.end());
  std::stable_sort(excerpts.begin(), excerpts.end(), [](const auto& l, const auto& r) { return l.second > r.second; });
  if (excerpts.size() > kMaxExcerpts) excerpts.resize(kMaxExcerpts);
  out += "EXCERPTS:\n";
  for (const auto& [chunk_id, count] : excerpts) out += "[" + chunk_id + "] " + graph.chunk(chunk_id).text + "\n";
  return out;
}

CommunityReport summarize_community(const KnowledgeGraph& graph, CommunityId id, std::size_t level,
                                    const std::vector<NodeId>& members, LlmClient& client,
                                    const DecodingParams& params) {
  const std::string where = "community " + std::to_string(id) + " (level " + std::to_string(level) + ")";
  if (members.empty()) throw ValidationError(where + " has no members");
  std::string reply;
  try {
    reply = client.complete(community_system_prompt(), community_user_prompt(graph, id, level, members), params);
  } catch (const std::exception& e) {
    throw ClientError(where + ": " + e.what());
  }
  CommunityReport report;
  report.community_id = id;
  report.level = level;
  report.members = members;
  std::sort(report.members.begin(), report.members.end());
  report.summary = trim(reply);
  if (report.summary.empty()) throw ClientError(where + ": summarizer returned an empty summary");
  report.key_entities = key_entities(graph, report.members);
  return report;
}

std::vector<CommunityReport> summarize_partition(const KnowledgeGraph& graph, const CommunityPartition& partition,
                                                 LlmClient& client, std::size_t max_in_flight,
                                                 const DecodingParams& params) {
  struct Job {
    std::size_t level;
    CommunityId id;
    std::vector<NodeId> members;
  };
  std::vector<Job> jobs;
  for (std::size_t level = 0; level < partition.levels.size(); ++level) {
    auto groups = partition.communities(level);
    for (CommunityId c = 0; c < groups.size(); ++c) jobs.push_back(Job{level, c, std::move(groups[c])});
  }
  std::vector<CommunityReport> reports(jobs.size());
  parallel_for_index(jobs.size(), max_in_flight, [&](std::size_t i) {
    reports[i] = summarize_community(graph, jobs[i].id, jobs[i].level, jobs[i].members, client, params);
  });
  return reports;
}

const CommunityReport* GraphLayer::report(std::size_t level, CommunityId id) const {
  for (const auto& r : reports) {
    if (r.level == level && r.community_id == id) return &r;
  }
  return nullptr;
}

std::string report_item_id(std::size_t level, CommunityId id) {
  return "community-" + std::to_string(level) + "-" + std::to_string(id);
}

RetrievalContext local_search(std::string_view query, const GraphLayer& layer, const NodeLinker& linker,
                              std::size_t budget, std::size_t level) {
  RetrievalContext ctx;
  ctx.strategy = Strategy::graphrag_local;
  const auto matched = linker.link(query);
  if (matched.empty() || layer.partition.levels.empty()) {
    ctx.unlinked = true;
    return ctx;
  }
  const auto& graph = layer.graph;
  const std::size_t lvl = std::min(level, layer.partition.levels.size() - 1);
  const auto& membership = layer.partition.levels[lvl];

  std::set<NodeId> expanded;
  for (const auto& [v, weight] : matched) {
    expanded.insert(v);
    for (const auto& nb : graph.neighbors(v)) expanded.insert(nb.node);
  }
  std::map<std::string, double> chunk_scores;
  for (NodeId v : expanded) {
    for (const auto& link : graph.links_of(v)) chunk_scores[link.chunk_id] += link.mention_count;
  }
  std::vector<ScoredId> chunks;
  for (const auto& [id, s] : chunk_scores) chunks.push_back(ScoredId{id, s});
  sort_ranked(chunks);
  for (const auto& c : chunks) ctx.items.push_back(ContextItem{ItemKind::chunk, c.id, graph.chunk(c.id).text, c.score, {c.id}});

  std::map<CommunityId, std::size_t> hits;
  for (const auto& [v, weight] : matched) ++hits[membership[v]];
  std::vector<ContextItem> reports;
  for (const auto& [c, count] : hits) {
    const auto* report = layer.report(lvl, c);
    if (!report) throw IntegrityError("no report for " + report_item_id(lvl, c));
    ContextItem item;
    item.kind = ItemKind::community_report;
    item.id = report_item_id(lvl, c);
    std::vector<std::string> names;
    for (NodeId v : report->key_entities) names.push_back(graph.node(v).canonical_name);
    item.text = report->summary + "\nKey entities: " + join(names, ", ");
    item.score = static_cast<double>(count) / static_cast<double>(report->members.size());
    std::set<std::string> provenance;
    for (NodeId v : report->members) {
      for (const auto& link : graph.links_of(v)) provenance.insert(link.chunk_id);
    }
    item.provenance.assign(provenance.begin(), provenance.end());
    reports.push_back(std::move(item));
  }
  std::stable_sort(reports.begin(), reports.end(),
                   [](const ContextItem& l, const ContextItem& r) { return l.score > r.score; });
  for (auto& r : reports) ctx.items.push_back(std::move(r));
  if (ctx.items.size() > budget) ctx.items.resize(budget);
  return ctx;
}

}  // namespace graphgrade
