// One line per acceptance criterion; exit status is non-zero if any fails.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "graph_builders.hpp"
#include "graphgrade/cli.hpp"
#include "graphgrade/community.hpp"
#include "graphgrade/config.hpp"
#include "graphgrade/evaluation.hpp"
#include "graphgrade/grading.hpp"
#include "graphgrade/ppr.hpp"
#include "graphgrade/retrieval.hpp"
#include "local_server.hpp"
#include "oracles.hpp"
#include "scripted_grader.hpp"
#include "toy_stores.hpp"
#include "workspace.hpp"

using namespace graphgrade;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

const char* kChainQuery = "rising temperature and reaction failure";

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<std::string> ids(const RetrievalContext& ctx) {
  std::vector<std::string> out;
  for (const auto& i : ctx.items) out.push_back(i.id);
  return out;
}

bool connected_communities(const KnowledgeGraph& g, const Membership& m) {
  std::map<CommunityId, std::size_t> size;
  for (auto c : m) ++size[c];
  std::set<CommunityId> done;
  for (NodeId s = 0; s < m.size(); ++s) {
    if (!done.insert(m[s]).second) continue;
    std::vector<bool> seen(m.size(), false);
    std::queue<NodeId> q;
    q.push(s);
    seen[s] = true;
    std::size_t reached = 0;
    while (!q.empty()) {
      const NodeId v = q.front();
      q.pop();
      ++reached;
      for (const auto& nb : g.neighbors(v)) {
        if (!seen[nb.node] && m[nb.node] == m[s]) {
          seen[nb.node] = true;
          q.push(nb.node);
        }
      }
    }
    if (reached != size[m[s]]) return false;
  }
  return true;
}

Outcome ac1_ppr_oracle() {
  Outcome o;
  std::mt19937_64 rng(2024);
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0, worst_sum = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 20);
    const auto edges = oracle::random_connected_graph(rng, n, 0.25);
    std::vector<double> seed(n, 0.0);
    for (int i = 0; i < n; ++i) {
      if (rng() % 4 == 0) seed[i] = 0.5 + static_cast<double>(rng() % 8);
    }
    if (std::accumulate(seed.begin(), seed.end(), 0.0) == 0.0) seed[rng() % n] = 1.0;
    const double total = std::accumulate(seed.begin(), seed.end(), 0.0);
    std::map<NodeId, double> weights;
    for (int i = 0; i < n; ++i) {
      seed[i] /= total;
      if (seed[i] > 0.0) weights[static_cast<NodeId>(i)] = seed[i];
    }
    const auto got = personalized_pagerank(graph_from_edges(n, edges), make_seed_set(weights), {0.15, 1e-12, 10000});
    const auto want = oracle::dense_ppr(n, edges, seed, 0.15);
    for (int i = 0; i < n; ++i) worst = std::max(worst, std::fabs(got.scores[i] - want[i]));
    worst_sum = std::max(worst_sum, std::fabs(std::accumulate(got.scores.begin(), got.scores.end(), 0.0) - 1.0));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  o.require(worst <= 1e-6, "L-inf error " + fmt("%.3g", worst));
  o.require(worst_sum <= 1e-8, "sum error " + fmt("%.3g", worst_sum));
  o.require(secs < 10.0, "took " + fmt("%.2f", secs) + " s");
  if (o.pass) o.detail = "max L-inf " + fmt("%.2g", worst) + ", max |sum-1| " + fmt("%.2g", worst_sum) + ", " +
                         fmt("%.3f", secs) + " s";
  return o;
}

Outcome ac2_dyad() {
  Outcome o;
  const auto s = personalized_pagerank(graph_from_edges(2, {{0, 1, 1.0}}), make_seed_set({{0, 1.0}}));
  const double r = 0.15, closed = r / (1.0 - (1.0 - r) * (1.0 - r));
  o.require(std::fabs(s.scores[0] - 0.540541) <= 1e-6, "p0 = " + fmt("%.9f", s.scores[0]));
  o.require(std::fabs(s.scores[1] - 0.459459) <= 1e-6, "p1 = " + fmt("%.9f", s.scores[1]));
  o.require(std::fabs(s.scores[0] - closed) <= 1e-6, "closed form " + fmt("%.9f", closed));
  if (o.pass) o.detail = "(" + fmt("%.6f", s.scores[0]) + ", " + fmt("%.6f", s.scores[1]) + ")";
  return o;
}

Outcome ac3_flat_exact() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> gauss;
  const std::size_t dim = 64;
  VectorIndex index(dim);
  std::vector<std::pair<std::string, std::vector<double>>> raw;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> v(dim);
    for (auto& x : v) x = gauss(rng);
    char id[16];
    std::snprintf(id, sizeof id, "v%04d", i);
    raw.emplace_back(id, v);
    index.add(id, Embedding{v});
  }
  int queries = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> q(dim);
    for (auto& x : q) x = gauss(rng);
    for (std::size_t k : {1, 5, 50}) {
      ++queries;
      const auto got = index.top_k(Embedding{q}, k);
      const auto want = oracle::brute_top_k(raw, q, k);
      o.require(got.size() == want.size(), "size mismatch at k=" + std::to_string(k));
      for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) {
        o.require(got[i].id == want[i].first, "rank " + std::to_string(i) + " differs at k=" + std::to_string(k));
        o.require(std::fabs(got[i].score - want[i].second) <= 1e-12, "score differs at k=" + std::to_string(k));
      }
    }
  }
  if (o.pass) o.detail = std::to_string(queries) + " queries over 1000 vectors, k in {1,5,50}";
  return o;
}

Outcome ac4_leiden() {
  Outcome o;
  auto edges = clique_edges(0, 4);
  const auto second = clique_edges(4, 4);
  edges.insert(edges.end(), second.begin(), second.end());
  const auto p = leiden_partition(graph_from_edges(8, edges), {1.0, 0, 0.01});
  o.require(!p.levels.empty(), "no levels for two cliques");
  for (const auto& level : p.levels) {
    o.require(level == Membership{0, 0, 0, 0, 1, 1, 1, 1}, "cliques not separated at some level");
  }
  std::mt19937_64 rng(100);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 60);
    const auto g = graph_from_edges(n, oracle::random_connected_graph(rng, n, 0.08));
    const LeidenOptions opts{1.0, static_cast<std::uint64_t>(trial), 0.01};
    const auto part = leiden_partition(g, opts);
    for (const auto& level : part.levels) {
      o.require(connected_communities(g, level), "disconnected community on graph " + std::to_string(trial));
    }
    o.require(leiden_partition(g, opts).levels == part.levels, "nondeterministic on graph " + std::to_string(trial));
  }
  if (o.pass) o.detail = std::to_string(p.levels.size()) + " level(s) on the cliques; 100 random graphs connected";
  return o;
}

Outcome ac5_multi_hop() {
  Outcome o;
  HashingEmbedder e;
  const auto artifact = build_fixture_artifact("toy");
  const auto stores = make_stores(artifact, e);
  const auto& g = artifact.full.graph;

  const auto hippo = retrieve(Strategy::hipporag, kChainQuery, stores, {});
  std::vector<std::string> chunks;
  for (const auto& item : hippo.items) {
    if (item.kind == ItemKind::chunk) chunks.push_back(item.id);
  }
  const bool b_top3 = std::find(chunks.begin(), std::min(chunks.end(), chunks.begin() + 3), "b#0") !=
                      std::min(chunks.end(), chunks.begin() + 3);
  o.require(!hippo.unlinked, "query did not link");
  o.require(b_top3, "b#0 not in hipporag top-3 chunks");

  // Same ranking from the dense oracle on the built graph.
  std::vector<oracle::WeightedEdge> edges;
  for (const auto& edge : g.edges()) edges.push_back({static_cast<int>(edge.a), static_cast<int>(edge.b), edge.weight});
  const auto seeds = link_seeds(kChainQuery, *stores.full.linker);
  std::vector<double> seed(g.node_count(), 0.0);
  for (const auto& [node, w] : seeds->weights) seed[node] = w;
  const auto p = oracle::dense_ppr(static_cast<int>(g.node_count()), edges, seed, 0.15);
  std::map<std::string, double> by_chunk;
  for (const auto& l : g.chunk_links()) {
    if (p[l.node] > 0.0) by_chunk[l.chunk_id] += p[l.node] * l.mention_count;
  }
  std::vector<std::pair<std::string, double>> ranked(by_chunk.begin(), by_chunk.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& l, const auto& r) {
    return std::fabs(l.second - r.second) > 1e-9 ? l.second > r.second : l.first < r.first;
  });
  std::vector<std::string> oracle_order;
  for (const auto& [id, s] : ranked) oracle_order.push_back(id);
  o.require(oracle_order == chunks, "chunk order differs from the dense oracle");

  const auto flat = retrieve(Strategy::flat, kChainQuery, stores, {});
  std::map<std::string, double> flat_score;
  for (const auto& item : flat.items) flat_score[item.id] = item.score;
  const double b = flat_score.count("b#0") ? flat_score["b#0"] : -1.0;
  o.require(!(b > flat_score["a#0"] && b > flat_score["c#0"]), "flat placed b#0 above both a#0 and c#0");

  if (o.pass) {
    std::string order;
    for (const auto& id : chunks) order += (order.empty() ? "" : " ") + id;
    o.detail = "hipporag chunks [" + order + "]; flat b#0 " + fmt("%.3f", b) + " vs a#0 " +
               fmt("%.3f", flat_score["a#0"]) + ", c#0 " + fmt("%.3f", flat_score["c#0"]);
  }
  return o;
}

// 6 tasks x 10 responses; correct[t][d] responses per cell get the gold score back.
const int kCorrect[6][3] = {{10, 8, 8}, {7, 9, 9}, {6, 5, 4}, {5, 5, 6}, {8, 6, 8}, {9, 5, 6}};
const char* kDims[3] = {"DCI", "SEP", "CCC"};

int gold_of(int task, int resp, int dim) { return (resp + task + dim) % 3; }

void write_synthetic_grading(const TempDir& dir) {
  for (int t = 1; t <= 6; ++t) {
    json dims = json::object();
    for (const char* d : kDims) {
      json levels = json::array();
      for (int code = 0; code < 3; ++code) {
        levels.push_back({{"code", code},
                          {"criteria", std::string(d) + " level " + std::to_string(code)},
                          {"exemplars", {{{"response", "sample " + std::to_string(code)}, {"rationale", "fits"}}}}});
      }
      dims[d] = {{"levels", levels}};
    }
    dir.write("rubrics/task" + std::to_string(t) + ".json",
              json{{"task_id", "task" + std::to_string(t)}, {"question", "Why does heat stop the reaction?"},
                   {"dimensions", dims}}
                  .dump(2));
  }
  std::string rows;
  for (int t = 1; t <= 6; ++t) {
    for (int i = 0; i < 10; ++i) {
      json gold = json::object();
      for (int d = 0; d < 3; ++d) gold[kDims[d]] = gold_of(t, i, d);
      rows += json{{"response_id", "t" + std::to_string(t) + "-r" + std::to_string(i)},
                   {"task_id", "task" + std::to_string(t)},
                   {"text", "Rising temperature causes enzyme denaturation, answer " + std::to_string(i)},
                   {"gold", gold}}
                  .dump() +
              "\n";
    }
  }
  dir.write("dataset.jsonl", rows);
}

std::string synthetic_reply(const GradingCall& c) {
  const int t = std::stoi(c.response_id.substr(1, c.response_id.find('-') - 1));
  const int i = std::stoi(c.response_id.substr(c.response_id.find("-r") + 2));
  int d = 0;
  while (c.dimension != kDims[d]) ++d;
  // One reply never parses; it is among the wrong ones for its cell.
  if (t == 3 && d == 1 && i == 9) return "The student seems confused.";
  const int gold = gold_of(t, i, d);
  return score_reply(i < kCorrect[t - 1][d] ? gold : (gold + 1) % 3);
}

struct SyntheticRun {
  Workspace ws;
  CliResult recorded;
};

std::unique_ptr<SyntheticRun> record_synthetic() {
  auto run = std::make_unique<SyntheticRun>();
  LocalServer srv;
  auto grader = scripted_grader(synthetic_reply);
  serve_chat(srv, [&](const std::string& s, const std::string& u) { return grader.complete(s, u, {}); });
  auto& ws = run->ws;
  write_synthetic_grading(ws.dir);
  ws.use_corpus(fixture("toy/corpus.jsonl"));
  ws.use_grading(ws.dir / "rubrics", ws.dir / "dataset.jsonl");
  ws.config["retrieval"] = {{"strategy", "hipporag"}};
  if (ws.run({"build"}).code != 0) throw std::runtime_error("build failed");
  ws.config["llm"] = {{"mode", "record"}, {"endpoint", srv.url("/v1/chat/completions")}, {"model", "m"},
                      {"max_in_flight", 4}};
  run->recorded = ws.run({"evaluate"});
  ws.config["llm"] = {{"mode", "replay"}};
  return run;
}

Outcome ac6_table_shape(SyntheticRun& run) {
  Outcome o;
  o.require(run.recorded.code == 0, "recording run failed: " + run.recorded.err);
  const auto r = run.ws.run({"evaluate"});
  o.require(r.code == 0, "replay run failed: " + r.err);

  const std::string hash = config_hash(load_config(run.ws.dir / "graphgrade.json"));
  const std::string expected =
      "# strategy=hipporag background_only=false config_hash=" + hash + " seed=0 failures=0\n"
      "Task     DCI    SEP    CCC\n"
      "task1    1.000  0.800  0.800\n"
      "task2    0.700  0.900  0.900\n"
      "task3    0.600  0.500  0.400\n"
      "task4    0.500  0.500  0.600\n"
      "task5    0.800  0.600  0.800\n"
      "task6    0.900  0.500  0.600\n"
      "Average  0.750  0.633  0.683\n";
  o.require(r.out == expected, "grid differs:\n" + r.out);
  o.require(r.err.find("ungradable 1;") != std::string::npos, "expected one ungradable decision: " + r.err);

  const auto as_json = json::parse(run.ws.run({"--format", "json", "evaluate"}).out);
  o.require(as_json.at("averages").at("SEP").get<double>() == (0.8 + 0.9 + 0.5 + 0.5 + 0.6 + 0.5) / 6.0,
            "SEP average is not the unweighted task mean");

  // The published HippoRAG column block, rebuilt from integer cell counts.
  AccuracyReport table;
  const std::vector<std::pair<std::string, std::array<Cell, 3>>> rows{
      {"Task 1", {Cell{34, 37}, Cell{30, 37}, Cell{28, 37}}}, {"Task 2", {Cell{32, 46}, Cell{39, 46}, Cell{42, 46}}},
      {"Task 3", {Cell{26, 44}, Cell{23, 44}, Cell{18, 44}}}, {"Task 4", {Cell{23, 46}, Cell{24, 46}, Cell{29, 46}}},
      {"Task 5", {Cell{25, 31}, Cell{20, 31}, Cell{26, 31}}}, {"Task 6", {Cell{39, 46}, Cell{25, 46}, Cell{28, 46}}}};
  for (const auto& [task, cells] : rows) {
    table.tasks.push_back(task);
    for (std::size_t d = 0; d < 3; ++d) table.cells[{task, kDimensions[d]}] = cells[d];
  }
  fill_averages(table);
  const auto text = render_report(table, ReportFormat::table_text);
  const std::string published =
      "Task 1   0.919  0.811  0.757\n"
      "Task 2   0.696  0.848  0.913\n"
      "Task 3   0.591  0.523  0.409\n"
      "Task 4   0.500  0.522  0.630\n"
      "Task 5   0.806  0.645  0.839\n"
      "Task 6   0.848  0.543  0.609\n"
      "Average  0.727  0.649  0.693\n";
  o.require(text.find(published) != std::string::npos, "published column block not reproduced:\n" + text);
  if (o.pass) o.detail = "6x3 grid exact, Average 0.750/0.633/0.683; published DCI mean renders 0.727";
  return o;
}

Outcome ac7_determinism(SyntheticRun& run) {
  Outcome o;
  for (const char* format : {"table_text", "json", "csv"}) {
    const auto a = run.ws.run({"--format", format, "evaluate"});
    const auto b = run.ws.run({"--format", format, "evaluate"});
    o.require(a.code == 0 && b.code == 0, std::string(format) + " run failed");
    o.require(!a.out.empty() && a.out == b.out, std::string(format) + " reports differ");
  }
  if (o.pass) o.detail = "table_text, json and csv reports byte-identical across replays";
  return o;
}

Outcome ac8_background() {
  Outcome o;
  HashingEmbedder e;
  RetrievalConfig cfg;
  cfg.background_only = true;
  const auto toy = build_fixture_artifact("toy");
  const auto with = retrieve(Strategy::hipporag, kChainQuery, make_stores(toy, e), cfg);
  o.require(with.has_item("b#0"), "background-labelled B chunk not surfaced");
  o.require(with.background_only, "background_only flag lost");

  const auto swapped = build_fixture_artifact("toy_swapped");
  const auto without = retrieve(Strategy::hipporag, kChainQuery, make_stores(swapped, e), cfg);
  o.require(!without.has_item("b#0"), "reference-labelled B chunk leaked into background retrieval");

  // Same routing through the command line.
  for (const auto& [corpus, expect] : std::vector<std::pair<std::string, bool>>{{"toy", true}, {"toy_swapped", false}}) {
    Workspace ws;
    ws.use_corpus(fixture(corpus + "/corpus.jsonl"));
    ws.run({"build"});
    const auto r = ws.run({"--background-only", "--strategy", "hipporag", "--format", "json", "retrieve", kChainQuery});
    const auto doc = json::parse(r.out);
    bool found = false;
    for (const auto& item : doc.at("items")) found = found || item.at("id") == "b#0";
    o.require(found == expect, "command line disagrees on " + corpus);
  }
  if (o.pass) o.detail = "toy: [" + [&] {
    std::string s;
    for (const auto& id : ids(with)) s += (s.empty() ? "" : " ") + id;
    return s;
  }() + "]; swapped: " + std::to_string(without.items.size()) + " item(s), no b#0";
  return o;
}

Outcome ac9_unlinked() {
  Outcome o;
  HashingEmbedder e;
  const auto stores = make_stores(build_fixture_artifact("toy"), e);
  auto rubrics = load_task_rubrics(fixture("rubrics/enzyme.json"));
  rubrics.question.clear();
  for (auto& [d, r] : rubrics.dimensions) r.question.clear();
  const StudentResponse resp{"r3", "enzyme", "Volcanoes erupt when magma rises.", {}};
  auto client = scripted_grader([](const GradingCall&) { return score_reply(0); });
  for (Strategy s : {Strategy::hipporag, Strategy::graphrag_local}) {
    const Retriever retriever = [&](std::string_view q) { return retrieve(s, q, stores, {}); };
    const auto decisions = grade_response(resp, rubrics, retriever, client);
    o.require(decisions.size() == 3, "grading did not complete");
    for (const auto& d : decisions) {
      o.require(d.unlinked, "unlinked not recorded for " + std::string(to_string(s)));
      o.require(!d.ungradable && d.score == 0, "decision not graded for " + std::string(to_string(s)));
      o.require(d.strategy == s, "strategy not recorded");
    }
    const auto ctx = retriever(resp.text);
    o.require(ids(ctx) == ids(flat_retrieve(resp.text, stores.full, e, 5)), "fallback is not flat retrieval");
  }
  if (o.pass) o.detail = "hipporag and graphrag_local grade via flat fallback with unlinked=true";
  return o;
}

}  // namespace

int main() {
  std::unique_ptr<SyntheticRun> synthetic;
  auto synthetic_run = [&]() -> SyntheticRun& {
    if (!synthetic) synthetic = record_synthetic();
    return *synthetic;
  };
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1 PPR matches dense oracle on 200 random graphs", ac1_ppr_oracle},
      {"AC2 PPR dyad closed form", ac2_dyad},
      {"AC3 flat top-k equals brute-force scan", ac3_flat_exact},
      {"AC4 Leiden separates cliques, connected, deterministic", ac4_leiden},
      {"AC5 hipporag recovers the bridge chunk flat misses", ac5_multi_hop},
      {"AC6 evaluation grid and Average row", [&] { return ac6_table_shape(synthetic_run()); }},
      {"AC7 replayed evaluations are byte-identical", [&] { return ac7_determinism(synthetic_run()); }},
      {"AC8 background-only routing", ac8_background},
      {"AC9 unlinked responses fall back to flat", ac9_unlinked},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << name << " -- " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
