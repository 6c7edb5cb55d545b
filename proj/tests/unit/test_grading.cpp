#include <doctest.h>

#include <random>
#include <set>

#include "graphgrade/error.hpp"
#include "graphgrade/grading.hpp"
#include "graphgrade/retrieval.hpp"
#include "scripted_grader.hpp"
#include "temp_dir.hpp"
#include "toy_stores.hpp"

using namespace graphgrade;
using nlohmann::json;

namespace {

TaskRubrics enzyme() { return load_task_rubrics(fixture("rubrics/enzyme.json")); }

StudentResponse response(const std::string& id, const std::string& text) {
  return StudentResponse{id, "enzyme", text, {}};
}

RetrievalContext mixed_context() {
  RetrievalContext ctx;
  ctx.strategy = Strategy::graphrag_local;
  ctx.items.push_back({ItemKind::chunk, "a#0", "Rising temperature causes enzyme denaturation.", 0.9, {"a#0"}});
  ctx.items.push_back({ItemKind::community_report, "community-0-0", "About enzymes.", 0.5, {"a#0"}});
  ctx.items.push_back({ItemKind::evidence_subgraph, "subgraph", "Concepts by relevance:", 0.25, {"a#0"}});
  return ctx;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

Retriever fixed(RetrievalContext ctx) {
  return [ctx](std::string_view) { return ctx; };
}

}  // namespace

TEST_CASE("rubric files load every dimension") {
  const auto t = enzyme();
  CHECK(t.task_id == "enzyme");
  CHECK(t.at(Dimension::DCI).levels.size() == 3);
  CHECK(t.at(Dimension::CCC).levels.size() == 2);
  CHECK(t.at(Dimension::DCI).key_concepts == std::vector<std::string>{"enzyme denaturation", "protein folding"});
  CHECK(t.at(Dimension::SEP).question == t.question);
  const auto dir = load_rubric_dir(fixture("rubrics"));
  CHECK(dir.size() == 1);
  CHECK(dir.count("enzyme"));
}

TEST_CASE("malformed rubrics are rejected") {
  auto doc = json::parse(slurp(fixture("rubrics/enzyme.json")));
  auto without_ccc = doc;
  without_ccc["dimensions"].erase("CCC");
  CHECK_THROWS_AS(parse_task_rubrics(without_ccc), ValidationError);

  auto out_of_order = doc;
  out_of_order["dimensions"]["DCI"]["levels"][1]["code"] = 2;
  CHECK_THROWS_AS(parse_task_rubrics(out_of_order), ValidationError);

  auto single = doc;
  single["dimensions"]["CCC"]["levels"].erase(1);
  CHECK_THROWS_AS(parse_task_rubrics(single), ValidationError);

  auto blank = doc;
  blank["dimensions"]["SEP"]["levels"][0]["criteria"] = "  ";
  CHECK_THROWS_AS(parse_task_rubrics(blank), ValidationError);

  TempDir dir;
  dir.write("a.json", doc.dump());
  dir.write("b.json", doc.dump());
  CHECK_THROWS_AS(load_rubric_dir(dir.path()), ValidationError);
}

TEST_CASE("prompt lists every level, its exemplars and the labelled context") {
  const auto t = enzyme();
  const auto& rubric = t.at(Dimension::DCI);
  const auto p = assemble_prompt(response("r9", "Heat broke it."), rubric, mixed_context());

  CHECK(count(p.system, "\nLEVEL ") == rubric.levels.size());
  for (const auto& level : rubric.levels) {
    CHECK(p.system.find("Criteria: " + level.criteria) != std::string::npos);
    for (const auto& ex : level.exemplars) {
      CHECK(p.system.find(ex.response) != std::string::npos);
      CHECK(p.system.find(ex.rationale) != std::string::npos);
    }
  }
  CHECK(p.system.find("Dimension: DCI") != std::string::npos);
  CHECK(p.system.find("- protein folding") != std::string::npos);

  CHECK(p.user.find("QUESTION:\n" + t.question) != std::string::npos);
  CHECK(p.user.find("RESPONSE ID: r9") != std::string::npos);
  CHECK(p.user.find("STUDENT RESPONSE:\nHeat broke it.") != std::string::npos);
  CHECK(p.user.find("### EVIDENCE CHUNK [id=a#0] score 0.9000") != std::string::npos);
  CHECK(p.user.find("### COMMUNITY REPORT [id=community-0-0]") != std::string::npos);
  CHECK(p.user.find("### EVIDENCE SUBGRAPH [id=subgraph]") != std::string::npos);
  CHECK(p.user.find("### EVIDENCE CHUNK") < p.user.find("### COMMUNITY REPORT"));

  const auto bare = assemble_prompt(response("r9", "x"), rubric, RetrievalContext{});
  CHECK(bare.user.find("RETRIEVED CONTEXT") == std::string::npos);

  auto other = response("r9", "x");
  other.task_id = "photosynthesis";
  CHECK_THROWS_AS(assemble_prompt(other, rubric, {}), ValidationError);
}

TEST_CASE("decision parsing") {
  const auto t = enzyme();
  const auto& rubric = t.at(Dimension::DCI);
  const auto ctx = mixed_context();

  const auto d = parse_decision(
      "Here is my grade: {\"score\": 2, \"justification\": \"full chain\", \"evidence\": [\"a#0\", \"subgraph\"]} "
      "thanks",
      rubric, ctx, "r1");
  CHECK(d.score == 2);
  CHECK(d.justification == "full chain");
  CHECK(d.evidence_ids == std::vector<std::string>{"a#0", "subgraph"});
  CHECK(d.strategy == Strategy::graphrag_local);
  CHECK(!d.ungradable);

  CHECK_THROWS_AS(parse_decision("{\"score\": 7}", rubric, ctx, "r1"), ValidationError);
  CHECK_THROWS_AS(parse_decision("{\"score\": -1}", rubric, ctx, "r1"), ValidationError);
  CHECK_THROWS_AS(parse_decision("score is 2", rubric, ctx, "r1"), ParseError);
  CHECK_THROWS_AS(parse_decision("{\"score\": \"2\"}", rubric, ctx, "r1"), ParseError);
  CHECK_THROWS_AS(parse_decision("{\"score\": 1.5}", rubric, ctx, "r1"), ParseError);
  CHECK_THROWS_AS(parse_decision("{\"justification\": \"x\"}", rubric, ctx, "r1"), ParseError);
  CHECK_THROWS_AS(parse_decision("{\"score\": 1, \"evidence\": [\"zzz\"]}", rubric, ctx, "r1"), ValidationError);
  CHECK_THROWS_AS(parse_decision("{\"score\": 1, \"evidence\": \"a#0\"}", rubric, ctx, "r1"), ParseError);
}

TEST_CASE("garbage on one dimension yields an ungradable decision after two corrections") {
  auto client = scripted_grader([](const GradingCall& c) {
    return c.dimension == "SEP" ? std::string("I cannot decide.") : score_reply(1);
  });
  const auto ds = grade_response(response("r1", "heat"), enzyme(), fixed(mixed_context()), client);
  REQUIRE(ds.size() == 3);
  CHECK(ds[0].dimension == Dimension::DCI);
  CHECK(ds[0].score == 1);
  CHECK(ds[0].attempts == 1);
  CHECK(ds[1].dimension == Dimension::SEP);
  CHECK(ds[1].ungradable);
  CHECK(!ds[1].score);
  CHECK(ds[1].attempts == 1 + kMaxCorrectionRetries);
  CHECK(!ds[1].failure.empty());
  CHECK(ds[2].score == 1);
  CHECK(client.calls == 5);

  const auto j = decision_to_json(ds[1]);
  CHECK(j.at("score").is_null());
  CHECK(j.at("ungradable") == true);
  CHECK(j.at("dimension") == "SEP");
}

TEST_CASE("a correction that fixes the reply is accepted") {
  std::vector<std::string> users;
  auto client = scripted_grader([&](const GradingCall& c) {
    if (c.dimension != "DCI") return score_reply(0);
    users.push_back(c.user);
    return users.size() == 1 ? score_reply(9) : score_reply(2, "[\"a#0\"]");
  });
  const auto ds = grade_response(response("r1", "heat"), enzyme(), fixed(mixed_context()), client);
  CHECK(ds[0].score == 2);
  CHECK(ds[0].attempts == 2);
  REQUIRE(users.size() == 2);
  CHECK(users[1].find("CORRECTION:") != std::string::npos);
  CHECK(users[1].find("score 9 is not a level code") != std::string::npos);
}

TEST_CASE("client errors propagate") {
  FnClient down([](const std::string&, const std::string&) -> std::string { throw ClientError("offline"); });
  CHECK_THROWS_AS(grade_response(response("r1", "heat"), enzyme(), fixed({}), down), ClientError);
}

TEST_CASE("retrieval runs once per response with question and text") {
  int calls = 0;
  std::string seen;
  Retriever r = [&](std::string_view q) {
    ++calls;
    seen = std::string(q);
    return RetrievalContext{};
  };
  auto client = scripted_grader([](const GradingCall&) { return score_reply(0); });
  const auto t = enzyme();
  grade_response(response("r1", "heat"), t, r, client);
  CHECK(calls == 1);
  CHECK(seen == t.question + "\nheat");
}

TEST_CASE("recorded grading replays identically") {
  HashingEmbedder e;
  const auto artifact = build_fixture_artifact("toy");
  const auto stores = make_stores(artifact, e);
  Retriever r = [&](std::string_view q) { return retrieve(Strategy::hipporag, q, stores, {}); };
  std::mt19937_64 rng(2);
  auto scripted = scripted_grader([&](const GradingCall&) { return score_reply(static_cast<int>(rng() % 2)); });
  RecordingClient recorder(scripted);
  const auto t = enzyme();
  const auto resp = response("r1", "Rising temperature causes reaction failure.");
  const auto first = grade_response(resp, t, r, recorder);

  TempDir dir;
  recorder.save(dir / "replay.json");
  auto replay = ReplayClient::from_file(dir / "replay.json");
  for (int run = 0; run < 2; ++run) {
    const auto again = grade_response(resp, t, r, replay);
    REQUIRE(again.size() == first.size());
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(decision_to_json(again[i]) == decision_to_json(first[i]));
  }
}

TEST_CASE("graph retrieval puts the bridge sentence in the SEP prompt") {
  HashingEmbedder e;
  const auto artifact = build_fixture_artifact("toy");
  const auto stores = make_stores(artifact, e);
  const auto t = enzyme();
  const auto resp = response("r1", "Rising temperature leads to reaction failure.");
  const auto q = retrieval_query(t.question, resp.text);
  const std::string bridge = "Enzyme denaturation is a loss of protein folding.";

  const auto hippo = assemble_prompt(resp, t.at(Dimension::SEP), retrieve(Strategy::hipporag, q, stores, {}));
  CHECK(hippo.user.find(bridge) != std::string::npos);
  const auto none = assemble_prompt(resp, t.at(Dimension::SEP), retrieve(Strategy::non_rag, q, stores, {}));
  CHECK(none.user.find(bridge) == std::string::npos);
}

TEST_CASE("property: accepted evidence ids always come from the context") {
  std::mt19937_64 rng(8);
  const auto ctx = mixed_context();
  const std::vector<std::string> pool{"a#0", "community-0-0", "subgraph", "b#0", "ghost", "community-1-0"};
  for (int trial = 0; trial < 100; ++trial) {
    auto client = scripted_grader([&](const GradingCall&) {
      json ev = json::array();
      const int n = static_cast<int>(rng() % 4);
      for (int i = 0; i < n; ++i) ev.push_back(pool[rng() % pool.size()]);
      return score_reply(static_cast<int>(rng() % 2), ev.dump());
    });
    for (const auto& d : grade_response(response("r", "x"), enzyme(), fixed(ctx), client)) {
      for (const auto& id : d.evidence_ids) CHECK(ctx.has_item(id));
      CHECK((d.ungradable || d.score.has_value()));
      CHECK(d.attempts >= 1);
      CHECK(d.attempts <= 1 + kMaxCorrectionRetries);
    }
  }
}
