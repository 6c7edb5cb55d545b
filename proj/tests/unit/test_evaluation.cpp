#include <doctest.h>

#include <random>

#include "graphgrade/error.hpp"
#include "graphgrade/evaluation.hpp"
#include "toy_stores.hpp"

using namespace graphgrade;
using nlohmann::json;

namespace {

StudentResponse gold(const std::string& id, const std::string& task, int dci, int sep, int ccc) {
  return StudentResponse{id, task, "text", {{Dimension::DCI, dci}, {Dimension::SEP, sep}, {Dimension::CCC, ccc}}};
}

GradeDecision graded(const std::string& id, Dimension d, std::optional<int> score) {
  GradeDecision g;
  g.response_id = id;
  g.dimension = d;
  g.score = score;
  g.ungradable = !score;
  return g;
}

// Report with one task per entry of `cells`; every dimension gets the same (correct, total).
AccuracyReport literal_report(const std::vector<std::pair<std::string, Cell>>& cells) {
  AccuracyReport r;
  for (const auto& [task, cell] : cells) {
    r.tasks.push_back(task);
    for (Dimension d : kDimensions) r.cells[{task, d}] = cell;
  }
  fill_averages(r);
  r.metadata = RunMetadata{"hipporag", false, "abc", 7, 0};
  return r;
}

}  // namespace

TEST_CASE("natural task order") {
  CHECK(natural_less("task2", "task10"));
  CHECK(!natural_less("task10", "task2"));
  CHECK(natural_less("a", "b"));
  CHECK(natural_less("t02", "t3"));
  CHECK(!natural_less("x", "x"));
  LabeledDataset ds{{gold("1", "task10", 0, 0, 0), gold("2", "task2", 0, 0, 0), gold("3", "task1", 0, 0, 0)}};
  CHECK(ds.tasks() == std::vector<std::string>{"task1", "task2", "task10"});
}

TEST_CASE("dataset parsing") {
  const auto ds = load_dataset(fixture("dataset.jsonl"));
  REQUIRE(ds.responses.size() == 3);
  CHECK(ds.responses[0].gold.at(Dimension::DCI) == 2);

  CHECK_THROWS_AS(parse_dataset("{\"response_id\":\"r\",\"task_id\":\"t\",\"text\":\"x\"}"), ParseError);
  CHECK_THROWS_AS(parse_dataset("not json"), ParseError);
  const std::string row = "{\"response_id\":\"r\",\"task_id\":\"t\",\"text\":\"x\",\"gold\":{\"DCI\":0,\"SEP\":0,\"CCC\":0}}";
  const std::string row2 = "{\"response_id\":\"r2\",\"task_id\":\"t\",\"text\":\"x\",\"gold\":{\"DCI\":0,\"SEP\":0,\"CCC\":0}}";
  CHECK(parse_dataset(row + "\n\n" + row2 + "\n").responses.size() == 2);
  try {
    parse_dataset(row + "\n" + row, "d.jsonl");
    FAIL("expected duplicate error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("d.jsonl:2") != std::string::npos);
  }
}

TEST_CASE("dataset checks against rubrics") {
  const auto rubrics = load_rubric_dir(fixture("rubrics"));
  CHECK_NOTHROW(check_dataset(load_dataset(fixture("dataset.jsonl")), rubrics));
  LabeledDataset missing{{gold("x", "photosynthesis", 0, 0, 0)}};
  CHECK_THROWS_WITH_AS(check_dataset(missing, rubrics), "no rubric for task photosynthesis", ValidationError);
  LabeledDataset bad{{gold("x", "enzyme", 0, 0, 2)}};
  CHECK_THROWS_AS(check_dataset(bad, rubrics), ValidationError);
}

TEST_CASE("exact-match accuracy per cell") {
  LabeledDataset ds{{gold("a", "t", 1, 0, 0), gold("b", "t", 2, 0, 0), gold("c", "t", 0, 0, 0), gold("d", "t", 1, 0, 0)}};
  std::vector<GradeDecision> ds_decisions;
  // DCI: three of four right. SEP: all ungradable. CCC: all right.
  const std::vector<std::optional<int>> dci{1, 2, 0, 2};
  const std::vector<std::string> ids{"a", "b", "c", "d"};
  for (std::size_t i = 0; i < ids.size(); ++i) {
    ds_decisions.push_back(graded(ids[i], Dimension::DCI, dci[i]));
    ds_decisions.push_back(graded(ids[i], Dimension::SEP, std::nullopt));
    ds_decisions.push_back(graded(ids[i], Dimension::CCC, 0));
  }
  const auto r = compute_accuracy(ds_decisions, ds);
  CHECK(r.cells.at({"t", Dimension::DCI}).accuracy() == 0.75);
  CHECK(r.cells.at({"t", Dimension::SEP}) == Cell{0, 4});
  CHECK(r.cells.at({"t", Dimension::SEP}).accuracy() == 0.0);
  CHECK(r.cells.at({"t", Dimension::CCC}).accuracy() == 1.0);

  auto dup = ds_decisions;
  dup.push_back(ds_decisions.front());
  CHECK_THROWS_AS(compute_accuracy(dup, ds), ValidationError);
  auto unknown = ds_decisions;
  unknown.push_back(graded("zz", Dimension::DCI, 0));
  CHECK_THROWS_AS(compute_accuracy(unknown, ds), ValidationError);
  auto short_one = ds_decisions;
  short_one.pop_back();
  CHECK_THROWS_AS(compute_accuracy(short_one, ds), ValidationError);
}

TEST_CASE("average is the unweighted mean over tasks") {
  // Task "big" has 10 responses at 1.0, task "small" 2 responses at 0.5.
  LabeledDataset ds;
  std::vector<GradeDecision> decisions;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "big" + std::to_string(i);
    ds.responses.push_back(gold(id, "big", 1, 1, 1));
    for (Dimension d : kDimensions) decisions.push_back(graded(id, d, 1));
  }
  for (int i = 0; i < 2; ++i) {
    const std::string id = "small" + std::to_string(i);
    ds.responses.push_back(gold(id, "small", 1, 1, 1));
    for (Dimension d : kDimensions) decisions.push_back(graded(id, d, i));
  }
  const auto r = compute_accuracy(decisions, ds);
  for (Dimension d : kDimensions) CHECK(r.averages.at(d) == 0.75);
}

TEST_CASE("table rendering") {
  const auto r = literal_report({{"task 2", Cell{919, 1000}}, {"task 10", Cell{696, 1000}}, {"t3", Cell{591, 1000}},
                                 {"t4", Cell{1, 2}}, {"t5", Cell{806, 1000}}, {"t6", Cell{848, 1000}}});
  const auto text = render_report(r, ReportFormat::table_text);
  CHECK(text ==
        "# strategy=hipporag background_only=false config_hash=abc seed=7 failures=0\n"
        "Task     DCI    SEP    CCC\n"
        "task 2   0.919  0.919  0.919\n"
        "task 10  0.696  0.696  0.696\n"
        "t3       0.591  0.591  0.591\n"
        "t4       0.500  0.500  0.500\n"
        "t5       0.806  0.806  0.806\n"
        "t6       0.848  0.848  0.848\n"
        "Average  0.727  0.727  0.727\n");

  AccuracyReport empty;
  empty.metadata.strategy = "flat";
  CHECK(render_report(empty, ReportFormat::table_text) ==
        "# strategy=flat background_only=false config_hash= seed=0 failures=0\n"
        "Task     DCI    SEP    CCC\n");
}

TEST_CASE("csv rendering") {
  const auto r = literal_report({{"t1", Cell{3, 4}}});
  CHECK(render_report(r, ReportFormat::csv) ==
        "#strategy=hipporag\n#background_only=false\n#config_hash=abc\n#seed=7\n#failures=0\n"
        "task,dimension,correct,total,accuracy\n"
        "t1,DCI,3,4,0.75\nt1,SEP,3,4,0.75\nt1,CCC,3,4,0.75\n"
        "Average,DCI,,,0.75\nAverage,SEP,,,0.75\nAverage,CCC,,,0.75\n");
}

TEST_CASE("json rendering round-trips") {
  const auto r = literal_report({{"t1", Cell{1, 3}}, {"t2", Cell{2, 7}}});
  const auto doc = json::parse(render_report(r, ReportFormat::json));
  CHECK(report_from_json(doc) == r);
  CHECK(doc.at("metadata").at("strategy") == "hipporag");
  CHECK_THROWS_AS(report_from_json(json::object()), ValidationError);
  CHECK(parse_report_format("csv") == ReportFormat::csv);
  CHECK(!parse_report_format("xml"));
}

TEST_CASE("property: accuracy equals a direct count") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    LabeledDataset ds;
    std::vector<GradeDecision> decisions;
    std::map<std::pair<std::string, Dimension>, std::pair<int, int>> want;
    const int n = 1 + static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) {
      const std::string id = "r" + std::to_string(i);
      const std::string task = "task" + std::to_string(rng() % 4);
      auto r = gold(id, task, rng() % 3, rng() % 3, rng() % 2);
      for (Dimension d : kDimensions) {
        const bool ungradable = rng() % 5 == 0;
        const int guess = static_cast<int>(rng() % 3);
        decisions.push_back(graded(id, d, ungradable ? std::nullopt : std::optional<int>(guess)));
        auto& [c, t] = want[{task, d}];
        ++t;
        if (!ungradable && guess == r.gold.at(d)) ++c;
      }
      ds.responses.push_back(r);
    }
    std::shuffle(decisions.begin(), decisions.end(), rng);
    const auto report = compute_accuracy(decisions, ds);
    for (const auto& [key, ct] : want) {
      const auto& cell = report.cells.at(key);
      CHECK(cell.correct == static_cast<std::size_t>(ct.first));
      CHECK(cell.total == static_cast<std::size_t>(ct.second));
      CHECK(cell.accuracy() >= 0.0);
      CHECK(cell.accuracy() <= 1.0);
    }
    for (Dimension d : kDimensions) {
      double sum = 0;
      for (const auto& t : report.tasks) sum += report.cells.at({t, d}).accuracy();
      CHECK(report.averages.at(d) == doctest::Approx(sum / report.tasks.size()).epsilon(1e-15));
    }
    CHECK(compute_accuracy(decisions, ds) == report);
  }
}
