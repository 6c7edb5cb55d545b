#include "graphgrade/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "graphgrade/error.hpp"
#include "graphgrade/text.hpp"

namespace graphgrade {

using nlohmann::json;

bool natural_less(std::string_view a, std::string_view b) {
  auto digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (digit(a[i]) && digit(b[j])) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && digit(a[ie])) ++ie;
      while (je < b.size() && digit(b[je])) ++je;
      std::string_view x = a.substr(i, ie - i), y = b.substr(j, je - j);
      while (x.size() > 1 && x.front() == '0') x.remove_prefix(1);
      while (y.size() > 1 && y.front() == '0') y.remove_prefix(1);
      if (x.size() != y.size()) return x.size() < y.size();
      if (x != y) return x < y;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
  return a < b;
}

std::vector<std::string> LabeledDataset::tasks() const {
  std::set<std::string> ids;
  for (const auto& r : responses) ids.insert(r.task_id);
  std::vector<std::string> out(ids.begin(), ids.end());
  std::sort(out.begin(), out.end(), [](const auto& l, const auto& r) { return natural_less(l, r); });
  return out;
}

LabeledDataset parse_dataset(std::string_view text, std::string_view source) {
  LabeledDataset ds;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(where + ": invalid JSON: " + e.what(), line_no);
    }
    auto str = [&](const char* key) {
      if (!row.is_object() || !row.contains(key) || !row.at(key).is_string()) {
        throw ParseError(where + ": \"" + key + "\" must be a string", line_no);
      }
      return row.at(key).get<std::string>();
    };
    StudentResponse r;
    r.response_id = str("response_id");
    r.task_id = str("task_id");
    r.text = str("text");
    if (trim(r.text).empty()) throw ParseError(where + ": response text is empty", line_no);
    if (!row.contains("gold") || !row.at("gold").is_object()) {
      throw ParseError(where + ": \"gold\" must be an object", line_no);
    }
    for (Dimension d : kDimensions) {
      const auto key = std::string(to_string(d));
      const auto& gold = row.at("gold");
      if (!gold.contains(key) || !gold.at(key).is_number_integer()) {
        throw ParseError(where + ": gold " + key + " score missing or not an integer", line_no);
      }
      r.gold[d] = gold.at(key).get<int>();
    }
    if (!seen.insert(r.response_id).second) {
      throw ParseError(where + ": duplicate response_id \"" + r.response_id + "\"", line_no);
    }
    ds.responses.push_back(std::move(r));
    if (end == text.size()) break;
  }
  return ds;
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read dataset " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), path.string());
}

void check_dataset(const LabeledDataset& dataset, const std::map<std::string, TaskRubrics>& rubrics) {
  for (const auto& task : dataset.tasks()) {
    if (!rubrics.count(task)) throw ValidationError("no rubric for task " + task);
  }
  for (const auto& r : dataset.responses) {
    const auto& t = rubrics.at(r.task_id);
    for (const auto& [d, code] : r.gold) {
      if (!t.at(d).has_level(code)) {
        throw ValidationError("response " + r.response_id + ": gold " + std::string(to_string(d)) + " score " +
                              std::to_string(code) + " is not a rubric level");
      }
    }
  }
}

void fill_averages(AccuracyReport& report) {
  report.averages.clear();
  for (Dimension d : kDimensions) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& task : report.tasks) {
      const auto it = report.cells.find({task, d});
      if (it == report.cells.end() || it->second.total == 0) continue;
      sum += it->second.accuracy();
      ++n;
    }
    if (n > 0) report.averages[d] = sum / static_cast<double>(n);
  }
}

AccuracyReport compute_accuracy(const std::vector<GradeDecision>& decisions, const LabeledDataset& dataset) {
  std::map<std::string, const StudentResponse*> by_id;
  for (const auto& r : dataset.responses) by_id[r.response_id] = &r;

  std::map<std::pair<std::string, Dimension>, const GradeDecision*> graded;
  for (const auto& d : decisions) {
    if (!by_id.count(d.response_id)) throw ValidationError("decision for unknown response " + d.response_id);
    if (!graded.emplace(std::make_pair(d.response_id, d.dimension), &d).second) {
      throw ValidationError("two decisions for " + d.response_id + " " + std::string(to_string(d.dimension)));
    }
  }

  AccuracyReport report;
  report.tasks = dataset.tasks();
  for (const auto& r : dataset.responses) {
    for (Dimension dim : kDimensions) {
      const auto it = graded.find({r.response_id, dim});
      if (it == graded.end()) {
        throw ValidationError("response " + r.response_id + " has no " + std::string(to_string(dim)) + " decision");
      }
      Cell& cell = report.cells[{r.task_id, dim}];
      ++cell.total;
      const GradeDecision& d = *it->second;
      if (!d.ungradable && d.score && *d.score == r.gold.at(dim)) ++cell.correct;
    }
  }
  fill_averages(report);
  return report;
}

std::optional<ReportFormat> parse_report_format(std::string_view name) {
  if (name == "table_text") return ReportFormat::table_text;
  if (name == "json") return ReportFormat::json;
  if (name == "csv") return ReportFormat::csv;
  return std::nullopt;
}

namespace {

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string metadata_line(const RunMetadata& m, const char* prefix) {
  return std::string(prefix) + "strategy=" + m.strategy + " background_only=" + (m.background_only ? "true" : "false") +
         " config_hash=" + m.config_hash + " seed=" + std::to_string(m.seed) +
         " failures=" + std::to_string(m.failures) + "\n";
}

std::string render_table(const AccuracyReport& report) {
  std::size_t width = std::string("Average").size();
  for (const auto& t : report.tasks) width = std::max(width, t.size());
  width += 2;
  std::string out = metadata_line(report.metadata, "# ");
  out += pad("Task", width);
  for (Dimension d : kDimensions) out += pad(std::string(to_string(d)), 7);
  out += "\n";
  for (const auto& t : report.tasks) {
    out += pad(t, width);
    for (Dimension d : kDimensions) {
      const auto it = report.cells.find({t, d});
      out += pad(it == report.cells.end() || it->second.total == 0 ? "-" : fixed3(it->second.accuracy()), 7);
    }
    out += "\n";
  }
  if (!report.tasks.empty()) {
    out += pad("Average", width);
    for (Dimension d : kDimensions) {
      const auto it = report.averages.find(d);
      out += pad(it == report.averages.end() ? "-" : fixed3(it->second), 7);
    }
    out += "\n";
  }
  // Trailing padding is noise in diffs.
  std::string trimmed;
  std::istringstream lines(out);
  for (std::string line; std::getline(lines, line);) {
    while (!line.empty() && line.back() == ' ') line.pop_back();
    trimmed += line + "\n";
  }
  return trimmed;
}

std::string render_csv(const AccuracyReport& report) {
  const auto& m = report.metadata;
  std::string out = "#strategy=" + m.strategy + "\n#background_only=" + (m.background_only ? "true" : "false") +
                    "\n#config_hash=" + m.config_hash + "\n#seed=" + std::to_string(m.seed) +
                    "\n#failures=" + std::to_string(m.failures) + "\n";
  out += "task,dimension,correct,total,accuracy\n";
  for (const auto& t : report.tasks) {
    for (Dimension d : kDimensions) {
      const auto it = report.cells.find({t, d});
      if (it == report.cells.end()) continue;
      out += t + "," + std::string(to_string(d)) + "," + std::to_string(it->second.correct) + "," +
             std::to_string(it->second.total) + "," + exact(it->second.accuracy()) + "\n";
    }
  }
  for (const auto& [d, v] : report.averages) out += "Average," + std::string(to_string(d)) + ",,," + exact(v) + "\n";
  return out;
}

}  // namespace

json report_to_json(const AccuracyReport& report) {
  const auto& m = report.metadata;
  json cells = json::array();
  for (const auto& t : report.tasks) {
    for (Dimension d : kDimensions) {
      const auto it = report.cells.find({t, d});
      if (it == report.cells.end()) continue;
      cells.push_back({{"task", t},
                       {"dimension", std::string(to_string(d))},
                       {"correct", it->second.correct},
                       {"total", it->second.total},
                       {"accuracy", it->second.accuracy()}});
    }
  }
  json averages = json::object();
  for (const auto& [d, v] : report.averages) averages[std::string(to_string(d))] = v;
  return {{"metadata",
           {{"strategy", m.strategy},
            {"background_only", m.background_only},
            {"config_hash", m.config_hash},
            {"seed", m.seed},
            {"failures", m.failures}}},
          {"tasks", report.tasks},
          {"cells", cells},
          {"averages", averages}};
}

AccuracyReport report_from_json(const json& doc) {
  AccuracyReport r;
  try {
    const auto& m = doc.at("metadata");
    r.metadata.strategy = m.at("strategy").get<std::string>();
    r.metadata.background_only = m.at("background_only").get<bool>();
    r.metadata.config_hash = m.at("config_hash").get<std::string>();
    r.metadata.seed = m.at("seed").get<std::uint64_t>();
    r.metadata.failures = m.at("failures").get<std::size_t>();
    r.tasks = doc.at("tasks").get<std::vector<std::string>>();
    for (const auto& c : doc.at("cells")) {
      const auto d = parse_dimension(c.at("dimension").get<std::string>());
      if (!d) throw ValidationError("report cell has an unknown dimension");
      r.cells[{c.at("task").get<std::string>(), *d}] =
          Cell{c.at("correct").get<std::size_t>(), c.at("total").get<std::size_t>()};
    }
    for (const auto& [name, v] : doc.at("averages").items()) {
      const auto d = parse_dimension(name);
      if (!d) throw ValidationError("report average has an unknown dimension");
      r.averages[*d] = v.get<double>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string render_report(const AccuracyReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::table_text:
      return render_table(report);
    case ReportFormat::json:
      return report_to_json(report).dump(2) + "\n";
    case ReportFormat::csv:
      return render_csv(report);
  }
  return {};
}

}  // namespace graphgrade
