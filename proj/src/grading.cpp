#include "graphgrade/grading.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "graphgrade/error.hpp"
#include "graphgrade/retrieval.hpp"
#include "graphgrade/text.hpp"

namespace graphgrade {

using nlohmann::json;

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::DCI:
      return "DCI";
    case Dimension::SEP:
      return "SEP";
    case Dimension::CCC:
      return "CCC";
  }
  return "?";
}

std::optional<Dimension> parse_dimension(std::string_view name) {
  for (Dimension d : kDimensions) {
    if (to_string(d) == name) return d;
  }
  return std::nullopt;
}

namespace {

std::string_view dimension_title(Dimension d) {
  switch (d) {
    case Dimension::DCI:
      return "disciplinary core ideas";
    case Dimension::SEP:
      return "science and engineering practices";
    case Dimension::CCC:
      return "crosscutting concepts";
  }
  return "";
}

std::string_view heading(ItemKind kind) {
  switch (kind) {
    case ItemKind::chunk:
      return "EVIDENCE CHUNK";
    case ItemKind::community_report:
      return "COMMUNITY REPORT";
    case ItemKind::evidence_subgraph:
      return "EVIDENCE SUBGRAPH";
  }
  return "EVIDENCE";
}

std::string non_blank(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_string()) {
    throw ValidationError(where + ": \"" + key + "\" must be a string");
  }
  auto s = obj.at(key).get<std::string>();
  if (trim(s).empty()) throw ValidationError(where + ": \"" + key + "\" is blank");
  return s;
}

Rubric parse_dimension_rubric(const json& doc, const std::string& task_id, const std::string& question, Dimension d,
                              const std::string& where) {
  Rubric r;
  r.task_id = task_id;
  r.question = question;
  r.dimension = d;
  if (!doc.is_object() || !doc.contains("levels") || !doc.at("levels").is_array()) {
    throw ValidationError(where + ": \"levels\" must be an array");
  }
  for (const auto& level : doc.at("levels")) {
    RubricLevel l;
    const std::string lw = where + " level " + std::to_string(r.levels.size());
    if (!level.is_object() || !level.contains("code") || !level.at("code").is_number_integer()) {
      throw ValidationError(lw + ": \"code\" must be an integer");
    }
    l.code = level.at("code").get<int>();
    if (l.code != static_cast<int>(r.levels.size())) {
      throw ValidationError(where + ": level codes must run 0, 1, 2, ... in order");
    }
    l.criteria = non_blank(level, "criteria", lw);
    if (level.contains("exemplars")) {
      if (!level.at("exemplars").is_array()) throw ValidationError(lw + ": \"exemplars\" must be an array");
      for (const auto& ex : level.at("exemplars")) {
        l.exemplars.push_back(Exemplar{non_blank(ex, "response", lw + " exemplar"),
                                       non_blank(ex, "rationale", lw + " exemplar")});
      }
    }
    r.levels.push_back(std::move(l));
  }
  if (r.levels.size() < 2) throw ValidationError(where + ": a rubric needs at least two levels");
  if (doc.contains("key_concepts")) {
    if (!doc.at("key_concepts").is_array()) throw ValidationError(where + ": \"key_concepts\" must be an array");
    for (const auto& k : doc.at("key_concepts")) {
      if (!k.is_string()) throw ValidationError(where + ": key concepts must be strings");
      r.key_concepts.push_back(k.get<std::string>());
    }
  }
  return r;
}

}  // namespace

const Rubric& TaskRubrics::at(Dimension d) const {
  const auto it = dimensions.find(d);
  if (it == dimensions.end()) {
    throw ValidationError("task " + task_id + " has no " + std::string(to_string(d)) + " rubric");
  }
  return it->second;
}

TaskRubrics parse_task_rubrics(const json& doc, std::string_view source) {
  const std::string where(source);
  TaskRubrics t;
  t.task_id = non_blank(doc, "task_id", where);
  if (doc.contains("question")) {
    if (!doc.at("question").is_string()) throw ValidationError(where + ": \"question\" must be a string");
    t.question = doc.at("question").get<std::string>();
  }
  if (!doc.contains("dimensions") || !doc.at("dimensions").is_object()) {
    throw ValidationError(where + ": \"dimensions\" must be an object");
  }
  for (const auto& [name, body] : doc.at("dimensions").items()) {
    const auto d = parse_dimension(name);
    if (!d) throw ValidationError(where + ": unknown dimension \"" + name + "\" (expected DCI, SEP or CCC)");
    t.dimensions.emplace(*d, parse_dimension_rubric(body, t.task_id, t.question, *d, where + " " + name));
  }
  for (Dimension d : kDimensions) t.at(d);
  return t;
}

TaskRubrics load_task_rubrics(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read rubric file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_task_rubrics(doc, path.string());
}

std::map<std::string, TaskRubrics> load_rubric_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("rubric directory " + dir.string() + " not found");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, TaskRubrics> out;
  for (const auto& f : files) {
    auto t = load_task_rubrics(f);
    const std::string id = t.task_id;
    if (!out.emplace(id, std::move(t)).second) throw ValidationError("task " + id + " has two rubric files");
  }
  return out;
}

Prompt assemble_prompt(const StudentResponse& response, const Rubric& rubric, const RetrievalContext& context) {
  if (rubric.task_id != response.task_id) {
    throw ValidationError("rubric for task " + rubric.task_id + " cannot grade a response to task " +
                          response.task_id);
  }
  Prompt p;
  std::string& s = p.system;
  s = "You grade student responses to a science assessment task against a rubric.\n";
  s += "Task: " + rubric.task_id + "\n";
  s += "Dimension: " + std::string(to_string(rubric.dimension)) + " (" + std::string(dimension_title(rubric.dimension)) +
       ")\n";
  if (!rubric.key_concepts.empty()) {
    s += "Key concepts:\n";
    for (const auto& k : rubric.key_concepts) s += "- " + k + "\n";
  }
  s += "\nScoring levels:\n";
  for (const auto& level : rubric.levels) {
    s += "\nLEVEL " + std::to_string(level.code) + "\nCriteria: " + level.criteria + "\n";
    for (const auto& ex : level.exemplars) {
      s += "Example response at level " + std::to_string(level.code) + ": " + ex.response + "\n";
      s += "Rationale: " + ex.rationale + "\n";
    }
  }
  s += "\nCompare the response with every level above, including the examples of each level. "
       "Use the supplied evidence to check whether the connections the student draws are supported, and cite the "
       "ids of the evidence items you relied on.\n";
  s += "Reply with a single JSON object and nothing else: "
       "{\"score\": <level code>, \"justification\": \"<short reason>\", \"evidence\": [\"<evidence id>\", ...]}\n";

  std::string& u = p.user;
  if (!rubric.question.empty()) u += "QUESTION:\n" + rubric.question + "\n\n";
  u += "RESPONSE ID: " + response.response_id + "\n";
  u += "STUDENT RESPONSE:\n" + response.text + "\n";
  if (!context.items.empty()) {
    u += "\nRETRIEVED CONTEXT (most relevant first):\n";
    for (const auto& item : context.items) {
      char score[32];
      std::snprintf(score, sizeof score, "%.4f", item.score);
      u += "\n### " + std::string(heading(item.kind)) + " [id=" + item.id + "] score " + score + "\n";
      u += item.text + "\n";
    }
  }
  return p;
}

std::string correction_prompt(std::string_view previous_reply, std::string_view problem) {
  std::string out = "\n\nYOUR PREVIOUS REPLY:\n";
  out += previous_reply;
  out += "\n\nCORRECTION: that reply could not be used (";
  out += problem;
  out += "). Reply again with only the JSON object, using a valid level code and only evidence ids listed above.\n";
  return out;
}

GradeDecision parse_decision(std::string_view raw, const Rubric& rubric, const RetrievalContext& context,
                             std::string_view response_id) {
  const auto object = find_first_json_object(raw);
  if (!object) throw ParseError("reply contains no JSON object");
  const json doc = json::parse(*object);

  GradeDecision d;
  d.response_id = std::string(response_id);
  d.dimension = rubric.dimension;
  d.strategy = context.strategy;
  d.background_only = context.background_only;
  d.unlinked = context.unlinked;

  if (!doc.contains("score")) throw ParseError("reply has no \"score\"");
  const auto& score = doc.at("score");
  if (!score.is_number_integer()) throw ParseError("\"score\" must be an integer");
  const auto code = score.get<long long>();
  if (code < 0 || code >= static_cast<long long>(rubric.levels.size())) {
    throw ValidationError("score " + std::to_string(code) + " is not a level code (0-" +
                          std::to_string(rubric.levels.size() - 1) + ")");
  }
  d.score = static_cast<int>(code);

  if (doc.contains("justification")) {
    if (!doc.at("justification").is_string()) throw ParseError("\"justification\" must be a string");
    d.justification = doc.at("justification").get<std::string>();
  }
  if (doc.contains("evidence")) {
    const auto& ev = doc.at("evidence");
    if (!ev.is_array()) throw ParseError("\"evidence\" must be an array");
    for (const auto& id : ev) {
      if (!id.is_string()) throw ParseError("evidence ids must be strings");
      const auto s = id.get<std::string>();
      if (!context.has_item(s)) throw ValidationError("evidence id \"" + s + "\" is not in the supplied context");
      d.evidence_ids.push_back(s);
    }
  }
  return d;
}

std::vector<GradeDecision> grade_response(const StudentResponse& response, const TaskRubrics& rubrics,
                                          const Retriever& retriever, LlmClient& client,
                                          const DecodingParams& params) {
  if (rubrics.task_id != response.task_id) {
    throw ValidationError("response " + response.response_id + " belongs to task " + response.task_id +
                          ", not " + rubrics.task_id);
  }
  for (Dimension dim : kDimensions) rubrics.at(dim);
  const RetrievalContext context = retriever(retrieval_query(rubrics.question, response.text));

  std::vector<GradeDecision> out;
  for (Dimension dim : kDimensions) {
    const Rubric& rubric = rubrics.at(dim);
    const Prompt prompt = assemble_prompt(response, rubric, context);
    std::string user = prompt.user;
    for (int attempt = 0;; ++attempt) {
      const std::string raw = client.complete(prompt.system, user, params);
      try {
        auto d = parse_decision(raw, rubric, context, response.response_id);
        d.attempts = attempt + 1;
        out.push_back(std::move(d));
        break;
      } catch (const Error& e) {
        if (attempt >= kMaxCorrectionRetries) {
          GradeDecision d;
          d.response_id = response.response_id;
          d.dimension = dim;
          d.ungradable = true;
          d.strategy = context.strategy;
          d.background_only = context.background_only;
          d.unlinked = context.unlinked;
          d.failure = e.what();
          d.attempts = attempt + 1;
          out.push_back(std::move(d));
          break;
        }
        user = prompt.user + correction_prompt(raw, e.what());
      }
    }
  }
  return out;
}

json decision_to_json(const GradeDecision& d) {
  json j = {{"response_id", d.response_id},
            {"dimension", std::string(to_string(d.dimension))},
            {"score", d.score ? json(*d.score) : json(nullptr)},
            {"ungradable", d.ungradable},
            {"justification", d.justification},
            {"evidence", d.evidence_ids},
            {"strategy", std::string(to_string(d.strategy))},
            {"background_only", d.background_only},
            {"unlinked", d.unlinked},
            {"attempts", d.attempts}};
  if (!d.failure.empty()) j["failure"] = d.failure;
  return j;
}

}  // namespace graphgrade
