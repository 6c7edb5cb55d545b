#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphgrade/context.hpp"
#include "graphgrade/llm.hpp"

namespace graphgrade {

enum class Dimension { DCI, SEP, CCC };

inline constexpr std::array<Dimension, 3> kDimensions = {Dimension::DCI, Dimension::SEP, Dimension::CCC};

std::string_view to_string(Dimension d);
std::optional<Dimension> parse_dimension(std::string_view name);

struct Exemplar {
  std::string response;
  std::string rationale;
};

struct RubricLevel {
  int code = 0;
  std::string criteria;
  std::vector<Exemplar> exemplars;
};

struct Rubric {
  std::string task_id;
  std::string question;
  Dimension dimension = Dimension::DCI;
  std::vector<RubricLevel> levels;  // codes 0..n-1 in order
  std::vector<std::string> key_concepts;

  bool has_level(int code) const { return code >= 0 && static_cast<std::size_t>(code) < levels.size(); }
};

/// The three dimension rubrics of one task.
struct TaskRubrics {
  std::string task_id;
  std::string question;
  std::map<Dimension, Rubric> dimensions;

  const Rubric& at(Dimension d) const;
};

/// {"task_id", "question"?, "dimensions": {"DCI": {"levels": [...], "key_concepts": [...]}, ...}}
TaskRubrics parse_task_rubrics(const nlohmann::json& doc, std::string_view source = "<rubric>");
TaskRubrics load_task_rubrics(const std::filesystem::path& path);
/// Every *.json file in `dir`, keyed by task id.
std::map<std::string, TaskRubrics> load_rubric_dir(const std::filesystem::path& dir);

struct StudentResponse {
  std::string response_id;
  std::string task_id;
  std::string text;
  std::map<Dimension, int> gold;
};

struct Prompt {
  std::string system;
  std::string user;
};

/// Grading instructions with every level's criteria and exemplars, then the
/// question, the response and the context under labelled headings.
Prompt assemble_prompt(const StudentResponse& response, const Rubric& rubric, const RetrievalContext& context);

/// Appended to the user prompt after an unusable reply.
std::string correction_prompt(std::string_view previous_reply, std::string_view problem);

struct GradeDecision {
  std::string response_id;
  Dimension dimension = Dimension::DCI;
  std::optional<int> score;  // empty when ungradable
  bool ungradable = false;
  std::string justification;
  std::vector<std::string> evidence_ids;
  Strategy strategy = Strategy::non_rag;
  bool background_only = false;
  bool unlinked = false;
  std::string failure;  // why the decision is ungradable
  int attempts = 0;
};

/// Strict parse of the first JSON object in `raw`. Throws ParseError for a
/// missing or malformed object and ValidationError for an unknown score or
/// evidence id.
GradeDecision parse_decision(std::string_view raw, const Rubric& rubric, const RetrievalContext& context,
                             std::string_view response_id);

inline constexpr int kMaxCorrectionRetries = 2;

using Retriever = std::function<RetrievalContext(std::string_view query)>;

/// Retrieves once for the response, then grades DCI, SEP and CCC in turn.
/// Unusable replies are re-prompted up to twice before the decision is marked
/// ungradable. Client errors propagate.
std::vector<GradeDecision> grade_response(const StudentResponse& response, const TaskRubrics& rubrics,
                                          const Retriever& retriever, LlmClient& client,
                                          const DecodingParams& params = {});

nlohmann::json decision_to_json(const GradeDecision& d);

}  // namespace graphgrade
