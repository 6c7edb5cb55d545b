#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphgrade/grading.hpp"

namespace graphgrade {

struct LabeledDataset {
  std::vector<StudentResponse> responses;

  /// Distinct task ids in natural order ("task 2" before "task 10").
  std::vector<std::string> tasks() const;
};

/// JSON Lines of {"response_id", "task_id", "text", "gold": {"DCI", "SEP", "CCC"}}.
LabeledDataset parse_dataset(std::string_view text, std::string_view source = "<dataset>");
LabeledDataset load_dataset(const std::filesystem::path& path);

/// Throws ValidationError naming the first task without a rubric, or a gold
/// score that is not a level of its rubric.
void check_dataset(const LabeledDataset& dataset, const std::map<std::string, TaskRubrics>& rubrics);

/// Natural ordering: digit runs compare by value.
bool natural_less(std::string_view a, std::string_view b);

struct Cell {
  std::size_t correct = 0;
  std::size_t total = 0;

  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct RunMetadata {
  std::string strategy;
  bool background_only = false;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t failures = 0;  // responses aborted by client errors
  friend bool operator==(const RunMetadata&, const RunMetadata&) = default;
};

struct AccuracyReport {
  std::vector<std::string> tasks;
  std::map<std::pair<std::string, Dimension>, Cell> cells;
  std::map<Dimension, double> averages;  // unweighted mean over tasks
  RunMetadata metadata;

  friend bool operator==(const AccuracyReport&, const AccuracyReport&) = default;
};

/// Exact-match accuracy per (task, dimension). Ungradable decisions count as
/// wrong. Throws ValidationError for a decision about an unknown response or a
/// response lacking a dimension.
AccuracyReport compute_accuracy(const std::vector<GradeDecision>& decisions, const LabeledDataset& dataset);

/// Recomputes `averages` from `cells`.
void fill_averages(AccuracyReport& report);

enum class ReportFormat { table_text, json, csv };

std::optional<ReportFormat> parse_report_format(std::string_view name);
std::string render_report(const AccuracyReport& report, ReportFormat format);

nlohmann::json report_to_json(const AccuracyReport& report);
AccuracyReport report_from_json(const nlohmann::json& doc);

}  // namespace graphgrade
