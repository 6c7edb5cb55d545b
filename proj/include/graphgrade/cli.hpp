#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "graphgrade/config.hpp"
#include "graphgrade/evaluation.hpp"

namespace graphgrade {

/// Exit codes: 0 success, 1 runtime or recorded failure, 2 usage or config error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Client selected by the config; `finish` persists a recording when llm.mode is record.
class ConfiguredClient {
 public:
  explicit ConfiguredClient(const RunConfig& config);
  ~ConfiguredClient();
  LlmClient& client() { return *active_; }
  DecodingParams params() const { return params_; }
  void finish();

 private:
  std::unique_ptr<LlmClient> base_;
  std::unique_ptr<RecordingClient> recorder_;
  LlmClient* active_ = nullptr;
  std::filesystem::path store_;
  DecodingParams params_;
};

std::unique_ptr<Embedder> make_embedder(const RunConfig& config);

struct BuildStats {
  std::size_t documents = 0, chunks = 0, nodes = 0, edges = 0, communities = 0, levels = 0;
  std::size_t background_nodes = 0, background_chunks = 0;
};

void cmd_ingest(const RunConfig& config, std::ostream& out);
BuildStats cmd_build(const RunConfig& config, std::ostream& out);
void cmd_retrieve(const RunConfig& config, const std::string& query, ReportFormat format, std::ostream& out);
/// Returns the number of responses that failed.
std::size_t cmd_grade(const RunConfig& config, const std::optional<std::string>& response_id, std::ostream& out,
                      std::ostream& err);

struct EvaluationRun {
  AccuracyReport report;
  std::vector<GradeDecision> decisions;
  std::vector<std::string> failures;  // "<response_id>: <message>"
};

EvaluationRun run_evaluation(const RunConfig& config);
/// Renders the report to `out`; returns the number of failed responses.
std::size_t cmd_evaluate(const RunConfig& config, ReportFormat format, std::ostream& out, std::ostream& err);

}  // namespace graphgrade
