#pragma once

#include <functional>
#include <string>
#include <vector>

#include "graphgrade/corpus.hpp"
#include "graphgrade/kgraph.hpp"
#include "graphgrade/llm.hpp"

namespace graphgrade {

struct Triple {
  std::string subject;
  std::string predicate;
  std::string object;
  std::string chunk_id;

  friend bool operator==(const Triple&, const Triple&) = default;
};

class Extractor {
 public:
  virtual ~Extractor() = default;
  /// Triples grounded in `chunk`, each carrying chunk.chunk_id.
  virtual std::vector<Triple> extract(const Chunk& chunk) = 0;
};

/// Deterministic rule-based extractor for offline pipelines.
///
/// Fires on "X causes Y", "X leads to Y" and "X is a Y" inside a clause, and
/// pairs capitalized noun phrases that share a sentence ("co-occurs with").
/// Results come in textual order, sentence by sentence.
class PatternExtractor final : public Extractor {
 public:
  std::vector<Triple> extract(const Chunk& chunk) override;
};

/// Asks an LLM for {"triples": [...]} using the shipped extraction prompt.
class LlmExtractor final : public Extractor {
 public:
  explicit LlmExtractor(LlmClient& client, DecodingParams params = {}) : client_(client), params_(params) {}
  std::vector<Triple> extract(const Chunk& chunk) override;

  static std::string system_prompt();
  static std::string user_prompt(const Chunk& chunk);
  /// Parses a reply; throws ParseError when the shape is wrong. Triples whose
  /// subject and object canonicalize to the same entity are dropped.
  static std::vector<Triple> parse_reply(const std::string& reply, const std::string& chunk_id);

 private:
  LlmClient& client_;
  DecodingParams params_;
};

/// Extract triples from a chunk; rejects empty chunk text.
std::vector<Triple> extract_triples(Extractor& extractor, const Chunk& chunk);

struct BuildOptions {
  /// Kind given to entities first seen in a chunk. Defaults to concept.
  std::function<NodeKind(const Chunk&)> node_kind;
  /// Concurrent extractor calls; assembly is always sequential in chunk order.
  std::size_t max_in_flight = 1;
};

/// Assembles the knowledge graph: every chunk is registered, each triple adds
/// +1 to its predicate edge, every pair of distinct entities mentioned in the
/// same chunk gains +1 co-occurrence weight, and each mention increments the
/// entity's link to the chunk.
KnowledgeGraph build_graph(const std::vector<Chunk>& chunks, Extractor& extractor, const BuildOptions& options = {});

/// Subgraph supported only by documents of kind background: nodes with at
/// least one background chunk link, the edges among them, and only their
/// background links and chunks.
KnowledgeGraph background_partition(const KnowledgeGraph& graph, const std::vector<Document>& corpus);

}  // namespace graphgrade
