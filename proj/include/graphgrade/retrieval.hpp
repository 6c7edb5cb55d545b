#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "graphgrade/artifact.hpp"
#include "graphgrade/community.hpp"
#include "graphgrade/context.hpp"
#include "graphgrade/embed_index.hpp"
#include "graphgrade/linking.hpp"
#include "graphgrade/ppr.hpp"

namespace graphgrade {

/// Search structures for one slice of the corpus (everything, or background only).
struct StoreSlice {
  std::map<std::string, std::string> chunk_text;
  std::shared_ptr<const VectorIndex> index;
  std::shared_ptr<const GraphLayer> layer;
  std::shared_ptr<const NodeLinker> linker;
};

struct Stores {
  Embedder* embedder = nullptr;
  StoreSlice full;
  StoreSlice background;
};

/// Index, chunk texts and linker over a layer's registered chunks.
StoreSlice make_slice(std::shared_ptr<const GraphLayer> layer, Embedder& embedder,
                      double link_threshold = kDefaultLinkThreshold);
Stores make_stores(const GraphArtifact& artifact, Embedder& embedder, double link_threshold = kDefaultLinkThreshold);

struct RetrievalConfig {
  std::size_t k = 5;       // chunks requested from flat and hipporag
  std::size_t budget = 8;  // cap on returned items
  bool background_only = false;
  PprOptions ppr;
  std::size_t community_level = 0;
};

/// Top-k chunks by cosine. A query without tokens, or an empty index, yields no items.
RetrievalContext flat_retrieve(std::string_view query, const StoreSlice& slice, Embedder& embedder, std::size_t k);

/// Query sent to retrieval for a graded response.
std::string retrieval_query(std::string_view question, std::string_view response_text);

/// Dispatches to the strategy over the full or background slice. Graph
/// strategies that cannot link the query fall back to flat retrieval and keep
/// `unlinked` set. Throws ValidationError when the strategy's store is absent.
RetrievalContext retrieve(Strategy strategy, std::string_view query, const Stores& stores,
                          const RetrievalConfig& config);

}  // namespace graphgrade
