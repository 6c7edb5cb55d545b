#include "graphgrade/retrieval.hpp"

#include <cmath>

#include "graphgrade/error.hpp"
#include "graphgrade/text.hpp"

namespace graphgrade {

StoreSlice make_slice(std::shared_ptr<const GraphLayer> layer, Embedder& embedder, double link_threshold) {
  StoreSlice slice;
  auto index = std::make_shared<VectorIndex>(embedder.dim());
  for (const auto& chunk : layer->graph.chunks()) {
    slice.chunk_text.emplace(chunk.chunk_id, chunk.text);
    auto e = embedder.embed(chunk.text);
    double norm = 0.0;
    for (double x : e.values) norm += x * x;
    // Chunks without lexical tokens cannot be scored by cosine.
    if (norm > 0.0) index->add(chunk.chunk_id, std::move(e));
  }
  slice.index = std::move(index);
  slice.linker = std::make_shared<NodeLinker>(layer->graph, embedder, link_threshold);
  slice.layer = std::move(layer);
  return slice;
}

Stores make_stores(const GraphArtifact& artifact, Embedder& embedder, double link_threshold) {
  Stores stores;
  stores.embedder = &embedder;
  stores.full = make_slice(std::make_shared<const GraphLayer>(artifact.full), embedder, link_threshold);
  if (artifact.background) {
    stores.background = make_slice(std::make_shared<const GraphLayer>(*artifact.background), embedder, link_threshold);
  }
  return stores;
}

RetrievalContext flat_retrieve(std::string_view query, const StoreSlice& slice, Embedder& embedder, std::size_t k) {
  RetrievalContext ctx;
  ctx.strategy = Strategy::flat;
  if (!slice.index) throw ValidationError("flat retrieval needs a chunk index");
  if (slice.index->empty() || k == 0) return ctx;
  const auto q = embedder.embed(query);
  double norm = 0.0;
  for (double x : q.values) norm += x * x;
  if (norm == 0.0) return ctx;
  for (const auto& hit : slice.index->top_k(q, k)) {
    ctx.items.push_back(ContextItem{ItemKind::chunk, hit.id, slice.chunk_text.at(hit.id), hit.score, {hit.id}});
  }
  return ctx;
}

std::string retrieval_query(std::string_view question, std::string_view response_text) {
  const std::string q = trim(question);
  const std::string r = trim(response_text);
  if (q.empty()) return r;
  if (r.empty()) return q;
  return q + "\n" + r;
}

RetrievalContext retrieve(Strategy strategy, std::string_view query, const Stores& stores,
                          const RetrievalConfig& config) {
  const StoreSlice& slice = config.background_only ? stores.background : stores.full;
  const char* which = config.background_only ? "background " : "";
  RetrievalContext ctx;
  switch (strategy) {
    case Strategy::non_rag:
      break;
    case Strategy::flat:
      if (!stores.embedder) throw ValidationError("flat retrieval needs an embedder");
      ctx = flat_retrieve(query, slice, *stores.embedder, config.k);
      break;
    case Strategy::graphrag_local:
      if (!slice.layer || !slice.linker) {
        throw ValidationError(std::string("graphrag_local needs the ") + which + "graph with communities");
      }
      ctx = local_search(query, *slice.layer, *slice.linker, config.budget, config.community_level);
      break;
    case Strategy::hipporag:
      if (!slice.layer || !slice.linker) throw ValidationError(std::string("hipporag needs the ") + which + "graph");
      ctx = hippo_retrieve(query, slice.layer->graph, *slice.linker, HippoOptions{config.ppr, config.k});
      break;
  }
  if (ctx.unlinked) {
    if (!stores.embedder) throw ValidationError("flat fallback needs an embedder");
    ctx.items = flat_retrieve(query, slice, *stores.embedder, config.k).items;
  }
  ctx.strategy = strategy;
  ctx.background_only = config.background_only;
  if (ctx.items.size() > config.budget) ctx.items.resize(config.budget);
  return ctx;
}

}  // namespace graphgrade
