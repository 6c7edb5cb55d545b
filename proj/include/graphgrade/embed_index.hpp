#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace graphgrade {

struct Embedding {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
};

/// dot(a,b) / (|a||b|), clamped to [-1, 1]. Throws ValidationError on a
/// dimension mismatch or a zero-norm input.
double cosine_similarity(const Embedding& a, const Embedding& b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed(std::string_view text) = 0;
  virtual std::size_t dim() const = 0;
};

/// Feature hashing over lexical tokens: each token increments bucket
/// fnv1a64(token) % dim, then the vector is L2-normalized. Text without tokens
/// maps to the zero vector.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim = 256);
  Embedding embed(std::string_view text) override;
  std::size_t dim() const override { return dim_; }

 private:
  std::size_t dim_;
};

struct RemoteEmbedderOptions {
  std::string endpoint;  // OpenAI-compatible /v1/embeddings URL
  std::string model;
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
};

class RemoteEmbedder final : public Embedder {
 public:
  /// `dim` of 0 means "learn it from the first response".
  explicit RemoteEmbedder(RemoteEmbedderOptions options, std::size_t dim = 0);
  Embedding embed(std::string_view text) override;
  std::size_t dim() const override { return dim_; }

 private:
  RemoteEmbedderOptions options_;
  std::atomic<std::size_t> dim_;
};

struct ScoredId {
  std::string id;
  double score;

  friend bool operator==(const ScoredId&, const ScoredId&) = default;
};

/// Exact cosine top-k over a fixed set of (chunk_id, embedding) entries.
class VectorIndex {
 public:
  VectorIndex() = default;
  explicit VectorIndex(std::size_t dim) : dim_(dim) {}

  /// Throws on duplicate id, dimension mismatch, non-finite values or zero norm.
  void add(std::string id, Embedding embedding);

  /// min(k, size) entries, descending score, ties by ascending id.
  std::vector<ScoredId> top_k(const Embedding& query, std::size_t k) const;

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::pair<std::string, Embedding>>& entries() const noexcept { return entries_; }

 private:
  std::size_t dim_ = 0;
  std::vector<std::pair<std::string, Embedding>> entries_;
  std::vector<double> norms_;
  std::unordered_set<std::string> ids_;
};

/// Orders by descending score, then ascending id.
void sort_ranked(std::vector<ScoredId>& items);

}  // namespace graphgrade
