#include "graphgrade/embed_index.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "graphgrade/error.hpp"
#include "graphgrade/llm.hpp"
#include "graphgrade/text.hpp"

namespace graphgrade {

using nlohmann::json;

namespace {

double norm_of(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

void check_finite(const Embedding& e) {
  for (double x : e.values) {
    if (!std::isfinite(x)) throw ValidationError("embedding contains a non-finite value");
  }
}

}  // namespace

double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw ValidationError("dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  const double na = norm_of(a.values);
  const double nb = norm_of(b.values);
  if (na == 0.0 || nb == 0.0) throw ValidationError("cosine similarity of a zero-norm vector");
  return std::clamp(dot(a.values, b.values) / (na * nb), -1.0, 1.0);
}

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

Embedding HashingEmbedder::embed(std::string_view text) {
  Embedding e{std::vector<double>(dim_, 0.0)};
  for (const auto& token : lexical_tokens(text)) e.values[fnv1a64(token) % dim_] += 1.0;
  const double n = norm_of(e.values);
  if (n > 0.0) {
    for (double& x : e.values) x /= n;
  }
  return e;
}

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderOptions options, std::size_t dim)
    : options_(std::move(options)), dim_(dim) {
  if (options_.endpoint.empty()) throw ValidationError("remote embedder needs an endpoint");
}

Embedding RemoteEmbedder::embed(std::string_view text) {
  const json request = {{"model", options_.model}, {"input", std::string(text)}};
  const auto body =
      http_post_json(options_.endpoint, request.dump(), options_.api_key, options_.timeout, options_.max_retries);
  Embedding e;
  try {
    e.values = json::parse(body).at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& ex) {
    throw ClientError(std::string("malformed embeddings response: ") + ex.what());
  }
  if (e.values.empty()) throw ClientError("embeddings response carried an empty vector");
  std::size_t expected = 0;
  dim_.compare_exchange_strong(expected, e.dim());
  if (e.dim() != dim_.load()) {
    throw ClientError("embeddings response has dimension " + std::to_string(e.dim()) + ", expected " +
                      std::to_string(dim_.load()));
  }
  check_finite(e);
  return e;
}

void VectorIndex::add(std::string id, Embedding embedding) {
  if (dim_ == 0) dim_ = embedding.dim();
  if (embedding.dim() != dim_) {
    throw ValidationError("embedding for \"" + id + "\" has dimension " + std::to_string(embedding.dim()) +
                          ", index expects " + std::to_string(dim_));
  }
  check_finite(embedding);
  const double n = norm_of(embedding.values);
  if (n == 0.0) throw ValidationError("embedding for \"" + id + "\" has zero norm");
  if (!ids_.insert(id).second) throw ValidationError("duplicate index id \"" + id + "\"");
  entries_.emplace_back(std::move(id), std::move(embedding));
  norms_.push_back(n);
}

void sort_ranked(std::vector<ScoredId>& items) {
  std::sort(items.begin(), items.end(), [](const ScoredId& l, const ScoredId& r) {
    if (l.score != r.score) return l.score > r.score;
    return l.id < r.id;
  });
}

std::vector<ScoredId> VectorIndex::top_k(const Embedding& query, std::size_t k) const {
  if (query.dim() != dim_) {
    throw ValidationError("query dimension " + std::to_string(query.dim()) + " does not match index dimension " +
                          std::to_string(dim_));
  }
  const double qn = norm_of(query.values);
  if (qn == 0.0) throw ValidationError("query embedding has zero norm");
  std::vector<ScoredId> scored;
  scored.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const double s = std::clamp(dot(query.values, entries_[i].second.values) / (qn * norms_[i]), -1.0, 1.0);
    scored.push_back(ScoredId{entries_[i].first, s});
  }
  const std::size_t n = std::min(k, scored.size());
  auto cmp = [](const ScoredId& l, const ScoredId& r) {
    if (l.score != r.score) return l.score > r.score;
    return l.id < r.id;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), cmp);
  scored.resize(n);
  return scored;
}

}  // namespace graphgrade
