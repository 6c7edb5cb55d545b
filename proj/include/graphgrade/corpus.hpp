#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace graphgrade {

enum class DocKind { reference, rubric, background };

std::string_view to_string(DocKind kind);
std::optional<DocKind> parse_doc_kind(std::string_view name);

struct Document {
  std::string doc_id;
  std::string title;
  std::string body;
  DocKind kind = DocKind::reference;
};

/// Half-open offsets into the parent document's whitespace token sequence.
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct Chunk {
  std::string chunk_id;
  std::string doc_id;
  std::size_t seq = 0;
  std::string text;
  TokenSpan token_span;

  friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct ChunkingOptions {
  std::size_t chunk_size = 200;
  std::size_t overlap = 40;
};

/// Reads a JSON Lines corpus. Blank lines are skipped; errors carry the 1-based line.
std::vector<Document> load_corpus(const std::filesystem::path& path);

/// Parses corpus text already in memory; `source` names it in error messages.
std::vector<Document> parse_corpus(std::string_view text, std::string_view source = "<corpus>");

/// Windows of `chunk_size` tokens advancing by `chunk_size - overlap`; the last
/// window is clipped to the document end and kept even when short.
std::vector<Chunk> chunk_document(const Document& doc, const ChunkingOptions& options);

std::vector<Chunk> chunk_corpus(const std::vector<Document>& docs, const ChunkingOptions& options);

/// "<doc_id>#<seq>"
std::string make_chunk_id(std::string_view doc_id, std::size_t seq);

}  // namespace graphgrade
