#include "graphgrade/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "graphgrade/error.hpp"
#include "graphgrade/text.hpp"

namespace graphgrade {

using nlohmann::json;

std::string_view to_string(DocKind kind) {
  switch (kind) {
    case DocKind::reference:
      return "reference";
    case DocKind::rubric:
      return "rubric";
    case DocKind::background:
      return "background";
  }
  return "reference";
}

std::optional<DocKind> parse_doc_kind(std::string_view name) {
  if (name == "reference") return DocKind::reference;
  if (name == "rubric") return DocKind::rubric;
  if (name == "background") return DocKind::background;
  return std::nullopt;
}

namespace {

std::string required_string(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw ParseError("line " + std::to_string(line) + ": missing or non-string field \"" + key + "\"", line);
  }
  return it->get<std::string>();
}

}  // namespace

std::vector<Document> parse_corpus(std::string_view text, std::string_view source) {
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (trim(raw).empty()) continue;
    json obj;
    try {
      obj = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string(source) + ": line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (!obj.is_object()) {
      throw ParseError(std::string(source) + ": line " + std::to_string(line_no) + ": record is not an object",
                       line_no);
    }
    Document doc;
    doc.doc_id = required_string(obj, "doc_id", line_no);
    doc.title = obj.contains("title") ? required_string(obj, "title", line_no) : std::string();
    doc.body = required_string(obj, "body", line_no);
    const auto kind = parse_doc_kind(required_string(obj, "kind", line_no));
    if (!kind) {
      throw ParseError("line " + std::to_string(line_no) + ": kind must be reference, rubric or background",
                       line_no);
    }
    doc.kind = *kind;
    if (trim(doc.doc_id).empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": blank doc_id", line_no);
    }
    if (trim(doc.body).empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty body for \"" + doc.doc_id + "\"", line_no);
    }
    if (auto [it, inserted] = seen.emplace(doc.doc_id, line_no); !inserted) {
      throw ParseError("line " + std::to_string(line_no) + ": duplicate doc_id \"" + doc.doc_id +
                           "\" (first seen on line " + std::to_string(it->second) + ")",
                       line_no);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), path.string());
}

std::string make_chunk_id(std::string_view doc_id, std::size_t seq) {
  return std::string(doc_id) + "#" + std::to_string(seq);
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingOptions& options) {
  if (options.chunk_size == 0 || options.chunk_size <= options.overlap) {
    throw ValidationError("chunk_size must exceed overlap (chunk_size=" + std::to_string(options.chunk_size) +
                          ", overlap=" + std::to_string(options.overlap) + ")");
  }
  const auto tokens = split_whitespace(doc.body);
  if (tokens.empty()) throw ValidationError("document \"" + doc.doc_id + "\" has an empty body");

  const std::size_t stride = options.chunk_size - options.overlap;
  std::vector<Chunk> chunks;
  for (std::size_t start = 0;; start += stride) {
    const std::size_t end = std::min(start + options.chunk_size, tokens.size());
    Chunk c;
    c.doc_id = doc.doc_id;
    c.seq = chunks.size();
    c.chunk_id = make_chunk_id(doc.doc_id, c.seq);
    c.token_span = {start, end};
    c.text = join({tokens.begin() + static_cast<std::ptrdiff_t>(start),
                   tokens.begin() + static_cast<std::ptrdiff_t>(end)},
                  " ");
    chunks.push_back(std::move(c));
    if (end == tokens.size()) break;
  }
  return chunks;
}

std::vector<Chunk> chunk_corpus(const std::vector<Document>& docs, const ChunkingOptions& options) {
  std::vector<Chunk> out;
  for (const auto& doc : docs) {
    auto chunks = chunk_document(doc, options);
    out.insert(out.end(), std::make_move_iterator(chunks.begin()), std::make_move_iterator(chunks.end()));
  }
  return out;
}

}  // namespace graphgrade
