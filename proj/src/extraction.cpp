#include "graphgrade/extraction.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "extract_prompt_asset.hpp"
#include "graphgrade/error.hpp"
#include "graphgrade/parallel.hpp"
#include "graphgrade/text.hpp"

namespace graphgrade {

using nlohmann::json;

namespace {

struct Word {
  std::string raw;
  std::string lower;
};

using Clause = std::vector<Word>;
using Sentence = std::vector<Clause>;

constexpr std::string_view kOpeners = "\"'([{";
constexpr std::string_view kClosers = "\"')]}";
constexpr std::size_t kMaxPhraseWords = 5;

const std::unordered_set<std::string_view>& edge_stopwords() {
  static const std::unordered_set<std::string_view> words = {
      "the", "a",  "an",   "this", "that", "these", "those", "which", "who", "it",
      "its", "in", "turn", "also", "then", "and",   "their", "his",   "her", "so"};
  return words;
}

std::vector<Sentence> split_sentences(std::string_view text) {
  std::vector<Sentence> sentences(1);
  sentences.back().emplace_back();
  for (auto token : split_whitespace(text)) {
    std::string_view t = token;
    while (!t.empty() && kOpeners.find(t.front()) != std::string_view::npos) t.remove_prefix(1);
    while (!t.empty() && kClosers.find(t.back()) != std::string_view::npos) t.remove_suffix(1);
    char terminator = 0;
    if (!t.empty() && std::string_view(".!?,;:").find(t.back()) != std::string_view::npos) {
      terminator = t.back();
      while (!t.empty() && std::string_view(".!?,;:").find(t.back()) != std::string_view::npos) t.remove_suffix(1);
      while (!t.empty() && kClosers.find(t.back()) != std::string_view::npos) t.remove_suffix(1);
    }
    if (!t.empty()) sentences.back().back().push_back(Word{std::string(t), utf8_lower(t)});
    if (terminator == '.' || terminator == '!' || terminator == '?') {
      sentences.emplace_back();
      sentences.back().emplace_back();
    } else if (terminator != 0) {
      sentences.back().emplace_back();
    }
  }
  for (auto& s : sentences) {
    s.erase(std::remove_if(s.begin(), s.end(), [](const Clause& c) { return c.empty(); }), s.end());
  }
  sentences.erase(std::remove_if(sentences.begin(), sentences.end(), [](const Sentence& s) { return s.empty(); }),
                  sentences.end());
  return sentences;
}

struct Connector {
  std::size_t start;
  std::size_t length;
  std::string predicate;
};

std::vector<Connector> find_connectors(const Clause& clause) {
  std::vector<Connector> out;
  for (std::size_t i = 0; i < clause.size(); ++i) {
    const auto& w = clause[i].lower;
    const std::string_view next = i + 1 < clause.size() ? std::string_view(clause[i + 1].lower) : "";
    if (w == "causes" || w == "cause" || w == "caused") {
      out.push_back({i, 1, w});
    } else if ((w == "leads" || w == "lead" || w == "led") && next == "to") {
      out.push_back({i, 2, w + " to"});
      ++i;
    } else if (w == "is" && (next == "a" || next == "an")) {
      out.push_back({i, 2, "is a"});
      ++i;
    }
  }
  return out;
}

// Surface text of words [lo, hi) with stopwords trimmed from both ends, or
// empty when nothing meaningful remains.
std::string phrase(const Clause& clause, std::size_t lo, std::size_t hi, bool keep_tail) {
  const auto& stop = edge_stopwords();
  while (hi - lo > 1 && stop.count(clause[lo].lower)) ++lo;
  while (hi - lo > 1 && stop.count(clause[hi - 1].lower)) --hi;
  if (hi <= lo) return {};
  if (hi - lo > kMaxPhraseWords) {
    if (keep_tail) {
      lo = hi - kMaxPhraseWords;
    } else {
      hi = lo + kMaxPhraseWords;
    }
  }
  // A lone lower-case function word is not an entity; "A" as a name is.
  if (hi - lo == 1 && stop.count(clause[lo].lower) && clause[lo].raw == clause[lo].lower) return {};
  std::vector<std::string> words;
  for (std::size_t i = lo; i < hi; ++i) words.push_back(clause[i].raw);
  return join(words, " ");
}

bool capitalized(const Word& w) { return !w.raw.empty() && w.raw.front() >= 'A' && w.raw.front() <= 'Z'; }

std::vector<std::string> capitalized_phrases(const Sentence& sentence) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  bool first_word = true;
  for (const auto& clause : sentence) {
    std::size_t i = 0;
    while (i < clause.size()) {
      if (!capitalized(clause[i])) {
        ++i;
        first_word = false;
        continue;
      }
      std::size_t j = i;
      while (j < clause.size() && capitalized(clause[j])) ++j;
      const bool lone_opener = first_word && i == 0 && j - i == 1;
      const bool function_word = j - i == 1 && (clause[i].raw == "I" || edge_stopwords().count(clause[i].lower));
      if (!lone_opener && !function_word) {
        auto p = phrase(clause, i, j, false);
        if (!p.empty() && seen.insert(canonicalize(p)).second) out.push_back(std::move(p));
      }
      first_word = false;
      i = j;
    }
    first_word = false;
  }
  return out;
}

}  // namespace

std::vector<Triple> PatternExtractor::extract(const Chunk& chunk) {
  std::vector<Triple> out;
  for (const auto& sentence : split_sentences(chunk.text)) {
    std::set<std::pair<std::string, std::string>> linked;
    for (const auto& clause : sentence) {
      const auto connectors = find_connectors(clause);
      for (std::size_t k = 0; k < connectors.size(); ++k) {
        const auto& c = connectors[k];
        const std::size_t subj_lo = k == 0 ? 0 : connectors[k - 1].start + connectors[k - 1].length;
        const std::size_t obj_hi = k + 1 < connectors.size() ? connectors[k + 1].start : clause.size();
        if (c.start <= subj_lo || c.start + c.length >= obj_hi) continue;
        auto subject = phrase(clause, subj_lo, c.start, true);
        auto object = phrase(clause, c.start + c.length, obj_hi, false);
        if (subject.empty() || object.empty()) continue;
        auto cs = canonicalize(subject);
        auto co = canonicalize(object);
        if (cs == co) continue;
        linked.emplace(cs, co);
        linked.emplace(co, cs);
        out.push_back(Triple{std::move(subject), c.predicate, std::move(object), chunk.chunk_id});
      }
    }
    const auto names = capitalized_phrases(sentence);
    for (std::size_t i = 0; i < names.size(); ++i) {
      for (std::size_t j = i + 1; j < names.size(); ++j) {
        if (linked.count({canonicalize(names[i]), canonicalize(names[j])})) continue;
        out.push_back(Triple{names[i], "co-occurs with", names[j], chunk.chunk_id});
      }
    }
  }
  return out;
}

std::string LlmExtractor::system_prompt() {
  return "You build knowledge graphs for grading short science answers. You reply with JSON only.";
}

std::string LlmExtractor::user_prompt(const Chunk& chunk) {
  std::string prompt(kExtractTriplesPrompt);
  constexpr std::string_view slot = "{{chunk_text}}";
  if (auto pos = prompt.find(slot); pos != std::string::npos) prompt.replace(pos, slot.size(), chunk.text);
  return prompt;
}

std::vector<Triple> LlmExtractor::parse_reply(const std::string& reply, const std::string& chunk_id) {
  const auto object = find_first_json_object(reply);
  if (!object) throw ParseError("extractor reply for chunk \"" + chunk_id + "\" contains no JSON object");
  const auto doc = json::parse(*object);
  auto it = doc.find("triples");
  if (it == doc.end() || !it->is_array()) {
    throw ParseError("extractor reply for chunk \"" + chunk_id + "\" lacks a \"triples\" array");
  }
  std::vector<Triple> out;
  for (const auto& t : *it) {
    Triple triple;
    try {
      triple = Triple{t.at("subject").get<std::string>(), t.at("predicate").get<std::string>(),
                      t.at("object").get<std::string>(), chunk_id};
    } catch (const json::exception&) {
      throw ParseError("extractor reply for chunk \"" + chunk_id + "\" has a malformed triple: " + t.dump());
    }
    if (trim(triple.subject).empty() || trim(triple.predicate).empty() || trim(triple.object).empty()) {
      throw ParseError("extractor reply for chunk \"" + chunk_id + "\" has a blank triple field");
    }
    if (canonicalize(triple.subject) == canonicalize(triple.object)) continue;
    triple.predicate = canonicalize(triple.predicate);
    out.push_back(std::move(triple));
  }
  return out;
}

std::vector<Triple> LlmExtractor::extract(const Chunk& chunk) {
  const auto reply = client_.complete(system_prompt(), user_prompt(chunk), params_);
  return parse_reply(reply, chunk.chunk_id);
}

std::vector<Triple> extract_triples(Extractor& extractor, const Chunk& chunk) {
  if (trim(chunk.text).empty()) throw ValidationError("chunk \"" + chunk.chunk_id + "\" has no text");
  return extractor.extract(chunk);
}

KnowledgeGraph build_graph(const std::vector<Chunk>& chunks, Extractor& extractor, const BuildOptions& options) {
  if (chunks.empty()) throw ValidationError("cannot build a graph from zero chunks");

  std::vector<std::vector<Triple>> extracted(chunks.size());
  parallel_for_index(chunks.size(), options.max_in_flight, [&](std::size_t i) {
    try {
      extracted[i] = extract_triples(extractor, chunks[i]);
    } catch (const ClientError& e) {
      throw ClientError("extraction failed for chunk \"" + chunks[i].chunk_id + "\": " + e.what());
    } catch (const Error& e) {
      throw Error("extraction failed for chunk \"" + chunks[i].chunk_id + "\": " + e.what());
    }
  });

  KnowledgeGraph graph;
  for (const auto& c : chunks) graph.register_chunk(c);
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const auto& chunk = chunks[i];
    const NodeKind kind = options.node_kind ? options.node_kind(chunk) : NodeKind::concept_node;
    std::vector<NodeId> mentioned;
    for (const auto& t : extracted[i]) {
      const NodeId s = graph.upsert_entity(t.subject, kind);
      const NodeId o = graph.upsert_entity(t.object, kind);
      if (s == o) continue;
      graph.add_relation(s, o, 1.0, t.predicate);
      graph.link_chunk(s, chunk.chunk_id);
      graph.link_chunk(o, chunk.chunk_id);
      mentioned.push_back(s);
      mentioned.push_back(o);
    }
    std::sort(mentioned.begin(), mentioned.end());
    mentioned.erase(std::unique(mentioned.begin(), mentioned.end()), mentioned.end());
    for (std::size_t x = 0; x < mentioned.size(); ++x) {
      for (std::size_t y = x + 1; y < mentioned.size(); ++y) graph.add_relation(mentioned[x], mentioned[y], 1.0);
    }
  }
  return graph;
}

KnowledgeGraph background_partition(const KnowledgeGraph& graph, const std::vector<Document>& corpus) {
  std::unordered_set<std::string> background_docs;
  for (const auto& d : corpus) {
    if (d.kind == DocKind::background) background_docs.insert(d.doc_id);
  }
  KnowledgeGraph sub;
  std::unordered_set<std::string> kept_chunks;
  for (const auto& c : graph.chunks()) {
    if (background_docs.count(c.doc_id)) {
      sub.register_chunk(c);
      kept_chunks.insert(c.chunk_id);
    }
  }
  std::unordered_map<NodeId, NodeId> remap;
  for (const auto& n : graph.nodes()) {
    const auto links = graph.links_of(n.id);
    const bool supported = std::any_of(links.begin(), links.end(),
                                       [&](const ChunkLink& l) { return kept_chunks.count(l.chunk_id) > 0; });
    if (!supported) continue;
    NodeId id = 0;
    for (const auto& form : n.surface_forms) id = sub.upsert_entity(form, n.kind);
    remap.emplace(n.id, id);
    for (const auto& l : links) {
      if (kept_chunks.count(l.chunk_id)) sub.link_chunk(id, l.chunk_id, l.mention_count);
    }
  }
  for (const auto& e : graph.edges()) {
    auto a = remap.find(e.a);
    auto b = remap.find(e.b);
    if (a != remap.end() && b != remap.end()) sub.add_relation(a->second, b->second, e.weight, e.label);
  }
  return sub;
}

}  // namespace graphgrade
