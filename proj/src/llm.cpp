#include "graphgrade/llm.hpp"

#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "graphgrade/error.hpp"
#include "graphgrade/kgraph.hpp"
#include "graphgrade/text.hpp"

namespace graphgrade {

using nlohmann::json;

std::string prompt_hash(std::string_view system_prompt, std::string_view user_prompt) {
  std::string buf;
  buf.reserve(system_prompt.size() + user_prompt.size() + 1);
  buf.append(system_prompt);
  buf.push_back('\x1e');
  buf.append(user_prompt);
  return hex64(fnv1a64(buf));
}

std::optional<std::string> find_first_json_object(std::string_view text) {
  for (std::size_t open = text.find('{'); open != std::string_view::npos; open = text.find('{', open + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        std::string candidate(text.substr(open, i - open + 1));
        if (json::accept(candidate)) return candidate;
        break;
      }
    }
  }
  return std::nullopt;
}

ReplayClient ReplayClient::from_file(const std::filesystem::path& path) {
  const json doc = read_json_file(path);
  if (!doc.is_object()) throw ValidationError(path.string() + ": replay store must be a JSON object");
  std::map<std::string, std::string> replies;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_string()) throw ValidationError(path.string() + ": reply for " + key + " is not a string");
    replies.emplace(key, value.get<std::string>());
  }
  return ReplayClient(std::move(replies));
}

std::string ReplayClient::complete(const std::string& system_prompt, const std::string& user_prompt,
                                   const DecodingParams&) {
  const auto key = prompt_hash(system_prompt, user_prompt);
  auto it = replies_.find(key);
  if (it == replies_.end()) throw ClientError("replay store has no reply for prompt hash " + key);
  return it->second;
}

std::string RecordingClient::complete(const std::string& system_prompt, const std::string& user_prompt,
                                      const DecodingParams& params) {
  auto reply = inner_.complete(system_prompt, user_prompt, params);
  std::lock_guard lock(mu_);
  recorded_[prompt_hash(system_prompt, user_prompt)] = reply;
  return reply;
}

std::map<std::string, std::string> RecordingClient::recorded() const {
  std::lock_guard lock(mu_);
  return recorded_;
}

void RecordingClient::save(const std::filesystem::path& path) const {
  write_json_file(json(recorded()), path);
}

HttpChatClient::HttpChatClient(HttpClientOptions options) : options_(std::move(options)) {
  if (options_.endpoint.empty()) throw ValidationError("chat client needs an endpoint");
  if (options_.max_retries < 0) throw ValidationError("max_retries must be non-negative");
}

std::string HttpChatClient::complete(const std::string& system_prompt, const std::string& user_prompt,
                                     const DecodingParams& params) {
  json request = {{"model", options_.model},
                  {"temperature", params.temperature},
                  {"max_tokens", params.max_tokens},
                  {"messages",
                   json::array({{{"role", "system"}, {"content", system_prompt}},
                                {{"role", "user"}, {"content", user_prompt}}})}};
  const auto body =
      http_post_json(options_.endpoint, request.dump(), options_.api_key, options_.timeout, options_.max_retries);
  try {
    const auto reply = json::parse(body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ClientError(std::string("malformed chat-completions response: ") + e.what());
  }
}

namespace {

std::vector<std::string> section_items(const std::string& text, std::string_view header) {
  std::vector<std::string> items;
  std::istringstream in(text);
  std::string line;
  bool inside = false;
  while (std::getline(in, line)) {
    if (!inside) {
      inside = line == header;
      continue;
    }
    if (line.rfind("- ", 0) != 0) break;
    items.push_back(line.substr(2));
  }
  return items;
}

}  // namespace

std::string ExtractiveSummaryClient::complete(const std::string&, const std::string& user_prompt,
                                              const DecodingParams&) {
  auto entities = section_items(user_prompt, "ENTITIES:");
  if (entities.empty()) throw ClientError("extractive client only answers community summary prompts");
  for (auto& e : entities) {
    if (auto paren = e.find(" ("); paren != std::string::npos) e.resize(paren);
  }
  std::string summary = "Cluster of " + std::to_string(entities.size()) + " related concepts: " +
                        join(entities, ", ") + ".";
  const auto relations = section_items(user_prompt, "RELATIONS:");
  if (!relations.empty()) summary += " Relations: " + join(relations, "; ") + ".";
  return summary;
}

}  // namespace graphgrade
