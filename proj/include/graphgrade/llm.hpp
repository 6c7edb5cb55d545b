#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace graphgrade {

struct DecodingParams {
  double temperature = 0.0;
  int max_tokens = 1024;
};

/// complete(system, user, params) -> reply text. Implementations must be safe
/// to call from several threads at once.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                               const DecodingParams& params) = 0;
};

/// First balanced `{...}` span in `text` that parses as a JSON object.
std::optional<std::string> find_first_json_object(std::string_view text);

/// Replay key of a prompt pair.
std::string prompt_hash(std::string_view system_prompt, std::string_view user_prompt);

/// Serves recorded replies keyed by prompt_hash. A miss is a ClientError.
class ReplayClient final : public LlmClient {
 public:
  ReplayClient() = default;
  explicit ReplayClient(std::map<std::string, std::string> replies) : replies_(std::move(replies)) {}

  /// Store format: {"<prompt hash>": "<reply>", ...}
  static ReplayClient from_file(const std::filesystem::path& path);

  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       const DecodingParams& params) override;

  const std::map<std::string, std::string>& replies() const noexcept { return replies_; }

 private:
  std::map<std::string, std::string> replies_;
};

/// Forwards to another client and remembers every exchange, for producing replay stores.
class RecordingClient final : public LlmClient {
 public:
  explicit RecordingClient(LlmClient& inner) : inner_(inner) {}

  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       const DecodingParams& params) override;

  std::map<std::string, std::string> recorded() const;
  void save(const std::filesystem::path& path) const;

 private:
  LlmClient& inner_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> recorded_;
};

struct HttpClientOptions {
  std::string endpoint;  // full URL, e.g. http://host:port/v1/chat/completions
  std::string model;
  std::string api_key;   // sent as a bearer token when non-empty
  std::chrono::milliseconds timeout{60000};
  int max_retries = 2;
};

/// OpenAI-compatible chat-completions client.
class HttpChatClient final : public LlmClient {
 public:
  explicit HttpChatClient(HttpClientOptions options);

  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       const DecodingParams& params) override;

 private:
  HttpClientOptions options_;
};

/// Offline summarizer double. Understands only community-summary prompts and
/// condenses their ENTITIES and RELATIONS sections into one paragraph.
class ExtractiveSummaryClient final : public LlmClient {
 public:
  std::string complete(const std::string& system_prompt, const std::string& user_prompt,
                       const DecodingParams& params) override;
};

/// POSTs a JSON body and returns the response body. Retries transport errors,
/// HTTP 429 and 5xx up to `max_retries` times; other statuses fail immediately.
std::string http_post_json(const std::string& url, const std::string& body, const std::string& api_key,
                           std::chrono::milliseconds timeout, int max_retries);

}  // namespace graphgrade
