#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autograde/prompt_forge.hpp"

namespace autograde {

struct ModelConfig {
  std::string endpoint_url = "https://api.openai.com/v1";
  std::string model_name = "gpt-3.5-turbo";
  double temperature = 0.0;
  int max_reply_tokens = 1024;
  std::chrono::milliseconds timeout{60000};
  // Name of the environment variable holding the bearer credential.
  std::string credential_env = "AUTOGRADE_API_KEY";
  std::optional<std::string> system_prompt;
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds max_retry_after{60000};

  /// Throws std::invalid_argument on a malformed URL or negative temperature.
  void validate() const;
};

enum class TransportStatus { ok, retried_ok, failed };
enum class FailureKind { none, transport, replay_miss };

std::string_view to_string(TransportStatus status);

struct LlmReply {
  std::string prompt_digest;
  std::string text;  // empty when failed
  std::chrono::milliseconds latency{0};
  TransportStatus transport_status = TransportStatus::ok;
  FailureKind failure = FailureKind::none;
  std::string error;
  std::string raw_provider_payload;
  int attempts = 0;

  bool ok() const { return transport_status != TransportStatus::failed; }
};

/// SHA-256 (lowercase hex) over model, temperature and prompt, joined by
/// '\n'. The temperature uses its shortest round-trip decimal form.
std::string prompt_digest(std::string_view model, double temperature, std::string_view prompt);

std::string sha256_hex(std::string_view bytes);

enum class CassetteMode { record, replay, live };

CassetteMode parse_cassette_mode(std::string_view text);
std::string_view to_string(CassetteMode mode);

struct CassetteEntry {
  std::string digest;
  std::string model;
  double temperature = 0.0;
  std::string prompt;
  std::string reply;
  // Scripted transport failure; replays as a failed reply.
  std::optional<std::string> failure;

  bool operator==(const CassetteEntry&) const = default;
};

nlohmann::json to_json(const CassetteEntry& e);
CassetteEntry cassette_entry_from_json(const nlohmann::json& j);

/// Digest-keyed store of recorded replies, backed by a line-delimited JSON
/// file. Writes are serialized internally.
class Cassette {
 public:
  explicit Cassette(CassetteMode mode) : mode_(mode) {}

  /// Loads `file` when it exists. Replay mode requires it; record mode
  /// creates it on first write.
  Cassette(const std::filesystem::path& file, CassetteMode mode);

  CassetteMode mode() const { return mode_; }
  std::optional<CassetteEntry> lookup(const std::string& digest) const;

  /// Stores the entry and, when file-backed, appends it as one line.
  void record(const CassetteEntry& entry);

  std::size_t size() const;

 private:
  CassetteMode mode_;
  std::optional<std::filesystem::path> file_;
  mutable std::mutex mu_;
  std::map<std::string, CassetteEntry> entries_;
};

class ReplayMiss : public std::runtime_error {
 public:
  explicit ReplayMiss(const std::string& digest)
      : std::runtime_error("replay miss: no cassette entry for digest " + digest), digest_(digest) {}
  const std::string& digest() const { return digest_; }

 private:
  std::string digest_;
};

struct HttpResult {
  int status = 0;  // 0: no response (connection error, timeout)
  std::string body;
  std::optional<double> retry_after_seconds;
  std::string error;
};

/// Sends one POST with a JSON body. Implementations must be thread-safe.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual HttpResult post_json(const std::string& url, const std::string& body, const std::string& bearer,
                               std::chrono::milliseconds timeout) = 0;
};

std::shared_ptr<ChatTransport> make_http_transport();

/// Builds the chat-completion request body for one prompt.
nlohmann::json chat_request_body(const ModelConfig& config, std::string_view prompt_text);

/// First choice's message content. Throws std::runtime_error on a malformed body.
std::string extract_reply_text(const std::string& response_body);

class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  Gateway(ModelConfig config, Cassette& cassette, std::shared_ptr<ChatTransport> transport = nullptr);

  /// Replay mode never touches the network and throws ReplayMiss on a miss.
  /// Transport failures after the retry budget come back as a failed reply.
  LlmReply complete(const AssessmentPrompt& prompt);

  /// Replies in input order; at most `max_in_flight` requests outstanding.
  /// Failures (including replay misses) stay per item.
  std::vector<LlmReply> complete_batch(std::span<const AssessmentPrompt> prompts, std::size_t max_in_flight);

  const ModelConfig& config() const { return config_; }
  void set_sleeper(Sleeper sleeper) { sleep_ = std::move(sleeper); }

 private:
  LlmReply send(const std::string& digest, const std::string& prompt_text);

  ModelConfig config_;
  Cassette& cassette_;
  std::shared_ptr<ChatTransport> transport_;
  Sleeper sleep_;
};

}  // namespace autograde
