#include "autograde/llm_gateway.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <openssl/evp.h>

namespace autograde {

using nlohmann::json;

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // begins with '/' or is empty
};

std::optional<SplitUrl> split_url(std::string_view url) {
  std::size_t scheme_end;
  if (url.rfind("http://", 0) == 0) {
    scheme_end = 7;
  } else if (url.rfind("https://", 0) == 0) {
    scheme_end = 8;
  } else {
    return std::nullopt;
  }
  const auto slash = url.find('/', scheme_end);
  SplitUrl out{std::string(url.substr(0, slash)), slash == std::string_view::npos ? "" : std::string(url.substr(slash))};
  if (out.origin.size() == scheme_end) return std::nullopt;
  if (out.origin.find_first_of(" \t?#@") != std::string::npos) return std::nullopt;
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

class HttplibTransport final : public ChatTransport {
 public:
  HttpResult post_json(const std::string& url, const std::string& body, const std::string& bearer,
                       std::chrono::milliseconds timeout) override {
    HttpResult out;
    const auto parts = split_url(url);
    if (!parts) {
      out.error = "malformed url " + url;
      return out;
    }
    httplib::Client client(parts->origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);
    auto res = client.Post(parts->path.empty() ? "/" : parts->path, headers, body, "application/json");
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    if (res->has_header("Retry-After")) {
      const auto value = res->get_header_value("Retry-After");
      double seconds = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seconds);
      if (ec == std::errc{}) out.retry_after_seconds = seconds;
    }
    return out;
  }
};

bool retryable(const HttpResult& r) {
  return r.status == 0 || r.status == 429 || r.status >= 500;
}

}  // namespace

void ModelConfig::validate() const {
  if (!split_url(endpoint_url)) throw std::invalid_argument("malformed endpoint url: " + endpoint_url);
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("temperature must be non-negative");
  }
  if (max_reply_tokens <= 0) throw std::invalid_argument("max_reply_tokens must be positive");
  if (max_retries < 0) throw std::invalid_argument("max_retries must be non-negative");
  if (model_name.empty()) throw std::invalid_argument("model name is empty");
}

std::string_view to_string(TransportStatus status) {
  switch (status) {
    case TransportStatus::ok:
      return "ok";
    case TransportStatus::retried_ok:
      return "retried_ok";
    case TransportStatus::failed:
      return "failed";
  }
  return "unknown";
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

std::string prompt_digest(std::string_view model, double temperature, std::string_view prompt) {
  std::string canonical;
  canonical.reserve(model.size() + prompt.size() + 32);
  canonical += model;
  canonical += '\n';
  canonical += shortest(temperature);
  canonical += '\n';
  canonical += prompt;
  return sha256_hex(canonical);
}

CassetteMode parse_cassette_mode(std::string_view text) {
  if (text == "record") return CassetteMode::record;
  if (text == "replay") return CassetteMode::replay;
  if (text == "live") return CassetteMode::live;
  throw std::invalid_argument("unknown cassette mode '" + std::string(text) + "'");
}

std::string_view to_string(CassetteMode mode) {
  switch (mode) {
    case CassetteMode::record:
      return "record";
    case CassetteMode::replay:
      return "replay";
    case CassetteMode::live:
      return "live";
  }
  return "unknown";
}

json to_json(const CassetteEntry& e) {
  json j = {{"digest", e.digest},
            {"model", e.model},
            {"temperature", e.temperature},
            {"prompt", e.prompt},
            {"reply", e.reply}};
  if (e.failure) j["failure"] = *e.failure;
  return j;
}

CassetteEntry cassette_entry_from_json(const json& j) {
  CassetteEntry e;
  e.digest = j.at("digest").get<std::string>();
  e.model = j.at("model").get<std::string>();
  e.temperature = j.at("temperature").get<double>();
  e.prompt = j.at("prompt").get<std::string>();
  e.reply = j.value("reply", std::string());
  if (j.contains("failure") && !j["failure"].is_null()) e.failure = j["failure"].get<std::string>();
  return e;
}

Cassette::Cassette(const std::filesystem::path& file, CassetteMode mode) : mode_(mode), file_(file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    if (mode == CassetteMode::replay) throw std::runtime_error("cassette not found: " + file.string());
    return;
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      auto e = cassette_entry_from_json(json::parse(line));
      entries_[e.digest] = std::move(e);
    } catch (const json::exception& ex) {
      throw std::runtime_error(file.string() + ":" + std::to_string(lineno) + ": bad cassette record: " + ex.what());
    }
  }
}

std::optional<CassetteEntry> Cassette::lookup(const std::string& digest) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(digest);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void Cassette::record(const CassetteEntry& entry) {
  std::lock_guard lock(mu_);
  entries_[entry.digest] = entry;
  if (!file_) return;
  std::ofstream out(*file_, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to cassette " + file_->string());
  out << to_json(entry).dump() << '\n';
}

std::size_t Cassette::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::shared_ptr<ChatTransport> make_http_transport() {
  return std::make_shared<HttplibTransport>();
}

json chat_request_body(const ModelConfig& config, std::string_view prompt_text) {
  json messages = json::array();
  if (config.system_prompt) messages.push_back({{"role", "system"}, {"content", *config.system_prompt}});
  messages.push_back({{"role", "user"}, {"content", prompt_text}});
  return {{"model", config.model_name},
          {"temperature", config.temperature},
          {"max_tokens", config.max_reply_tokens},
          {"messages", std::move(messages)}};
}

std::string extract_reply_text(const std::string& response_body) {
  try {
    const auto doc = json::parse(response_body);
    const auto& choices = doc.at("choices");
    if (!choices.is_array() || choices.empty()) throw std::runtime_error("response has no choices");
    return choices.at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed chat-completion response: ") + e.what());
  }
}

Gateway::Gateway(ModelConfig config, Cassette& cassette, std::shared_ptr<ChatTransport> transport)
    : config_(std::move(config)),
      cassette_(cassette),
      transport_(transport ? std::move(transport) : make_http_transport()),
      sleep_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  config_.validate();
}

LlmReply Gateway::complete(const AssessmentPrompt& prompt) {
  const auto digest = prompt_digest(config_.model_name, config_.temperature, prompt.text);
  if (cassette_.mode() == CassetteMode::replay) {
    auto entry = cassette_.lookup(digest);
    if (!entry) throw ReplayMiss(digest);
    LlmReply r;
    r.prompt_digest = digest;
    if (entry->failure) {
      r.transport_status = TransportStatus::failed;
      r.failure = FailureKind::transport;
      r.error = *entry->failure;
    } else {
      r.text = entry->reply;
    }
    return r;
  }

  auto reply = send(digest, prompt.text);
  // Failures are not recorded so a re-record retries them.
  if (cassette_.mode() == CassetteMode::record && reply.ok()) {
    cassette_.record({digest, config_.model_name, config_.temperature, prompt.text, reply.text, std::nullopt});
  }
  return reply;
}

LlmReply Gateway::send(const std::string& digest, const std::string& prompt_text) {
  const auto parts = split_url(config_.endpoint_url);
  const std::string url = parts->origin + parts->path + "/chat/completions";
  const std::string body = chat_request_body(config_, prompt_text).dump();
  const char* credential = std::getenv(config_.credential_env.c_str());
  const std::string bearer = credential ? credential : "";

  LlmReply reply;
  reply.prompt_digest = digest;
  const auto start = std::chrono::steady_clock::now();
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    reply.attempts = attempt + 1;
    const auto res = transport_->post_json(url, body, bearer, config_.timeout);
    if (res.status >= 200 && res.status < 300) {
      reply.raw_provider_payload = res.body;
      try {
        reply.text = extract_reply_text(res.body);
        reply.transport_status = attempt == 0 ? TransportStatus::ok : TransportStatus::retried_ok;
        reply.error.clear();
      } catch (const std::runtime_error& e) {
        reply.transport_status = TransportStatus::failed;
        reply.failure = FailureKind::transport;
        reply.error = e.what();
      }
      break;
    }
    reply.transport_status = TransportStatus::failed;
    reply.failure = FailureKind::transport;
    reply.raw_provider_payload = res.body;
    reply.error = res.status ? "HTTP " + std::to_string(res.status) : "transport error: " + res.error;
    if (!retryable(res) || attempt == config_.max_retries) break;

    auto wait = config_.backoff_base * (1LL << attempt);
    if (res.status == 429 && res.retry_after_seconds) {
      wait = std::chrono::milliseconds(static_cast<long long>(*res.retry_after_seconds * 1000.0));
    }
    sleep_(std::min<std::chrono::milliseconds>(wait, config_.max_retry_after));
  }
  if (reply.transport_status == TransportStatus::failed) reply.text.clear();
  reply.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
  return reply;
}

std::vector<LlmReply> Gateway::complete_batch(std::span<const AssessmentPrompt> prompts, std::size_t max_in_flight) {
  if (max_in_flight == 0) throw std::invalid_argument("max_in_flight must be at least 1");
  std::vector<LlmReply> replies(prompts.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < prompts.size(); i = next++) {
      try {
        replies[i] = complete(prompts[i]);
      } catch (const ReplayMiss& e) {
        replies[i].prompt_digest = e.digest();
        replies[i].transport_status = TransportStatus::failed;
        replies[i].failure = FailureKind::replay_miss;
        replies[i].error = e.what();
      } catch (const std::exception& e) {
        replies[i].transport_status = TransportStatus::failed;
        replies[i].failure = FailureKind::transport;
        replies[i].error = e.what();
      }
    }
  };

  const std::size_t workers = std::min(max_in_flight, prompts.size());
  if (workers <= 1) {
    worker();
    return replies;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  pool.clear();
  return replies;
}

}  // namespace autograde
