// Copyright 2026 The kdcot Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Model endpoints: chat/completion and embedding services behind one
// interface, an OpenAI-compatible HTTP implementation, a scripted mock, and a
// content-addressed response cache that wraps either.

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "kdcot/vector.hpp"

namespace kdcot::clients {

enum class EndpointKind { Chat, Embed };

struct EndpointSpec {
    EndpointKind kind = EndpointKind::Chat;
    std::string provider = "openai";  // "openai" | "mock"
    std::string base_url;
    std::string model_name;
    double temperature = 0.0;
    int max_tokens = 512;
    std::chrono::milliseconds timeout{60000};
    int retries = 3;
    double rate_limit = 0.0;  // requests per second; 0 disables limiting
    std::chrono::milliseconds backoff_base{500};
    std::chrono::milliseconds backoff_max{30000};
    std::size_t batch_size = 32;     // embeddings per request
    std::string api_key_env;         // environment variable holding a bearer token
    std::string mock_script;         // mock chat: script file; mock embed: vector file (optional)
    std::size_t mock_dim = 64;       // mock embed dimension
};

/// Retries exhausted, transport failure or a non-retryable HTTP status.
class EndpointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// The service answered with something that does not follow the wire schema.
class ProtocolError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ChatEndpoint {
  public:
    virtual ~ChatEndpoint() = default;
    virtual std::string chat(std::string_view prompt) = 0;
    [[nodiscard]] virtual const EndpointSpec& spec() const = 0;
};

class EmbedEndpoint {
  public:
    virtual ~EmbedEndpoint() = default;
    /// One unit-norm vector per input text, in input order.
    virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) = 0;
    [[nodiscard]] virtual const EndpointSpec& spec() const = 0;
};

// ---------------------------------------------------------------------------
// Time

class Clock {
  public:
    using duration = std::chrono::nanoseconds;
    virtual ~Clock() = default;
    virtual duration now() = 0;
    virtual void sleep_for(duration d) = 0;
};

class SystemClock final : public Clock {
  public:
    duration now() override;
    void sleep_for(duration d) override;
    static SystemClock& instance();
};

/// Deterministic clock for tests: sleeping advances time instantly.
class VirtualClock final : public Clock {
  public:
    duration now() override;
    void sleep_for(duration d) override;

  private:
    std::mutex mu_;
    duration now_{0};
};

/// Spaces request starts at least 1/rate apart. Thread-safe.
class RateLimiter {
  public:
    RateLimiter(double requests_per_second, Clock& clock);
    void acquire();

  private:
    Clock& clock_;
    Clock::duration interval_{0};
    std::mutex mu_;
    std::optional<Clock::duration> next_slot_;
};

/// Exponential backoff: base * 2^(attempt-1), capped at max.
struct RetryPolicy {
    int retries = 3;
    std::chrono::milliseconds base{500};
    std::chrono::milliseconds max{30000};

    [[nodiscard]] static bool is_transient(int status, bool network_error);
    [[nodiscard]] std::chrono::milliseconds delay(int attempt) const;
};

// ---------------------------------------------------------------------------
// HTTP

struct HttpResponse {
    int status = 0;
    std::string body;
    bool network_error = false;
    std::string error;
};

class HttpTransport {
  public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post_json(const std::string& base_url, const std::string& path, const std::string& body,
                                   const std::string& bearer_token, std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport; supports http:// and https://.
class HttplibTransport final : public HttpTransport {
  public:
    HttpResponse post_json(const std::string& base_url, const std::string& path, const std::string& body,
                           const std::string& bearer_token, std::chrono::milliseconds timeout) override;
};

/// POSTs {base_url}/chat/completions with a single user message.
class OpenAIChatClient final : public ChatEndpoint {
  public:
    OpenAIChatClient(EndpointSpec spec, std::shared_ptr<HttpTransport> transport, Clock& clock);
    std::string chat(std::string_view prompt) override;
    [[nodiscard]] const EndpointSpec& spec() const override { return spec_; }
    [[nodiscard]] std::uint64_t request_count() const { return requests_; }
    [[nodiscard]] std::uint64_t total_tokens() const { return tokens_; }

  private:
    EndpointSpec spec_;
    std::shared_ptr<HttpTransport> transport_;
    Clock& clock_;
    RateLimiter limiter_;
    std::atomic<std::uint64_t> requests_{0};
    std::atomic<std::uint64_t> tokens_{0};
};

/// POSTs {base_url}/embeddings in batches of spec.batch_size.
class OpenAIEmbedClient final : public EmbedEndpoint {
  public:
    OpenAIEmbedClient(EndpointSpec spec, std::shared_ptr<HttpTransport> transport, Clock& clock);
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
    [[nodiscard]] const EndpointSpec& spec() const override { return spec_; }
    [[nodiscard]] std::uint64_t request_count() const { return requests_; }

  private:
    EndpointSpec spec_;
    std::shared_ptr<HttpTransport> transport_;
    Clock& clock_;
    RateLimiter limiter_;
    std::atomic<std::uint64_t> requests_{0};
};

/// Sends one request with rate limiting and retries; returns the parsed body.
nlohmann::json post_with_retries(HttpTransport& transport, const EndpointSpec& spec, RateLimiter& limiter,
                                 Clock& clock, const std::string& path, const nlohmann::json& body,
                                 std::atomic<std::uint64_t>& request_counter);

// ---------------------------------------------------------------------------
// Cache

std::string sha256_hex(std::string_view data);

/// Content-addressed store: <root>/<key[0:2]>/<key>.json. Writes are atomic
/// (temp file + rename); reads fall back to disk when not in memory.
class ResponseCache {
  public:
    explicit ResponseCache(std::filesystem::path root);

    [[nodiscard]] static std::string chat_key(const EndpointSpec& spec, std::string_view prompt,
                                              std::uint64_t seed);
    [[nodiscard]] static std::string embed_key(const EndpointSpec& spec, std::string_view text);

    std::optional<nlohmann::json> get(const std::string& key);
    void put(const std::string& key, const nlohmann::json& value);

    [[nodiscard]] const std::filesystem::path& root() const { return root_; }
    [[nodiscard]] std::uint64_t hits() const { return hits_; }
    [[nodiscard]] std::uint64_t misses() const { return misses_; }

  private:
    [[nodiscard]] std::filesystem::path path_for(const std::string& key) const;

    std::filesystem::path root_;
    std::mutex mu_;
    std::unordered_map<std::string, nlohmann::json> memory_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

/// Serves repeated prompts from the cache; concurrent identical prompts share
/// one upstream call.
class CachedChat final : public ChatEndpoint {
  public:
    CachedChat(std::shared_ptr<ChatEndpoint> inner, std::shared_ptr<ResponseCache> cache, std::uint64_t seed = 0);
    std::string chat(std::string_view prompt) override;
    [[nodiscard]] const EndpointSpec& spec() const override { return inner_->spec(); }

  private:
    std::shared_ptr<ChatEndpoint> inner_;
    std::shared_ptr<ResponseCache> cache_;
    std::uint64_t seed_;
    std::mutex mu_;
    std::map<std::string, std::shared_future<std::string>> in_flight_;
};

/// Per-text embedding cache; only misses reach the inner endpoint.
class CachedEmbed final : public EmbedEndpoint {
  public:
    CachedEmbed(std::shared_ptr<EmbedEndpoint> inner, std::shared_ptr<ResponseCache> cache);
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
    [[nodiscard]] const EndpointSpec& spec() const override { return inner_->spec(); }

  private:
    std::shared_ptr<EmbedEndpoint> inner_;
    std::shared_ptr<ResponseCache> cache_;
};

// ---------------------------------------------------------------------------
// Mocks

struct MockRule {
    enum class Matcher { Exact, Substring, Pattern };
    Matcher matcher = Matcher::Substring;
    std::string match;
    std::vector<std::string> responses;  // one is picked deterministically from (seed, prompt)
    bool fail = false;                   // raise EndpointError instead of answering
    std::regex pattern;

    [[nodiscard]] bool matches(std::string_view prompt) const;
};

/// Ordered rules; the first match wins, otherwise default_response.
struct MockScript {
    std::vector<MockRule> rules;
    std::string default_response;

    MockScript& exact(std::string prompt, std::string response);
    MockScript& substring(std::string needle, std::string response);
    MockScript& pattern(std::string regex, std::string response);
    MockScript& failing(MockRule::Matcher matcher, std::string match);

    /// {"rules":[{"exact"|"substring"|"pattern": "...", "response": "..." |
    ///  "responses": [...], "fail": bool}], "default": "..."}
    static MockScript from_json(const nlohmann::json& j);
};

class MockChat final : public ChatEndpoint {
  public:
    explicit MockChat(MockScript script, std::uint64_t seed = 0, EndpointSpec spec = {});
    std::string chat(std::string_view prompt) override;
    [[nodiscard]] const EndpointSpec& spec() const override { return spec_; }
    [[nodiscard]] std::uint64_t calls() const { return calls_; }

  private:
    MockScript script_;
    std::uint64_t seed_;
    EndpointSpec spec_;
    std::atomic<std::uint64_t> calls_{0};
};

/// Fixed text -> vector table with a hashed bag-of-words fallback, so similar
/// questions get similar vectors without a model.
class MockEmbed final : public EmbedEndpoint {
  public:
    explicit MockEmbed(std::size_t dim, std::map<std::string, Embedding> fixed = {}, EndpointSpec spec = {});
    std::vector<Embedding> embed(const std::vector<std::string>& texts) override;
    [[nodiscard]] const EndpointSpec& spec() const override { return spec_; }
    [[nodiscard]] std::uint64_t calls() const { return calls_; }

    /// {"dim": d, "vectors": {"text": [..], ...}}
    static std::shared_ptr<MockEmbed> from_json(const nlohmann::json& j, EndpointSpec spec = {});

  private:
    [[nodiscard]] Embedding hashed(std::string_view text) const;

    std::size_t dim_;
    std::map<std::string, Embedding> fixed_;
    EndpointSpec spec_;
    std::atomic<std::uint64_t> calls_{0};
};

std::uint64_t fnv1a64(std::string_view s);

// ---------------------------------------------------------------------------
// Factories

struct ClientOptions {
    std::shared_ptr<ResponseCache> cache;  // null disables caching
    std::uint64_t seed = 0;
    std::shared_ptr<HttpTransport> transport;  // null selects HttplibTransport
    Clock* clock = nullptr;                    // null selects SystemClock
};

std::shared_ptr<ChatEndpoint> make_chat(const EndpointSpec& spec, const ClientOptions& options);
std::shared_ptr<EmbedEndpoint> make_embed(const EndpointSpec& spec, const ClientOptions& options);

EndpointSpec endpoint_from_json(const nlohmann::json& j, EndpointKind kind);

}  // namespace kdcot::clients
