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

#include "kdcot/clients.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <thread>

#include "kdcot/io.hpp"
#include "kdcot/text.hpp"

namespace kdcot::clients {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Time

Clock::duration SystemClock::now() {
    return std::chrono::duration_cast<duration>(std::chrono::steady_clock::now().time_since_epoch());
}

void SystemClock::sleep_for(duration d) {
    if (d > duration::zero()) std::this_thread::sleep_for(d);
}

SystemClock& SystemClock::instance() {
    static SystemClock clock;
    return clock;
}

Clock::duration VirtualClock::now() {
    std::lock_guard lock(mu_);
    return now_;
}

void VirtualClock::sleep_for(duration d) {
    std::lock_guard lock(mu_);
    if (d > duration::zero()) now_ += d;
}

RateLimiter::RateLimiter(double requests_per_second, Clock& clock) : clock_(clock) {
    if (requests_per_second > 0.0) {
        interval_ = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / requests_per_second));
    }
}

void RateLimiter::acquire() {
    if (interval_ == Clock::duration::zero()) return;
    Clock::duration wait{0};
    {
        std::lock_guard lock(mu_);
        const auto now = clock_.now();
        const auto slot = next_slot_ ? std::max(now, *next_slot_) : now;
        next_slot_ = slot + interval_;
        wait = slot - now;
    }
    clock_.sleep_for(wait);
}

bool RetryPolicy::is_transient(int status, bool network_error) {
    return network_error || status == 408 || status == 429 || status >= 500;
}

std::chrono::milliseconds RetryPolicy::delay(int attempt) const {
    auto d = base;
    for (int i = 1; i < attempt && d < max; ++i) d *= 2;
    return std::min(d, max);
}

// ---------------------------------------------------------------------------
// OpenAI-compatible clients

json post_with_retries(HttpTransport& transport, const EndpointSpec& spec, RateLimiter& limiter, Clock& clock,
                       const std::string& path, const json& body, std::atomic<std::uint64_t>& request_counter) {
    std::string token;
    if (!spec.api_key_env.empty()) {
        if (const char* v = std::getenv(spec.api_key_env.c_str())) token = v;
    }
    const RetryPolicy policy{spec.retries, spec.backoff_base, spec.backoff_max};
    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 1; attempt <= spec.retries + 1; ++attempt) {
        limiter.acquire();
        ++request_counter;
        const HttpResponse resp = transport.post_json(spec.base_url, path, payload, token, spec.timeout);
        if (!resp.network_error && resp.status >= 200 && resp.status < 300) {
            try {
                return json::parse(resp.body);
            } catch (const json::parse_error& e) {
                throw ProtocolError(spec.base_url + path + ": response is not JSON: " + e.what());
            }
        }
        last_error = resp.network_error ? "network error: " + resp.error
                                        : "HTTP " + std::to_string(resp.status) + ": " + resp.body.substr(0, 200);
        if (!RetryPolicy::is_transient(resp.status, resp.network_error)) break;
        if (attempt <= spec.retries) clock.sleep_for(policy.delay(attempt));
    }
    throw EndpointError(spec.base_url + path + ": " + last_error);
}

OpenAIChatClient::OpenAIChatClient(EndpointSpec spec, std::shared_ptr<HttpTransport> transport, Clock& clock)
    : spec_(std::move(spec)), transport_(std::move(transport)), clock_(clock), limiter_(spec_.rate_limit, clock) {}

std::string OpenAIChatClient::chat(std::string_view prompt) {
    json body = {
        {"model", spec_.model_name},
        {"messages", json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
        {"temperature", spec_.temperature},
        {"max_tokens", spec_.max_tokens},
    };
    const json resp = post_with_retries(*transport_, spec_, limiter_, clock_, "/chat/completions", body, requests_);
    try {
        const auto& content = resp.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw ProtocolError("chat response content is not a string");
        if (resp.contains("usage") && resp["usage"].contains("total_tokens")) {
            tokens_ += resp["usage"]["total_tokens"].get<std::uint64_t>();
        }
        return content.get<std::string>();
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed chat completion response: ") + e.what());
    }
}

OpenAIEmbedClient::OpenAIEmbedClient(EndpointSpec spec, std::shared_ptr<HttpTransport> transport, Clock& clock)
    : spec_(std::move(spec)), transport_(std::move(transport)), clock_(clock), limiter_(spec_.rate_limit, clock) {}

std::vector<Embedding> OpenAIEmbedClient::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw std::invalid_argument("embed: no input texts");
    std::vector<Embedding> out;
    out.reserve(texts.size());
    const std::size_t batch = std::max<std::size_t>(1, spec_.batch_size);
    for (std::size_t begin = 0; begin < texts.size(); begin += batch) {
        const std::size_t end = std::min(texts.size(), begin + batch);
        json body = {
            {"model", spec_.model_name},
            {"input", std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(begin),
                                               texts.begin() + static_cast<std::ptrdiff_t>(end))},
        };
        const json resp = post_with_retries(*transport_, spec_, limiter_, clock_, "/embeddings", body, requests_);
        try {
            const auto& data = resp.at("data");
            if (!data.is_array() || data.size() != end - begin) {
                throw ProtocolError("embedding response has " + std::to_string(data.size()) + " vectors for " +
                                    std::to_string(end - begin) + " inputs");
            }
            std::vector<Embedding> chunk(end - begin);
            for (std::size_t i = 0; i < data.size(); ++i) {
                const std::size_t idx = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
                if (idx >= chunk.size()) throw ProtocolError("embedding index out of range");
                chunk[idx] = normalized(data[i].at("embedding").get<Embedding>());
            }
            for (auto& v : chunk) out.push_back(std::move(v));
        } catch (const json::exception& e) {
            throw ProtocolError(std::string("malformed embedding response: ") + e.what());
        } catch (const std::invalid_argument& e) {
            throw ProtocolError(std::string("unusable embedding vector: ") + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cache

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

ResponseCache::ResponseCache(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

std::string ResponseCache::chat_key(const EndpointSpec& spec, std::string_view prompt, std::uint64_t seed) {
    const json material = {
        "chat", spec.provider, spec.model_name, spec.temperature, spec.max_tokens, seed, std::string(prompt),
    };
    return sha256_hex(material.dump());
}

std::string ResponseCache::embed_key(const EndpointSpec& spec, std::string_view text) {
    const json material = {"embed", spec.provider, spec.model_name, std::string(text)};
    return sha256_hex(material.dump());
}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
    return root_ / key.substr(0, 2) / (key + ".json");
}

std::optional<json> ResponseCache::get(const std::string& key) {
    {
        std::lock_guard lock(mu_);
        if (auto it = memory_.find(key); it != memory_.end()) {
            ++hits_;
            return it->second;
        }
    }
    const auto path = path_for(key);
    if (std::filesystem::exists(path)) {
        try {
            json entry = json::parse(io::read_file(path));
            std::lock_guard lock(mu_);
            memory_[key] = entry.at("value");
            ++hits_;
            return entry.at("value");
        } catch (const std::exception&) {
            // Unreadable entries are treated as misses and overwritten.
        }
    }
    ++misses_;
    return std::nullopt;
}

void ResponseCache::put(const std::string& key, const json& value) {
    const json entry = {
        {"key", key},
        {"value", value},
        {"created_at", static_cast<std::int64_t>(std::time(nullptr))},
    };
    io::write_file_atomic(path_for(key), entry.dump());
    std::lock_guard lock(mu_);
    memory_[key] = value;
}

CachedChat::CachedChat(std::shared_ptr<ChatEndpoint> inner, std::shared_ptr<ResponseCache> cache, std::uint64_t seed)
    : inner_(std::move(inner)), cache_(std::move(cache)), seed_(seed) {}

std::string CachedChat::chat(std::string_view prompt) {
    const std::string key = ResponseCache::chat_key(inner_->spec(), prompt, seed_);
    if (auto hit = cache_->get(key)) return hit->get<std::string>();

    std::promise<std::string> promise;
    std::shared_future<std::string> future;
    bool owner = false;
    {
        std::lock_guard lock(mu_);
        if (auto it = in_flight_.find(key); it != in_flight_.end()) {
            future = it->second;
        } else {
            future = promise.get_future().share();
            in_flight_.emplace(key, future);
            owner = true;
        }
    }
    if (!owner) return future.get();

    try {
        std::string response = inner_->chat(prompt);
        cache_->put(key, response);
        promise.set_value(response);
    } catch (...) {
        promise.set_exception(std::current_exception());
    }
    {
        std::lock_guard lock(mu_);
        in_flight_.erase(key);
    }
    return future.get();
}

CachedEmbed::CachedEmbed(std::shared_ptr<EmbedEndpoint> inner, std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

std::vector<Embedding> CachedEmbed::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw std::invalid_argument("embed: no input texts");
    std::map<std::string, Embedding> resolved;
    std::vector<std::string> misses;
    for (const auto& t : texts) {
        if (resolved.contains(t) || std::find(misses.begin(), misses.end(), t) != misses.end()) continue;
        if (auto hit = cache_->get(ResponseCache::embed_key(inner_->spec(), t))) {
            resolved[t] = hit->get<Embedding>();
        } else {
            misses.push_back(t);
        }
    }
    if (!misses.empty()) {
        auto fresh = inner_->embed(misses);
        for (std::size_t i = 0; i < misses.size(); ++i) {
            cache_->put(ResponseCache::embed_key(inner_->spec(), misses[i]), fresh[i]);
            resolved[misses[i]] = std::move(fresh[i]);
        }
    }
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(resolved.at(t));
    return out;
}

// ---------------------------------------------------------------------------
// Mocks

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

MockRule make_rule(MockRule::Matcher matcher, std::string match, std::vector<std::string> responses, bool fail) {
    MockRule r;
    r.matcher = matcher;
    r.match = std::move(match);
    r.responses = std::move(responses);
    r.fail = fail;
    if (matcher == MockRule::Matcher::Pattern) r.pattern = std::regex(r.match, std::regex::ECMAScript);
    return r;
}

}  // namespace

bool MockRule::matches(std::string_view prompt) const {
    switch (matcher) {
        case Matcher::Exact: return prompt == match;
        case Matcher::Substring: return prompt.find(match) != std::string_view::npos;
        case Matcher::Pattern: return std::regex_search(prompt.begin(), prompt.end(), pattern);
    }
    return false;
}

MockScript& MockScript::exact(std::string prompt, std::string response) {
    rules.push_back(make_rule(MockRule::Matcher::Exact, std::move(prompt), {std::move(response)}, false));
    return *this;
}

MockScript& MockScript::substring(std::string needle, std::string response) {
    rules.push_back(make_rule(MockRule::Matcher::Substring, std::move(needle), {std::move(response)}, false));
    return *this;
}

MockScript& MockScript::pattern(std::string regex, std::string response) {
    rules.push_back(make_rule(MockRule::Matcher::Pattern, std::move(regex), {std::move(response)}, false));
    return *this;
}

MockScript& MockScript::failing(MockRule::Matcher matcher, std::string match) {
    rules.push_back(make_rule(matcher, std::move(match), {}, true));
    return *this;
}

MockScript MockScript::from_json(const json& j) {
    MockScript script;
    script.default_response = j.value("default", std::string());
    if (!j.contains("rules")) return script;
    int idx = 0;
    for (const auto& r : j.at("rules")) {
        const std::string where = "mock rule " + std::to_string(idx++);
        MockRule::Matcher matcher;
        std::string match;
        if (r.contains("exact")) {
            matcher = MockRule::Matcher::Exact;
            match = r["exact"].get<std::string>();
        } else if (r.contains("substring")) {
            matcher = MockRule::Matcher::Substring;
            match = r["substring"].get<std::string>();
        } else if (r.contains("pattern")) {
            matcher = MockRule::Matcher::Pattern;
            match = r["pattern"].get<std::string>();
        } else {
            throw std::invalid_argument(where + ": needs one of exact, substring, pattern");
        }
        std::vector<std::string> responses;
        if (r.contains("response")) responses.push_back(r["response"].get<std::string>());
        if (r.contains("responses")) {
            for (const auto& x : r["responses"]) responses.push_back(x.get<std::string>());
        }
        const bool fail = r.value("fail", false);
        if (responses.empty() && !fail) throw std::invalid_argument(where + ": needs a response");
        try {
            script.rules.push_back(make_rule(matcher, std::move(match), std::move(responses), fail));
        } catch (const std::regex_error& e) {
            throw std::invalid_argument(where + ": bad pattern: " + e.what());
        }
    }
    return script;
}

MockChat::MockChat(MockScript script, std::uint64_t seed, EndpointSpec spec)
    : script_(std::move(script)), seed_(seed), spec_(std::move(spec)) {
    spec_.kind = EndpointKind::Chat;
    spec_.provider = "mock";
    if (spec_.model_name.empty()) spec_.model_name = "mock";
}

std::string MockChat::chat(std::string_view prompt) {
    ++calls_;
    for (const auto& rule : script_.rules) {
        if (!rule.matches(prompt)) continue;
        if (rule.fail) throw EndpointError("mock: scripted failure for rule '" + rule.match + "'");
        if (rule.responses.size() == 1) return rule.responses.front();
        const auto pick = splitmix64(seed_ ^ fnv1a64(prompt)) % rule.responses.size();
        return rule.responses[pick];
    }
    return script_.default_response;
}

MockEmbed::MockEmbed(std::size_t dim, std::map<std::string, Embedding> fixed, EndpointSpec spec)
    : dim_(dim), fixed_(std::move(fixed)), spec_(std::move(spec)) {
    if (dim_ == 0) throw std::invalid_argument("MockEmbed: dimension must be positive");
    for (const auto& [text, v] : fixed_) {
        if (v.size() != dim_) throw std::invalid_argument("MockEmbed: vector for '" + text + "' has wrong dimension");
    }
    spec_.kind = EndpointKind::Embed;
    spec_.provider = "mock";
    spec_.mock_dim = dim_;
    if (spec_.model_name.empty()) spec_.model_name = "mock-embed";
}

Embedding MockEmbed::hashed(std::string_view input) const {
    Embedding v(dim_, 0.0);
    std::string token;
    auto flush = [&] {
        if (token.empty()) return;
        const auto h = fnv1a64(token);
        v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
        token.clear();
    };
    for (char c : input) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || u >= 0x80) {
            token.push_back(static_cast<char>(std::tolower(u)));
        } else {
            flush();
        }
    }
    flush();
    if (l2_norm(v) == 0.0) v[fnv1a64(input) % dim_] = 1.0;
    return v;
}

std::vector<Embedding> MockEmbed::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw std::invalid_argument("embed: no input texts");
    ++calls_;
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto it = fixed_.find(t);
        out.push_back(normalized(it != fixed_.end() ? it->second : hashed(t)));
    }
    return out;
}

std::shared_ptr<MockEmbed> MockEmbed::from_json(const json& j, EndpointSpec spec) {
    const auto dim = j.at("dim").get<std::size_t>();
    std::map<std::string, Embedding> fixed;
    if (j.contains("vectors")) {
        for (const auto& [text, v] : j.at("vectors").items()) fixed[text] = v.get<Embedding>();
    }
    return std::make_shared<MockEmbed>(dim, std::move(fixed), std::move(spec));
}

// ---------------------------------------------------------------------------
// Factories

std::shared_ptr<ChatEndpoint> make_chat(const EndpointSpec& spec, const ClientOptions& options) {
    std::shared_ptr<ChatEndpoint> endpoint;
    if (spec.provider == "mock") {
        MockScript script;
        if (!spec.mock_script.empty()) script = MockScript::from_json(json::parse(io::read_file(spec.mock_script)));
        endpoint = std::make_shared<MockChat>(std::move(script), options.seed, spec);
    } else if (spec.provider == "openai") {
        auto transport = options.transport ? options.transport : std::make_shared<HttplibTransport>();
        Clock& clock = options.clock ? *options.clock : SystemClock::instance();
        endpoint = std::make_shared<OpenAIChatClient>(spec, std::move(transport), clock);
    } else {
        throw std::invalid_argument("unknown chat provider '" + spec.provider + "'");
    }
    if (options.cache) endpoint = std::make_shared<CachedChat>(std::move(endpoint), options.cache, options.seed);
    return endpoint;
}

std::shared_ptr<EmbedEndpoint> make_embed(const EndpointSpec& spec, const ClientOptions& options) {
    std::shared_ptr<EmbedEndpoint> endpoint;
    if (spec.provider == "mock") {
        if (!spec.mock_script.empty()) {
            endpoint = MockEmbed::from_json(json::parse(io::read_file(spec.mock_script)), spec);
        } else {
            endpoint = std::make_shared<MockEmbed>(spec.mock_dim, std::map<std::string, Embedding>{}, spec);
        }
    } else if (spec.provider == "openai") {
        auto transport = options.transport ? options.transport : std::make_shared<HttplibTransport>();
        Clock& clock = options.clock ? *options.clock : SystemClock::instance();
        endpoint = std::make_shared<OpenAIEmbedClient>(spec, std::move(transport), clock);
    } else {
        throw std::invalid_argument("unknown embed provider '" + spec.provider + "'");
    }
    if (options.cache) endpoint = std::make_shared<CachedEmbed>(std::move(endpoint), options.cache);
    return endpoint;
}

EndpointSpec endpoint_from_json(const json& j, EndpointKind kind) {
    EndpointSpec s;
    s.kind = kind;
    s.provider = j.value("provider", std::string("openai"));
    s.base_url = j.value("base_url", std::string());
    s.model_name = j.value("model", std::string());
    s.temperature = j.value("temperature", 0.0);
    s.max_tokens = j.value("max_tokens", 512);
    s.timeout = std::chrono::milliseconds(j.value("timeout_ms", 60000));
    s.retries = j.value("retries", 3);
    s.rate_limit = j.value("rate_limit", 0.0);
    s.backoff_base = std::chrono::milliseconds(j.value("backoff_base_ms", 500));
    s.backoff_max = std::chrono::milliseconds(j.value("backoff_max_ms", 30000));
    s.batch_size = j.value("batch_size", std::size_t{32});
    s.api_key_env = j.value("api_key_env", std::string());
    s.mock_script = j.value("script", std::string());
    s.mock_dim = j.value("dim", std::size_t{64});
    if (s.temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");
    if (s.retries < 0) throw std::invalid_argument("retries must be >= 0");
    if (s.provider == "openai" && s.base_url.empty()) throw std::invalid_argument("base_url is required");
    return s;
}

}  // namespace kdcot::clients
