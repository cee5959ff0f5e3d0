#pragma once

// Provider implementations: a scripted mock for tests and demos, and an HTTP
// client for chat-completion endpoints.

#include <promoai/llm.hpp>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace promoai {

/// Returns scripted responses in order. A script entry is either a string
/// (the response text) or {"error": "..."} to simulate a provider failure.
class MockProvider : public Provider {
  public:
    struct Entry {
        std::string text;
        bool error = false;
    };

    explicit MockProvider(std::vector<Entry> script) : script_(std::move(script)) {}

    static MockProvider from_responses(const std::vector<std::string>& responses) {
        std::vector<Entry> script;
        for (const auto& r : responses) script.push_back({r, false});
        return MockProvider(std::move(script));
    }

    static std::vector<Entry> parse_script(const nlohmann::json& doc) {
        if (!doc.is_array()) throw std::runtime_error("mock script must be a JSON array");
        std::vector<Entry> script;
        for (const auto& item : doc) {
            if (item.is_string()) {
                script.push_back({item.get<std::string>(), false});
            } else if (item.is_object() && item.contains("error")) {
                script.push_back({item.at("error").get<std::string>(), true});
            } else {
                throw std::runtime_error("mock script entries must be strings or {\"error\": text} objects");
            }
        }
        return script;
    }

    static std::vector<Entry> read_script(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read mock script " + path.string());
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("mock script " + path.string() + " is not valid JSON: " + e.what());
        }
        return parse_script(doc);
    }

    std::string complete(const std::vector<Message>& messages, const ProviderConfig&) override {
        std::lock_guard lock(mutex_);
        calls_.push_back(messages);
        if (next_ >= script_.size()) throw ProviderError("mock provider script exhausted after " + std::to_string(next_) + " responses");
        const auto& e = script_[next_++];
        if (e.error) throw ProviderError(e.text);
        return e.text;
    }

    [[nodiscard]] std::size_t calls() const {
        std::lock_guard lock(mutex_);
        return calls_.size();
    }
    [[nodiscard]] std::vector<Message> call(std::size_t i) const {
        std::lock_guard lock(mutex_);
        return calls_.at(i);
    }
    [[nodiscard]] std::size_t remaining() const {
        std::lock_guard lock(mutex_);
        return script_.size() - next_;
    }

  private:
    mutable std::mutex mutex_;
    std::vector<Entry> script_;
    std::size_t next_ = 0;
    std::vector<std::vector<Message>> calls_;
};

namespace detail {

struct EndpointParts {
    std::string base;  // scheme://host[:port]
    std::string path;
};

inline EndpointParts split_endpoint(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/?#]+)(/[^#]*)?$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ProviderError("endpoint '" + url + "' is not an http(s) URL");
    return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

inline std::string redact(std::string text, const std::string& secret) {
    if (secret.empty()) return text;
    for (auto at = text.find(secret); at != std::string::npos; at = text.find(secret, at)) {
        text.replace(at, secret.size(), "[redacted]");
    }
    return text;
}

}  // namespace detail

/// Chat-completions client: POSTs {model, messages, temperature} with a
/// bearer token read from the environment variable named by api_key_ref,
/// and returns choices[0].message.content. Transport failures, 429 and 5xx
/// responses are retried up to max_retries_transport times.
class HttpChatProvider : public Provider {
  public:
    std::string complete(const std::vector<Message>& messages, const ProviderConfig& config) override {
        const auto parts = detail::split_endpoint(config.endpoint);
        std::string key;
        if (!config.api_key_ref.empty()) {
            const char* value = std::getenv(config.api_key_ref.c_str());
            if (!value || !*value) {
                throw ProviderError("environment variable " + config.api_key_ref + " holding the API key is not set");
            }
            key = value;
        }
        nlohmann::json body{{"model", config.model_name}, {"temperature", config.temperature}};
        body["messages"] = nlohmann::json::array();
        for (const auto& m : messages) body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
        const auto payload = body.dump();

        httplib::Client client(parts.base);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        httplib::Headers headers;
        if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

        std::string last_error;
        int last_status = 0;
        for (std::size_t attempt = 0; attempt <= config.max_retries_transport; ++attempt) {
            if (attempt > 0) std::this_thread::sleep_for(config.retry_backoff * (1u << std::min<std::size_t>(attempt - 1, 6)));
            auto res = client.Post(parts.path, headers, payload, "application/json");
            if (!res) {
                last_error = "transport failure: " + httplib::to_string(res.error());
                last_status = 0;
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "endpoint returned HTTP " + std::to_string(res->status);
                last_status = res->status;
                continue;
            }
            if (res->status != 200) {
                throw ProviderError(detail::redact("endpoint returned HTTP " + std::to_string(res->status) + ": " +
                                                       res->body.substr(0, 500),
                                                   key),
                                    res->status);
            }
            return content_of(res->body, key);
        }
        throw ProviderError(detail::redact(last_error + " after " + std::to_string(config.max_retries_transport + 1) +
                                               " attempts",
                                           key),
                            last_status);
    }

  private:
    static std::string content_of(const std::string& body, const std::string& key) {
        try {
            const auto doc = nlohmann::json::parse(body);
            const auto& content = doc.at("choices").at(0).at("message").at("content");
            if (!content.is_string()) throw ProviderError("response message content is not text");
            return content.get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(detail::redact(std::string("unexpected response body: ") + e.what(), key), 200);
        }
    }
};

}  // namespace promoai
