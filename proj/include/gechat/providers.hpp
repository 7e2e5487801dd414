#pragma once

#include "json.hpp"

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gechat {

using Embedding = std::vector<double>;

/// Three-way NLI scores in (contradiction, neutral, entailment) order.
struct NliLogits {
    double contradiction = 0.0;
    double neutral = 0.0;
    double entailment = 0.0;

    friend bool operator==(const NliLogits&, const NliLogits&) = default;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string chat(const std::string& prompt) const = 0;
    virtual std::string name() const = 0;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    /// One unit vector per input.
    virtual std::vector<Embedding> embed(const std::vector<std::string>& texts) const = 0;
    virtual std::string name() const = 0;
};

class NliProvider {
public:
    virtual ~NliProvider() = default;
    virtual NliLogits nli_logits(const std::string& premise, const std::string& hypothesis) const = 0;
    virtual std::string name() const = 0;
};

struct Providers {
    std::shared_ptr<const ChatProvider> chat;
    std::shared_ptr<const EmbeddingProvider> embed;
    std::shared_ptr<const NliProvider> nli;
};

/// a·b / sqrt((a·a)(b·b)); 0 when either vector is zero. Identical vectors give exactly 1.
double cosine(std::span<const double> a, std::span<const double> b);

void l2_normalize(Embedding& v);

// ---------------------------------------------------------------------------
// Remote clients

enum class ProviderKind { chat, embed, nli };

struct RetryPolicy {
    int max_retries = 2;
    std::chrono::milliseconds initial_backoff{250};
    double multiplier = 2.0;

    std::chrono::milliseconds delay_before_retry(int retry_index) const;
};

struct ProviderConfig {
    ProviderKind kind = ProviderKind::chat;
    std::string endpoint;
    /// Name of the environment variable holding the bearer token. Never the token itself.
    std::string auth_env = "GECHAT_API_KEY";
    std::string model;
    double timeout_seconds = 60.0;
    RetryPolicy retry;

    void validate() const;
};

struct HttpResponse {
    int status = 0;
    std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// Single POST attempt. Transport failures throw ProviderError / TimeoutError.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers,
                              double timeout_seconds) const = 0;
};

std::shared_ptr<const HttpTransport> make_httplib_transport();

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper real_sleeper();

/// POSTs JSON with retries on 429, 5xx, timeouts and connection failures.
/// Every attempt sends the identical serialized body.
class JsonEndpoint {
public:
    JsonEndpoint(ProviderConfig config, std::shared_ptr<const HttpTransport> transport, Sleeper sleeper = real_sleeper());

    nlohmann::json post(const nlohmann::json& request) const;
    const ProviderConfig& config() const noexcept { return config_; }

private:
    ProviderConfig config_;
    std::shared_ptr<const HttpTransport> transport_;
    Sleeper sleeper_;
};

/// OpenAI-style chat completions: {"model","messages":[{"role":"user","content"}]}.
class RemoteChat final : public ChatProvider {
public:
    explicit RemoteChat(JsonEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::string chat(const std::string& prompt) const override;
    std::string name() const override;

private:
    JsonEndpoint endpoint_;
};

/// OpenAI-style embeddings: {"model","input":[...]} -> {"data":[{"embedding":[...]}]}.
class RemoteEmbedding final : public EmbeddingProvider {
public:
    explicit RemoteEmbedding(JsonEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    std::vector<Embedding> embed(const std::vector<std::string>& texts) const override;
    std::string name() const override;

private:
    JsonEndpoint endpoint_;
    mutable std::mutex mu_;
    mutable std::size_t dim_ = 0;
};

/// {"premise","hypothesis"} -> {"logits":[contradiction, neutral, entailment]}.
class RemoteNli final : public NliProvider {
public:
    explicit RemoteNli(JsonEndpoint endpoint) : endpoint_(std::move(endpoint)) {}
    NliLogits nli_logits(const std::string& premise, const std::string& hypothesis) const override;
    std::string name() const override;

private:
    JsonEndpoint endpoint_;
};

// ---------------------------------------------------------------------------
// Deterministic mocks

/// Thread-safe record of requests a mock has seen.
class CallLog {
public:
    void record(std::string request);
    std::size_t count() const;
    std::size_t count_containing(std::string_view needle) const;
    std::vector<std::string> requests() const;
    void clear();

private:
    mutable std::mutex mu_;
    std::vector<std::string> requests_;
};

std::string request_fingerprint(std::string_view request);

struct ChatRule {
    std::vector<std::string> all_of;  // every needle must occur in the prompt
    std::string reply;
};

/// Exact fingerprint lookup first, then the first rule whose needles all match.
/// Anything else is a MockMiss.
class ScriptedChat final : public ChatProvider {
public:
    ScriptedChat() = default;
    ScriptedChat(std::map<std::string, std::string> exact, std::vector<ChatRule> rules)
        : exact_(std::move(exact)), rules_(std::move(rules)) {}

    void add_exact(std::string_view prompt, std::string reply);
    void add_rule(ChatRule rule);

    std::string chat(const std::string& prompt) const override;
    std::string name() const override { return "scripted-chat"; }
    const CallLog& call_log() const noexcept { return log_; }

    static std::shared_ptr<ScriptedChat> from_json(const nlohmann::json& j);

private:
    std::map<std::string, std::string> exact_;  // fingerprint -> reply
    std::vector<ChatRule> rules_;
    mutable CallLog log_;
};

/// Signed feature hashing over lowercased word tokens, L2-normalized.
class HashingEmbedding final : public EmbeddingProvider {
public:
    explicit HashingEmbedding(std::size_t dim = 256) : dim_(dim) {}
    std::vector<Embedding> embed(const std::vector<std::string>& texts) const override;
    std::string name() const override { return "hashing-" + std::to_string(dim_); }
    const CallLog& call_log() const noexcept { return log_; }

private:
    std::size_t dim_;
    mutable CallLog log_;
};

/// Exact text -> vector table, with an optional fallback embedder.
class ScriptedEmbedding final : public EmbeddingProvider {
public:
    explicit ScriptedEmbedding(std::map<std::string, Embedding> table,
                               std::shared_ptr<const EmbeddingProvider> fallback = nullptr)
        : table_(std::move(table)), fallback_(std::move(fallback)) {}
    std::vector<Embedding> embed(const std::vector<std::string>& texts) const override;
    std::string name() const override { return "scripted-embed"; }
    const CallLog& call_log() const noexcept { return log_; }

private:
    std::map<std::string, Embedding> table_;
    std::shared_ptr<const EmbeddingProvider> fallback_;
    mutable CallLog log_;
};

enum class NliFallback {
    none,           // unmatched pair -> MockMiss
    containment,    // premise contains hypothesis -> (-2, 0, 3), else (0, 2, -1)
    token_overlap,  // f = share of hypothesis tokens in premise -> (-2f, 1 - f, 4f - 1)
};

class ScriptedNli final : public NliProvider {
public:
    explicit ScriptedNli(NliFallback fallback = NliFallback::none) : fallback_(fallback) {}

    void add_pair(std::string premise, std::string hypothesis, NliLogits logits);

    NliLogits nli_logits(const std::string& premise, const std::string& hypothesis) const override;
    std::string name() const override;
    const CallLog& call_log() const noexcept { return log_; }

    static std::shared_ptr<ScriptedNli> from_json(const nlohmann::json& j);

private:
    std::map<std::pair<std::string, std::string>, NliLogits> pairs_;
    NliFallback fallback_;
    mutable CallLog log_;
};

/// Mock bundle described by a script: {"chat":{...}, "embed":{"dim":N}, "nli":{...}}.
Providers mock_providers_from_script(const nlohmann::json& script);

/// GECHAT_PROVIDER=remote|mock (default remote). Remote uses GECHAT_{CHAT,EMBED,NLI}_ENDPOINT
/// and GECHAT_API_KEY; mock reads the optional script at GECHAT_MOCK_SCRIPT.
Providers providers_from_env();

}  // namespace gechat
