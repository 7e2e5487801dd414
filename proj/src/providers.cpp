#include "gechat/providers.hpp"

#include "gechat/errors.hpp"
#include "gechat/text.hpp"

#include "httplib.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

namespace gechat {

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw PreconditionViolation("cosine of vectors with different dimensions");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / std::sqrt(aa * bb);
}

void l2_normalize(Embedding& v) {
    double sq = 0.0;
    for (double x : v) sq += x * x;
    if (sq == 0.0) return;
    const double norm = std::sqrt(sq);
    for (double& x : v) x /= norm;
}

// ---------------------------------------------------------------------------

std::chrono::milliseconds RetryPolicy::delay_before_retry(int retry_index) const {
    const double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, retry_index);
    return std::chrono::milliseconds(static_cast<long long>(ms));
}

void ProviderConfig::validate() const {
    if (!(timeout_seconds > 0.0)) throw ConfigError("provider timeout must be positive");
    if (retry.max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (retry.multiplier < 1.0) throw ConfigError("backoff multiplier must be >= 1");
    if (endpoint.empty()) throw ConfigError("provider endpoint is empty");
    if (!endpoint.starts_with("http://") && !endpoint.starts_with("https://")) {
        throw ConfigError("provider endpoint must be an http(s) URL: " + endpoint);
    }
}

namespace {

class HttplibTransport final : public HttpTransport {
public:
    HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers,
                      double timeout_seconds) const override {
        // split "scheme://host[:port]" from the path
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) {
            throw ProviderError(ProviderErrorKind::permanent, "endpoint is not an absolute URL: " + url);
        }
        const auto path_start = url.find('/', scheme_end + 3);
        const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

        httplib::Client client(origin);
        const auto sec = static_cast<time_t>(timeout_seconds);
        const auto usec = static_cast<time_t>((timeout_seconds - static_cast<double>(sec)) * 1e6);
        client.set_connection_timeout(sec, usec);
        client.set_read_timeout(sec, usec);
        client.set_write_timeout(sec, usec);
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto res = client.Post(path, h, body, "application/json");
        if (!res) {
            const auto err = res.error();
            const std::string what = "POST " + url + ": " + httplib::to_string(err);
            if (err == httplib::Error::Read || err == httplib::Error::Write ||
                err == httplib::Error::ConnectionTimeout) {
                throw TimeoutError(what);
            }
            throw ProviderError(ProviderErrorKind::transient, what);
        }
        return {res->status, res->body};
    }
};

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

std::string kind_name(ProviderKind k) {
    switch (k) {
        case ProviderKind::chat: return "chat";
        case ProviderKind::embed: return "embed";
        case ProviderKind::nli: return "nli";
    }
    return "?";
}

}  // namespace

std::shared_ptr<const HttpTransport> make_httplib_transport() { return std::make_shared<HttplibTransport>(); }

Sleeper real_sleeper() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

JsonEndpoint::JsonEndpoint(ProviderConfig config, std::shared_ptr<const HttpTransport> transport, Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
    config_.validate();
}

nlohmann::json JsonEndpoint::post(const nlohmann::json& request) const {
    const std::string body = request.dump();
    HttpHeaders headers{{"Accept", "application/json"}};
    if (!config_.auth_env.empty()) {
        if (const char* key = std::getenv(config_.auth_env.c_str()); key && *key) {
            headers.emplace_back("Authorization", std::string("Bearer ") + key);
        }
    }
    const std::string who = kind_name(config_.kind) + " provider " + config_.endpoint;
    for (int attempt = 0;; ++attempt) {
        const bool last = attempt >= config_.retry.max_retries;
        try {
            const HttpResponse res = transport_->post(config_.endpoint, body, headers, config_.timeout_seconds);
            if (res.status >= 200 && res.status < 300) {
                try {
                    return nlohmann::json::parse(res.body);
                } catch (const nlohmann::json::exception& e) {
                    throw ProviderError(ProviderErrorKind::permanent, who + ": unparsable reply: " + e.what());
                }
            }
            const std::string what = who + ": HTTP " + std::to_string(res.status);
            if (!transient_status(res.status)) throw ProviderError(ProviderErrorKind::permanent, what);
            if (last) throw ProviderError(ProviderErrorKind::transient, what + " after " +
                                                                        std::to_string(attempt + 1) + " attempts");
        } catch (const ProviderError& e) {
            if (!e.transient() || last) throw;
        }
        sleeper_(config_.retry.delay_before_retry(attempt));
    }
}

std::string RemoteChat::chat(const std::string& prompt) const {
    if (prompt.empty()) throw PreconditionViolation("chat prompt is empty");
    nlohmann::json req = {{"messages", {{{"role", "user"}, {"content", prompt}}}}, {"temperature", 0}};
    if (!endpoint_.config().model.empty()) req["model"] = endpoint_.config().model;
    const auto res = endpoint_.post(req);
    try {
        return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(ProviderErrorKind::permanent, std::string("chat reply missing content: ") + e.what());
    }
}

std::string RemoteChat::name() const {
    return "remote-chat:" + (endpoint_.config().model.empty() ? endpoint_.config().endpoint : endpoint_.config().model);
}

std::vector<Embedding> RemoteEmbedding::embed(const std::vector<std::string>& texts) const {
    if (texts.empty()) return {};
    for (const auto& t : texts) {
        if (t.empty()) throw PreconditionViolation("cannot embed empty text");
    }
    nlohmann::json req = {{"input", texts}};
    if (!endpoint_.config().model.empty()) req["model"] = endpoint_.config().model;
    const auto res = endpoint_.post(req);
    std::vector<Embedding> out(texts.size());
    try {
        const auto& data = res.at("data");
        if (data.size() != texts.size()) {
            throw ProviderError(ProviderErrorKind::permanent, "embedding count does not match input count");
        }
        for (std::size_t i = 0; i < data.size(); ++i) {
            const std::size_t slot = data[i].contains("index") ? data[i]["index"].get<std::size_t>() : i;
            if (slot >= out.size()) throw ProviderError(ProviderErrorKind::permanent, "embedding index out of range");
            out[slot] = data[i].at("embedding").get<Embedding>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(ProviderErrorKind::permanent, std::string("malformed embedding reply: ") + e.what());
    }
    std::lock_guard lock(mu_);
    for (auto& v : out) {
        if (v.empty() || std::any_of(v.begin(), v.end(), [](double x) { return !std::isfinite(x); })) {
            throw ProviderError(ProviderErrorKind::permanent, "embedding is empty or non-finite");
        }
        if (dim_ == 0) dim_ = v.size();
        if (v.size() != dim_) throw ProviderError(ProviderErrorKind::permanent, "embedding dimension changed");
        l2_normalize(v);
    }
    return out;
}

std::string RemoteEmbedding::name() const {
    return "remote-embed:" +
           (endpoint_.config().model.empty() ? endpoint_.config().endpoint : endpoint_.config().model);
}

NliLogits RemoteNli::nli_logits(const std::string& premise, const std::string& hypothesis) const {
    if (premise.empty() || hypothesis.empty()) throw PreconditionViolation("NLI inputs must be non-empty");
    nlohmann::json req = {{"premise", premise}, {"hypothesis", hypothesis}};
    if (!endpoint_.config().model.empty()) req["model"] = endpoint_.config().model;
    const auto res = endpoint_.post(req);
    std::vector<double> logits;
    try {
        const auto& arr = res.at("logits");
        if (!arr.is_array() || arr.size() != 3) throw ProviderError(ProviderErrorKind::permanent, "expected 3 logits");
        for (const auto& x : arr) {
            if (!x.is_number()) throw ProviderError(ProviderErrorKind::permanent, "non-numeric logit");
            logits.push_back(x.get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(ProviderErrorKind::permanent, std::string("malformed NLI reply: ") + e.what());
    }
    for (double x : logits) {
        if (!std::isfinite(x)) throw ProviderError(ProviderErrorKind::permanent, "non-finite NLI logit");
    }
    return {logits[0], logits[1], logits[2]};
}

std::string RemoteNli::name() const {
    return "remote-nli:" + (endpoint_.config().model.empty() ? endpoint_.config().endpoint : endpoint_.config().model);
}

// ---------------------------------------------------------------------------

void CallLog::record(std::string request) {
    std::lock_guard lock(mu_);
    requests_.push_back(std::move(request));
}

std::size_t CallLog::count() const {
    std::lock_guard lock(mu_);
    return requests_.size();
}

std::size_t CallLog::count_containing(std::string_view needle) const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(std::count_if(requests_.begin(), requests_.end(), [&](const std::string& r) {
        return r.find(needle) != std::string::npos;
    }));
}

std::vector<std::string> CallLog::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

void CallLog::clear() {
    std::lock_guard lock(mu_);
    requests_.clear();
}

std::string request_fingerprint(std::string_view request) { return text::hex64(text::fnv1a64(request)); }

void ScriptedChat::add_exact(std::string_view prompt, std::string reply) {
    exact_[request_fingerprint(prompt)] = std::move(reply);
}

void ScriptedChat::add_rule(ChatRule rule) { rules_.push_back(std::move(rule)); }

std::string ScriptedChat::chat(const std::string& prompt) const {
    log_.record(prompt);
    const std::string fp = request_fingerprint(prompt);
    if (auto it = exact_.find(fp); it != exact_.end()) return it->second;
    for (const auto& rule : rules_) {
        const bool hit = std::all_of(rule.all_of.begin(), rule.all_of.end(), [&](const std::string& needle) {
            return prompt.find(needle) != std::string::npos;
        });
        if (hit) return rule.reply;
    }
    throw MockMiss("chat prompt " + fp);
}

std::shared_ptr<ScriptedChat> ScriptedChat::from_json(const nlohmann::json& j) {
    auto chat = std::make_shared<ScriptedChat>();
    if (j.contains("exact")) {
        for (const auto& [prompt, reply] : j["exact"].items()) chat->add_exact(prompt, reply.get<std::string>());
    }
    if (j.contains("fingerprints")) {
        for (const auto& [fp, reply] : j["fingerprints"].items()) chat->exact_[fp] = reply.get<std::string>();
    }
    if (j.contains("rules")) {
        for (const auto& r : j["rules"]) {
            chat->add_rule({r.at("all_of").get<std::vector<std::string>>(), r.at("reply").get<std::string>()});
        }
    }
    return chat;
}

std::vector<Embedding> HashingEmbedding::embed(const std::vector<std::string>& texts) const {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        if (t.empty()) throw PreconditionViolation("cannot embed empty text");
        log_.record(t);
        Embedding v(dim_, 0.0);
        for (const auto& tok : text::word_tokens(t)) {
            const std::uint64_t h = text::fnv1a64(tok);
            v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
        }
        l2_normalize(v);
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<Embedding> ScriptedEmbedding::embed(const std::vector<std::string>& texts) const {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        log_.record(t);
        if (auto it = table_.find(t); it != table_.end()) {
            Embedding v = it->second;
            l2_normalize(v);
            out.push_back(std::move(v));
        } else if (fallback_) {
            out.push_back(fallback_->embed({t}).front());
        } else {
            throw MockMiss("embedding for text " + request_fingerprint(t));
        }
    }
    return out;
}

void ScriptedNli::add_pair(std::string premise, std::string hypothesis, NliLogits logits) {
    pairs_[{std::move(premise), std::move(hypothesis)}] = logits;
}

NliLogits ScriptedNli::nli_logits(const std::string& premise, const std::string& hypothesis) const {
    log_.record(premise + "\n=>\n" + hypothesis);
    if (auto it = pairs_.find({premise, hypothesis}); it != pairs_.end()) return it->second;
    switch (fallback_) {
        case NliFallback::none:
            break;
        case NliFallback::containment:
            if (text::normalize(premise).find(text::normalize(hypothesis)) != std::string::npos) return {-2, 0, 3};
            return {0, 2, -1};
        case NliFallback::token_overlap: {
            const auto ptoks = text::word_tokens(premise);
            const std::set<std::string> have(ptoks.begin(), ptoks.end());
            const auto htoks = text::word_tokens(hypothesis);
            const std::set<std::string> want(htoks.begin(), htoks.end());
            if (want.empty()) return {0, 1, -1};
            std::size_t hit = 0;
            for (const auto& w : want) hit += have.count(w);
            const double f = static_cast<double>(hit) / static_cast<double>(want.size());
            return {-2.0 * f, 1.0 - f, 4.0 * f - 1.0};
        }
    }
    throw MockMiss("NLI pair " + request_fingerprint(premise + "\n=>\n" + hypothesis));
}

std::string ScriptedNli::name() const {
    switch (fallback_) {
        case NliFallback::containment: return "scripted-nli/containment";
        case NliFallback::token_overlap: return "scripted-nli/token-overlap";
        default: return "scripted-nli";
    }
}

std::shared_ptr<ScriptedNli> ScriptedNli::from_json(const nlohmann::json& j) {
    NliFallback fb = NliFallback::token_overlap;
    if (j.contains("fallback")) {
        const auto s = j["fallback"].get<std::string>();
        if (s == "none") fb = NliFallback::none;
        else if (s == "containment") fb = NliFallback::containment;
        else if (s == "token_overlap") fb = NliFallback::token_overlap;
        else throw ConfigError("unknown NLI fallback '" + s + "'");
    }
    auto nli = std::make_shared<ScriptedNli>(fb);
    if (j.contains("pairs")) {
        for (const auto& p : j["pairs"]) {
            const auto l = p.at("logits").get<std::vector<double>>();
            if (l.size() != 3) throw ConfigError("NLI pair needs 3 logits");
            nli->add_pair(p.at("premise").get<std::string>(), p.at("hypothesis").get<std::string>(),
                          {l[0], l[1], l[2]});
        }
    }
    return nli;
}

Providers mock_providers_from_script(const nlohmann::json& script) {
    Providers p;
    p.chat = ScriptedChat::from_json(script.value("chat", nlohmann::json::object()));
    const auto embed = script.value("embed", nlohmann::json::object());
    p.embed = std::make_shared<HashingEmbedding>(embed.value("dim", std::size_t{256}));
    p.nli = ScriptedNli::from_json(script.value("nli", nlohmann::json::object()));
    return p;
}

namespace {

std::string env_or(const char* name, std::string fallback = {}) {
    const char* v = std::getenv(name);
    return (v && *v) ? std::string(v) : std::move(fallback);
}

ProviderConfig remote_config(ProviderKind kind, const char* endpoint_var, const char* model_var) {
    ProviderConfig c;
    c.kind = kind;
    c.endpoint = env_or(endpoint_var);
    if (c.endpoint.empty()) throw ConfigError(std::string(endpoint_var) + " is not set");
    c.model = env_or(model_var);
    return c;
}

}  // namespace

Providers providers_from_env() {
    const std::string mode = env_or("GECHAT_PROVIDER", "remote");
    if (mode == "mock") {
        const std::string path = env_or("GECHAT_MOCK_SCRIPT");
        if (path.empty()) return mock_providers_from_script(nlohmann::json::object());
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open mock script " + path);
        try {
            return mock_providers_from_script(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad mock script " + path + ": " + e.what());
        }
    }
    if (mode != "remote") throw ConfigError("GECHAT_PROVIDER must be 'remote' or 'mock', got '" + mode + "'");
    auto transport = make_httplib_transport();
    Providers p;
    p.chat = std::make_shared<RemoteChat>(
        JsonEndpoint(remote_config(ProviderKind::chat, "GECHAT_CHAT_ENDPOINT", "GECHAT_CHAT_MODEL"), transport));
    p.embed = std::make_shared<RemoteEmbedding>(
        JsonEndpoint(remote_config(ProviderKind::embed, "GECHAT_EMBED_ENDPOINT", "GECHAT_EMBED_MODEL"), transport));
    p.nli = std::make_shared<RemoteNli>(
        JsonEndpoint(remote_config(ProviderKind::nli, "GECHAT_NLI_ENDPOINT", "GECHAT_NLI_MODEL"), transport));
    return p;
}

}  // namespace gechat
