#include "gechat/config.hpp"

#include "gechat/errors.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace gechat {

const char* to_string(LengthMode m) noexcept {
    return m == LengthMode::chars_raw ? "chars_raw" : "pool_normalized";
}

const char* to_string(RelationStrategy s) noexcept {
    return s == RelationStrategy::global_pairs ? "global_pairs" : "per_chunk";
}

nlohmann::json config_to_json(const EngineConfig& c) {
    return {{"chunk_size", c.chunking.chunk_size},
            {"chunk_overlap", c.chunking.overlap},
            {"abbreviations", c.abbreviations},
            {"split_on_blank_lines", c.split_on_blank_lines},
            {"k", c.k},
            {"alpha", c.alpha},
            {"beta", c.beta},
            {"tau", c.tau},
            {"min_support", c.min_support},
            {"max_chunks_per_step", c.max_chunks_per_step},
            {"context_k", c.context_k},
            {"length_mode", to_string(c.length_mode)},
            {"relation_strategy", to_string(c.relation_strategy)},
            {"allow_negative_cosine", c.allow_negative_cosine},
            {"parallelism", c.parallelism},
            {"data_dir", c.data_dir.string()},
            {"host", c.host},
            {"port", c.port},
            {"workers", c.workers},
            {"max_upload_bytes", c.max_upload_bytes},
            {"request_log", c.request_log},
            {"frozen_clock", c.frozen_clock}};
}

EngineConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    EngineConfig c;
    const auto known = config_to_json(c);
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    }
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
        };
        get("chunk_size", c.chunking.chunk_size);
        get("chunk_overlap", c.chunking.overlap);
        get("abbreviations", c.abbreviations);
        get("split_on_blank_lines", c.split_on_blank_lines);
        get("k", c.k);
        get("alpha", c.alpha);
        get("beta", c.beta);
        get("tau", c.tau);
        get("min_support", c.min_support);
        get("max_chunks_per_step", c.max_chunks_per_step);
        get("context_k", c.context_k);
        get("allow_negative_cosine", c.allow_negative_cosine);
        get("parallelism", c.parallelism);
        get("host", c.host);
        get("port", c.port);
        get("workers", c.workers);
        get("max_upload_bytes", c.max_upload_bytes);
        get("request_log", c.request_log);
        get("frozen_clock", c.frozen_clock);
        if (j.contains("data_dir")) c.data_dir = j["data_dir"].get<std::string>();
        if (j.contains("length_mode")) {
            const auto m = j["length_mode"].get<std::string>();
            if (m == "pool_normalized") c.length_mode = LengthMode::pool_normalized;
            else if (m == "chars_raw") c.length_mode = LengthMode::chars_raw;
            else throw ConfigError("length_mode must be pool_normalized or chars_raw");
        }
        if (j.contains("relation_strategy")) {
            const auto s = j["relation_strategy"].get<std::string>();
            if (s == "per_chunk") c.relation_strategy = RelationStrategy::per_chunk;
            else if (s == "global_pairs") c.relation_strategy = RelationStrategy::global_pairs;
            else throw ConfigError("relation_strategy must be per_chunk or global_pairs");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    if (c.chunking.chunk_size == 0 || c.chunking.overlap >= c.chunking.chunk_size) {
        throw ConfigError("chunk_overlap must be smaller than a positive chunk_size");
    }
    if (c.workers == 0) throw ConfigError("workers must be positive");
    return c;
}

EngineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
        return config_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
}

EngineConfig config_from_env() {
    EngineConfig c;
    if (const char* p = std::getenv("GECHAT_CONFIG"); p && *p) c = load_config(p);
    if (const char* d = std::getenv("GECHAT_DATA_DIR"); d && *d) c.data_dir = d;
    return c;
}

}  // namespace gechat
