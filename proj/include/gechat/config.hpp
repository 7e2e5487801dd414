#pragma once

#include "gechat/evidence.hpp"
#include "gechat/ingest.hpp"
#include "gechat/kg.hpp"

#include <cstddef>
#include <filesystem>
#include <string>

namespace gechat {

/// Every tunable, with defaults matching the reference configuration (k = 2, alpha = beta = 0.5).
struct EngineConfig {
    ChunkParams chunking;
    std::vector<std::string> abbreviations = SegmenterOptions::default_abbreviations();
    bool split_on_blank_lines = true;

    std::size_t k = 2;
    double alpha = 0.5;
    double beta = 0.5;
    double tau = 0.80;
    double min_support = 0.5;
    std::size_t max_chunks_per_step = 6;
    std::size_t context_k = 8;
    LengthMode length_mode = LengthMode::pool_normalized;
    RelationStrategy relation_strategy = RelationStrategy::per_chunk;
    bool allow_negative_cosine = false;
    std::size_t parallelism = 4;

    std::filesystem::path data_dir = "gechat-data";
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t workers = 2;
    std::size_t max_upload_bytes = 20u * 1024u * 1024u;
    bool request_log = true;
    /// Report zero stage timings so responses are byte-reproducible.
    bool frozen_clock = false;

    SegmenterOptions segmenter() const { return {abbreviations, split_on_blank_lines}; }
};

/// Keys mirror the struct fields; unknown keys are rejected with ConfigError.
EngineConfig config_from_json(const nlohmann::json& j);
EngineConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const EngineConfig& c);

/// Defaults, then the file named by GECHAT_CONFIG when set, then GECHAT_DATA_DIR.
EngineConfig config_from_env();

const char* to_string(LengthMode m) noexcept;
const char* to_string(RelationStrategy s) noexcept;

}  // namespace gechat
