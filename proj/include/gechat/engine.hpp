#pragma once

#include "gechat/ask.hpp"
#include "gechat/config.hpp"
#include "gechat/eval.hpp"
#include "gechat/store.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace gechat {

/// The operations shared by the CLI and the HTTP service.
class Engine {
public:
    Engine(EngineConfig config, Providers providers, std::shared_ptr<Store> store);

    const EngineConfig& config() const noexcept { return config_; }
    const Providers& providers() const noexcept { return providers_; }
    Store& store() const noexcept { return *store_; }

    struct Ingested {
        DocId doc_id;
        bool created = false;
    };
    Ingested ingest(const Document& doc);

    Document document(const DocId& id) const;  // NotFound
    /// Chunks as the graph was built, or with the configured parameters when no graph exists.
    std::pair<std::vector<Chunk>, ChunkParams> chunks(const DocId& id) const;

    BuiltGraph build(const DocId& id, std::function<void(double)> progress = {});
    std::optional<BuiltGraph> graph(const DocId& id) const;

    /// NotFound, GraphNotBuilt, StageError.
    AskResponse ask(const DocId& id, const std::string& question, const AskParams& params, const Clock& clock) const;

    /// Evidence strings for a case: the engine's evidence spans in document order, or
    /// the predictions table when one is given. Documents resolve relative to `base_dir`.
    EvidencePipeline pipeline(std::filesystem::path base_dir,
                              std::optional<std::map<std::string, std::vector<std::string>>> predictions = {});

private:
    EngineConfig config_;
    Providers providers_;
    std::shared_ptr<Store> store_;
    std::mutex build_mu_;
};

}  // namespace gechat
