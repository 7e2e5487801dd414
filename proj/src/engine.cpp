#include "gechat/engine.hpp"

#include "gechat/errors.hpp"

#include <algorithm>
#include <set>

namespace gechat {

Engine::Engine(EngineConfig config, Providers providers, std::shared_ptr<Store> store)
    : config_(std::move(config)), providers_(std::move(providers)), store_(std::move(store)) {}

Engine::Ingested Engine::ingest(const Document& doc) {
    if (auto existing = store_->get_document(doc.doc_id())) return {doc.doc_id(), false};
    store_->put_document(doc);
    return {doc.doc_id(), true};
}

Document Engine::document(const DocId& id) const {
    auto doc = store_->get_document(id);
    if (!doc) throw NotFound("unknown document " + id);
    return std::move(*doc);
}

std::pair<std::vector<Chunk>, ChunkParams> Engine::chunks(const DocId& id) const {
    const Document doc = document(id);
    ChunkParams params = config_.chunking;
    if (auto g = store_->get_graph(id)) params = g->chunking;
    return {chunk_document(doc, params), params};
}

BuiltGraph Engine::build(const DocId& id, std::function<void(double)> progress) {
    const Document doc = document(id);
    const auto chunks = chunk_document(doc, config_.chunking);
    BuildOptions opts;
    opts.relation_strategy = config_.relation_strategy;
    opts.parallelism = config_.parallelism;
    if (progress) {
        opts.on_progress = [progress](std::size_t done, std::size_t total) {
            progress(total ? static_cast<double>(done) / static_cast<double>(total) : 1.0);
        };
    }
    if (!providers_.chat) throw ConfigError("no chat provider configured");
    auto [g, stats] = build_graph(doc, chunks, *providers_.chat, opts);
    BuiltGraph built{std::move(g), std::move(stats), config_.chunking};
    store_->put_graph(id, built);
    return built;
}

std::optional<BuiltGraph> Engine::graph(const DocId& id) const { return store_->get_graph(id); }

AskResponse Engine::ask(const DocId& id, const std::string& question, const AskParams& params,
                        const Clock& clock) const {
    const Document doc = document(id);
    auto built = store_->get_graph(id);
    if (!built) throw GraphNotBuilt("graph for document " + id + " has not been built");
    const auto chunks = chunk_document(doc, built->chunking);
    return ask_question(doc, chunks, built->graph, question, providers_, params, config_.segmenter(), clock);
}

EvidencePipeline Engine::pipeline(std::filesystem::path base_dir,
                                  std::optional<std::map<std::string, std::vector<std::string>>> predictions) {
    if (predictions) {
        return [table = std::move(*predictions)](const EvalCase& c) {
            auto it = table.find(c.case_id);
            if (it == table.end()) throw NotFound("no prediction for case " + c.case_id);
            return it->second;
        };
    }
    return [this, base_dir = std::move(base_dir)](const EvalCase& c) {
        std::filesystem::path ref = c.document_ref;
        if (ref.is_relative()) ref = base_dir / ref;
        const Document doc = load_document_file(ref);
        ingest(doc);
        {
            // one build per document even when cases run concurrently
            std::lock_guard lock(build_mu_);
            if (!store_->get_graph(doc.doc_id())) build(doc.doc_id());
        }
        const auto r = ask(doc.doc_id(), c.question, ask_params(config_), frozen_clock());
        std::set<std::pair<std::size_t, std::size_t>> seen;
        std::vector<std::pair<std::size_t, std::string>> spans;
        for (const auto& ev : r.evidence) {
            for (const auto& s : ev.spans) {
                if (seen.emplace(s.span.char_start, s.span.char_end).second) spans.emplace_back(s.span.char_start, s.span.text);
            }
        }
        std::sort(spans.begin(), spans.end());
        std::vector<std::string> out;
        for (auto& [start, t] : spans) out.push_back(std::move(t));
        return out;
    };
}

}  // namespace gechat
