#include "gechat/subgraph.hpp"

#include "gechat/errors.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <tuple>

namespace gechat {

const std::map<EntityId, Embedding>& EntityEmbeddingCache::get(const KnowledgeGraph& g,
                                                               const EmbeddingProvider& embed) {
    if (filled_) return vectors_;
    std::vector<std::string> texts;
    std::vector<EntityId> ids;
    for (const auto& [id, e] : g.entities()) {
        ids.push_back(id);
        texts.push_back(e.description.empty() ? e.name : e.name + ": " + e.description);
    }
    auto vecs = embed.embed(texts);
    if (vecs.size() != ids.size()) throw ProviderError(ProviderErrorKind::permanent, "embedding count mismatch");
    for (std::size_t i = 0; i < ids.size(); ++i) vectors_.emplace(ids[i], std::move(vecs[i]));
    filled_ = true;
    return vectors_;
}

std::set<EntityId> match_entities(std::string_view step_text, const KnowledgeGraph& g, const EmbeddingProvider& embed,
                                  const MatchOptions& options, EntityEmbeddingCache* cache) {
    if (g.empty()) return {};
    const auto lexical = lexical_entity_matches(step_text, g);
    if (!lexical.empty()) return {lexical.begin(), lexical.end()};
    if (step_text.empty()) return {};

    EntityEmbeddingCache local;
    const auto& entity_vecs = (cache ? *cache : local).get(g, embed);
    const auto step_vecs = embed.embed({std::string(step_text)});
    if (step_vecs.size() != 1) throw ProviderError(ProviderErrorKind::permanent, "embedding count mismatch");

    std::vector<std::pair<double, EntityId>> scored;
    for (const auto& [id, v] : entity_vecs) {
        const double c = cosine(step_vecs.front(), v);
        if (c >= options.tau) scored.emplace_back(c, id);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    if (scored.size() > options.max_embedding_matches) scored.resize(options.max_embedding_matches);
    std::set<EntityId> out;
    for (const auto& [c, id] : scored) out.insert(id);
    return out;
}

SubGraph expand_k_hop(const KnowledgeGraph& g, const std::set<EntityId>& seeds, std::size_t k) {
    SubGraph sub;
    sub.seed_entity_ids = seeds;
    std::deque<EntityId> frontier;
    for (auto s : seeds) {
        if (!g.has_entity(s)) throw UnknownEntity("seed entity " + std::to_string(s.value) + " is not in the graph");
        sub.hop_of.emplace(s, 0);
        frontier.push_back(s);
    }
    while (!frontier.empty()) {
        const EntityId u = frontier.front();
        frontier.pop_front();
        const std::size_t hop = sub.hop_of.at(u);
        if (hop == k) continue;
        for (const auto& nb : g.neighbors(u)) {
            if (sub.hop_of.emplace(nb.entity_id, hop + 1).second) frontier.push_back(nb.entity_id);
        }
    }
    for (const auto& [id, r] : g.relations()) {
        if (sub.hop_of.contains(r.src_entity_id) && sub.hop_of.contains(r.dst_entity_id)) sub.relation_ids.insert(id);
    }
    return sub;
}

ChunkEvidencePool retrieve_source_chunks(const SubGraph& sub, const KnowledgeGraph& g, std::size_t max_chunks) {
    ChunkEvidencePool pool;
    pool.for_step = sub.for_step;
    std::map<ChunkId, std::size_t> min_hop;
    auto contribute = [&](ChunkId c, GraphElement el, std::size_t hop) {
        pool.provenance[c].insert(el);
        auto [it, fresh] = min_hop.try_emplace(c, hop);
        if (!fresh) it->second = std::min(it->second, hop);
    };
    for (const auto& [id, hop] : sub.hop_of) {
        for (auto c : g.entity(id).source_chunk_ids) contribute(c, id, hop);
    }
    for (auto rid : sub.relation_ids) {
        const Relation& r = g.relation(rid);
        // an edge is reached once both endpoints are
        const std::size_t hop = std::max(sub.hop_of.at(r.src_entity_id), sub.hop_of.at(r.dst_entity_id));
        for (auto c : r.source_chunk_ids) contribute(c, rid, hop);
    }
    for (const auto& [c, els] : pool.provenance) pool.chunk_ids.push_back(c);
    std::sort(pool.chunk_ids.begin(), pool.chunk_ids.end(), [&](ChunkId a, ChunkId b) {
        const auto ka = std::make_tuple(pool.provenance.at(a).size(), min_hop.at(a));
        const auto kb = std::make_tuple(pool.provenance.at(b).size(), min_hop.at(b));
        if (std::get<0>(ka) != std::get<0>(kb)) return std::get<0>(ka) > std::get<0>(kb);
        if (std::get<1>(ka) != std::get<1>(kb)) return std::get<1>(ka) < std::get<1>(kb);
        return a < b;
    });
    if (max_chunks > 0 && pool.chunk_ids.size() > max_chunks) {
        for (std::size_t i = max_chunks; i < pool.chunk_ids.size(); ++i) pool.provenance.erase(pool.chunk_ids[i]);
        pool.chunk_ids.resize(max_chunks);
    }
    return pool;
}

std::vector<ChunkEvidencePool> ground_steps(const CoTAnswer& cot, const KnowledgeGraph& g,
                                            const EmbeddingProvider& embed, const GroundingOptions& options) {
    std::vector<ChunkEvidencePool> pools;
    pools.reserve(cot.steps.size());
    EntityEmbeddingCache cache;
    for (std::size_t i = 0; i < cot.steps.size(); ++i) {
        std::set<EntityId> seeds;
        try {
            seeds = match_entities(cot.steps[i], g, embed, options.match, &cache);
        } catch (const ProviderError& e) {
            throw ProviderError(e.kind(), "step " + std::to_string(i) + ": " + e.what());
        }
        ChunkEvidencePool pool;
        if (seeds.empty()) {
            pool.ungrounded = true;
        } else {
            SubGraph sub = expand_k_hop(g, seeds, options.k);
            sub.for_step = i;
            pool = retrieve_source_chunks(sub, g, options.max_chunks_per_step);
            pool.ungrounded = pool.chunk_ids.empty();
        }
        pool.for_step = i;
        pools.push_back(std::move(pool));
    }
    return pools;
}

}  // namespace gechat
