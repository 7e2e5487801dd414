#pragma once

#include "gechat/cot.hpp"
#include "gechat/kg.hpp"
#include "gechat/providers.hpp"

#include <cstddef>
#include <map>
#include <set>
#include <string_view>
#include <variant>
#include <vector>

namespace gechat {

struct SubGraph {
    std::set<EntityId> seed_entity_ids;
    std::map<EntityId, std::size_t> hop_of;
    std::set<RelationId> relation_ids;
    std::size_t for_step = 0;

    friend bool operator==(const SubGraph&, const SubGraph&) = default;
};

/// A graph element that contributed a chunk to a pool.
using GraphElement = std::variant<EntityId, RelationId>;

struct ChunkEvidencePool {
    std::size_t for_step = 0;
    std::vector<ChunkId> chunk_ids;  // ranked, deduplicated
    std::map<ChunkId, std::set<GraphElement>> provenance;
    bool ungrounded = false;
};

struct MatchOptions {
    double tau = 0.80;
    std::size_t max_embedding_matches = 3;
};

/// Caches entity embeddings across the steps of one request.
class EntityEmbeddingCache {
public:
    const std::map<EntityId, Embedding>& get(const KnowledgeGraph& g, const EmbeddingProvider& embed);

private:
    bool filled_ = false;
    std::map<EntityId, Embedding> vectors_;
};

/// Lexical match first; embedding fallback (cosine >= tau, top 3) only when nothing matched lexically.
std::set<EntityId> match_entities(std::string_view step_text, const KnowledgeGraph& g, const EmbeddingProvider& embed,
                                  const MatchOptions& options = {}, EntityEmbeddingCache* cache = nullptr);

/// Multi-source BFS over the undirected adjacency, up to k hops.
SubGraph expand_k_hop(const KnowledgeGraph& g, const std::set<EntityId>& seeds, std::size_t k);

/// Ranked by contributor count (desc), then min hop (asc), then chunk id. max_chunks = 0 keeps all.
ChunkEvidencePool retrieve_source_chunks(const SubGraph& sub, const KnowledgeGraph& g, std::size_t max_chunks = 0);

struct GroundingOptions {
    std::size_t k = 2;
    std::size_t max_chunks_per_step = 6;
    MatchOptions match;
};

std::vector<ChunkEvidencePool> ground_steps(const CoTAnswer& cot, const KnowledgeGraph& g,
                                            const EmbeddingProvider& embed, const GroundingOptions& options = {});

}  // namespace gechat
