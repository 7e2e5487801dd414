#pragma once

#include "gechat/ids.hpp"
#include "gechat/ingest.hpp"
#include "gechat/providers.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace gechat {

struct Entity {
    EntityId entity_id;
    std::string name;
    std::set<std::string> aliases;
    std::string description;
    std::set<ChunkId> source_chunk_ids;

    friend bool operator==(const Entity&, const Entity&) = default;
};

struct Relation {
    RelationId relation_id;
    EntityId src_entity_id;
    EntityId dst_entity_id;
    std::string label;
    std::string description;
    std::set<ChunkId> source_chunk_ids;

    friend bool operator==(const Relation&, const Relation&) = default;
};

struct Neighbor {
    EntityId entity_id;
    RelationId relation_id;

    friend auto operator<=>(const Neighbor&, const Neighbor&) = default;
};

/// Entities and relations of one document. Adjacency is the undirected view of the relations.
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;
    explicit KnowledgeGraph(DocId doc_id) : doc_id_(std::move(doc_id)) {}

    /// Throws PreconditionViolation when an invariant would break.
    void add_entity(Entity e);
    void add_relation(Relation r);

    const DocId& doc_id() const noexcept { return doc_id_; }
    const std::map<EntityId, Entity>& entities() const noexcept { return entities_; }
    const std::map<RelationId, Relation>& relations() const noexcept { return relations_; }
    const std::set<Neighbor>& neighbors(EntityId id) const;
    const std::map<EntityId, std::set<Neighbor>>& adjacency() const noexcept { return adjacency_; }

    bool has_entity(EntityId id) const { return entities_.contains(id); }
    const Entity& entity(EntityId id) const;
    const Relation& relation(RelationId id) const;
    const Entity* find_by_name(std::string_view surface) const;
    bool empty() const noexcept { return entities_.empty(); }

    friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
        return a.doc_id_ == b.doc_id_ && a.entities_ == b.entities_ && a.relations_ == b.relations_;
    }

private:
    DocId doc_id_;
    std::map<EntityId, Entity> entities_;
    std::map<RelationId, Relation> relations_;
    std::map<EntityId, std::set<Neighbor>> adjacency_;
    std::map<std::string, EntityId> by_normalized_name_;
};

/// Size measures behind the O(n·l + m² + k·e) cost model, plus the LLM calls actually issued.
struct GraphStats {
    std::size_t n_chunks = 0;
    double mean_chunk_len = 0.0;
    std::size_t n_entities = 0;
    std::size_t n_edges = 0;
    std::size_t llm_calls_extraction = 0;
    std::size_t llm_calls_relation = 0;
    std::size_t llm_calls_repair = 0;
    std::vector<ChunkId> skipped_chunk_ids;

    friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

struct EntityMention {
    std::string name;
    std::string description;
    ChunkId chunk_id;
};

struct RawRelation {
    EntityId src;
    EntityId dst;
    std::string label;
    std::string description;
    ChunkId chunk_id;
};

enum class RelationStrategy { per_chunk, global_pairs };

struct BuildOptions {
    RelationStrategy relation_strategy = RelationStrategy::per_chunk;
    std::size_t parallelism = 4;
    /// Called after each chunk finishes a stage with (done, total) over both stages.
    std::function<void(std::size_t, std::size_t)> on_progress;
};

// Prompts and the line protocol: ENTITY\tname\tdescription, REL\tsrc\tdst\tlabel\tdescription, END.
std::string render_extraction_prompt(const Chunk& chunk);
std::string render_relation_prompt(const Chunk& chunk, const std::vector<const Entity*>& entities);
std::string format_reminder();

/// One chat call (plus at most one repair call). Mentions absent from the chunk are dropped.
/// Returns the number of repair calls through `repairs` when non-null.
std::vector<EntityMention> extract_entities(const Chunk& chunk, const ChatProvider& chat,
                                            std::size_t* repairs = nullptr);

/// No call when fewer than two entities. Only relations between the given entities survive.
std::vector<RawRelation> probe_relations(const Chunk& chunk, const std::vector<const Entity*>& entities_in_chunk,
                                         const ChatProvider& chat, std::size_t* repairs = nullptr,
                                         std::size_t* calls = nullptr);

/// Groups mentions by normalized name. Ids are assigned in normalized-name order.
std::vector<Entity> merge_entities(std::vector<EntityMention> mentions);

std::pair<KnowledgeGraph, GraphStats> build_graph(const Document& doc, const std::vector<Chunk>& chunks,
                                                  const ChatProvider& chat, const BuildOptions& options = {});

/// Entities whose normalized name or alias occurs as a whole word in normalized `text`.
std::vector<EntityId> lexical_entity_matches(std::string_view text, const KnowledgeGraph& g);

std::string save_graph(const KnowledgeGraph& g);
KnowledgeGraph load_graph(std::string_view bytes);

nlohmann::json stats_to_json(const GraphStats& s);
GraphStats stats_from_json(const nlohmann::json& j);

}  // namespace gechat
