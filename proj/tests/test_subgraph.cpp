#include "doctest.h"

#include "gechat/errors.hpp"
#include "gechat/subgraph.hpp"
#include "oracles.hpp"

#include <random>

using namespace gechat;

namespace {

struct RandomGraph {
    KnowledgeGraph g{"d"};
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    std::size_t n = 0;
};

RandomGraph random_graph(std::mt19937& rng, std::size_t n, double p) {
    RandomGraph r;
    r.n = n;
    for (std::uint32_t i = 0; i < n; ++i) {
        Entity e;
        e.entity_id = EntityId(i);
        e.name = "e" + std::to_string(i);
        e.source_chunk_ids = {ChunkId(i % 7)};
        r.g.add_entity(e);
    }
    std::uniform_real_distribution<double> u(0, 1);
    for (std::uint32_t a = 0; a < n; ++a) {
        for (std::uint32_t b = a + 1; b < n; ++b) {
            if (u(rng) < p) {
                Relation rel;
                rel.relation_id = RelationId(static_cast<std::uint32_t>(r.edges.size()));
                rel.src_entity_id = EntityId(rng() % 2 ? a : b);
                rel.dst_entity_id = EntityId(rel.src_entity_id.value == a ? b : a);
                rel.label = "x";
                rel.source_chunk_ids = {ChunkId(a % 5)};
                r.g.add_relation(rel);
                r.edges.emplace_back(rel.src_entity_id.value, rel.dst_entity_id.value);
            }
        }
    }
    return r;
}

// Embedding that maps known strings to fixed 2-d directions.
class TableEmbedding final : public EmbeddingProvider {
public:
    std::map<std::string, Embedding> table;
    std::vector<Embedding> embed(const std::vector<std::string>& texts) const override {
        std::vector<Embedding> out;
        for (const auto& t : texts) {
            auto it = table.find(t);
            out.push_back(it == table.end() ? Embedding{0, 0, 1} : it->second);
        }
        return out;
    }
    std::string name() const override { return "table"; }
};

}  // namespace

TEST_SUITE("subgraph") {

TEST_CASE("k-hop expansion matches brute force on random graphs") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 30;
        auto rg = random_graph(rng, n, 0.08);
        std::set<std::uint32_t> seeds;
        const std::size_t n_seeds = 1 + rng() % 3;
        for (std::size_t i = 0; i < n_seeds; ++i) seeds.insert(static_cast<std::uint32_t>(rng() % n));
        std::set<EntityId> seed_ids;
        for (auto s : seeds) seed_ids.insert(EntityId(s));
        for (std::size_t k = 0; k <= 3; ++k) {
            const auto sub = expand_k_hop(rg.g, seed_ids, k);
            const auto want = oracle::k_hop(n, rg.edges, seeds, k);
            std::map<std::uint32_t, std::size_t> got;
            for (const auto& [id, h] : sub.hop_of) got[id.value] = h;
            CHECK(got == want.hop_of);
            std::set<std::uint32_t> rels;
            for (auto r : sub.relation_ids) rels.insert(r.value);
            CHECK(rels == want.relations);
        }
    }
}

TEST_CASE("k = 0 keeps only the seeds") {
    std::mt19937 rng(5);
    auto rg = random_graph(rng, 10, 0.5);
    const auto sub = expand_k_hop(rg.g, {EntityId(2)}, 0);
    CHECK(sub.hop_of.size() == 1);
    CHECK(sub.hop_of.at(EntityId(2)) == 0);
}

TEST_CASE("unknown seeds throw") {
    KnowledgeGraph g("d");
    CHECK_THROWS_AS(expand_k_hop(g, {EntityId(0)}, 1), UnknownEntity);
}

TEST_CASE("chunk ranking: contributor count, then hop, then id") {
    KnowledgeGraph g("d");
    auto add = [&](std::uint32_t id, std::set<ChunkId> chunks) {
        Entity e;
        e.entity_id = EntityId(id);
        e.name = "n" + std::to_string(id);
        e.source_chunk_ids = std::move(chunks);
        g.add_entity(e);
    };
    add(0, {ChunkId(5)});
    add(1, {ChunkId(3), ChunkId(5)});
    add(2, {ChunkId(1)});
    add(3, {ChunkId(9)});
    Relation r;
    r.relation_id = RelationId(0);
    r.src_entity_id = EntityId(0);
    r.dst_entity_id = EntityId(1);
    r.label = "l";
    r.source_chunk_ids = {ChunkId(5)};
    g.add_relation(r);
    r.relation_id = RelationId(1);
    r.src_entity_id = EntityId(1);
    r.dst_entity_id = EntityId(2);
    r.source_chunk_ids = {ChunkId(1)};
    g.add_relation(r);
    r.relation_id = RelationId(2);
    r.src_entity_id = EntityId(2);
    r.dst_entity_id = EntityId(3);
    r.source_chunk_ids = {ChunkId(9)};
    g.add_relation(r);

    const auto sub = expand_k_hop(g, {EntityId(0)}, 3);
    const auto pool = retrieve_source_chunks(sub, g);
    // chunk 5: e0, e1, r0 (3); chunk 1: e2, r1 (2, hop 2); chunk 9: e3, r2 (2, hop 3); chunk 3: e1 (1)
    CHECK(pool.chunk_ids == std::vector<ChunkId>{ChunkId(5), ChunkId(1), ChunkId(9), ChunkId(3)});
    CHECK(pool.provenance.at(ChunkId(5)).size() == 3);
    CHECK(pool.provenance.at(ChunkId(5)).contains(GraphElement{RelationId(0)}));

    const auto capped = retrieve_source_chunks(sub, g, 2);
    CHECK(capped.chunk_ids == std::vector<ChunkId>{ChunkId(5), ChunkId(1)});
    CHECK(capped.provenance.size() == 2);
}

TEST_CASE("embedding fallback only when nothing matches lexically") {
    KnowledgeGraph g("d");
    for (std::uint32_t i = 0; i < 5; ++i) {
        Entity e;
        e.entity_id = EntityId(i);
        e.name = "thing" + std::to_string(i);
        e.description = "d";
        e.source_chunk_ids = {ChunkId(0)};
        g.add_entity(e);
    }
    TableEmbedding emb;
    const double c = std::sqrt(0.5);
    emb.table["thing0: d"] = {1, 0, 0};
    emb.table["thing1: d"] = {0.9, std::sqrt(1 - 0.81), 0};
    emb.table["thing2: d"] = {0.85, std::sqrt(1 - 0.85 * 0.85), 0};
    emb.table["thing3: d"] = {0.82, std::sqrt(1 - 0.82 * 0.82), 0};
    emb.table["thing4: d"] = {c, c, 0};
    emb.table["a vague step"] = {1, 0, 0};

    CHECK(match_entities("mentions thing4 directly", g, emb) == std::set<EntityId>{EntityId(4)});
    // top three above tau, thing4 (0.707) excluded
    CHECK(match_entities("a vague step", g, emb) == std::set<EntityId>{EntityId(0), EntityId(1), EntityId(2)});
    MatchOptions strict;
    strict.tau = 0.95;
    CHECK(match_entities("a vague step", g, emb, strict) == std::set<EntityId>{EntityId(0)});
    CHECK(match_entities("unrelated", g, emb).empty());
}

TEST_CASE("ground_steps marks steps without entities") {
    KnowledgeGraph g("d");
    Entity e;
    e.entity_id = EntityId(0);
    e.name = "catalase";
    e.source_chunk_ids = {ChunkId(2)};
    g.add_entity(e);
    CoTAnswer cot;
    cot.steps = {"catalase is an enzyme", "nothing relevant"};
    TableEmbedding emb;
    emb.table["nothing relevant"] = {0, 1, 0};
    const auto pools = ground_steps(cot, g, emb);
    REQUIRE(pools.size() == 2);
    CHECK_FALSE(pools[0].ungrounded);
    CHECK(pools[0].chunk_ids == std::vector<ChunkId>{ChunkId(2)});
    CHECK(pools[1].ungrounded);
    CHECK(pools[1].for_step == 1);
}

}
