#include "doctest.h"

#include "fixture_corpus.hpp"
#include "gechat/errors.hpp"
#include "gechat/kg.hpp"
#include "gechat/text.hpp"

#include <atomic>

using namespace gechat;

namespace {

Entity make_entity(std::uint32_t id, std::string name, std::uint32_t chunk = 0) {
    Entity e;
    e.entity_id = EntityId(id);
    e.name = name;
    e.aliases = {name};
    e.source_chunk_ids = {ChunkId(chunk)};
    return e;
}

Relation make_relation(std::uint32_t id, std::uint32_t a, std::uint32_t b) {
    Relation r;
    r.relation_id = RelationId(id);
    r.src_entity_id = EntityId(a);
    r.dst_entity_id = EntityId(b);
    r.label = "rel";
    r.source_chunk_ids = {ChunkId(0)};
    return r;
}

// Fails every prompt that contains one of the given needles.
class FlakyChat final : public ChatProvider {
public:
    FlakyChat(std::shared_ptr<ScriptedChat> inner, std::vector<std::string> poison)
        : inner_(std::move(inner)), poison_(std::move(poison)) {}
    std::string chat(const std::string& prompt) const override {
        ++calls;
        for (const auto& p : poison_) {
            if (prompt.find(p) != std::string::npos) throw ProviderError(ProviderErrorKind::permanent, "boom");
        }
        return inner_->chat(prompt);
    }
    std::string name() const override { return "flaky"; }
    mutable std::atomic<int> calls{0};

private:
    std::shared_ptr<ScriptedChat> inner_;
    std::vector<std::string> poison_;
};

}  // namespace

TEST_SUITE("kg") {

TEST_CASE("graph invariants are enforced") {
    KnowledgeGraph g("d1");
    g.add_entity(make_entity(0, "Alpha"));
    g.add_entity(make_entity(1, "Beta"));
    CHECK_THROWS_AS(g.add_entity(make_entity(0, "Gamma")), PreconditionViolation);
    CHECK_THROWS_AS(g.add_entity(make_entity(2, "  alpha ")), PreconditionViolation);
    CHECK_THROWS_AS(g.add_entity(make_entity(3, "   ")), PreconditionViolation);
    Entity orphan = make_entity(4, "Orphan");
    orphan.source_chunk_ids.clear();
    CHECK_THROWS_AS(g.add_entity(orphan), PreconditionViolation);
    g.add_relation(make_relation(0, 0, 1));
    CHECK_THROWS_AS(g.add_relation(make_relation(1, 0, 9)), PreconditionViolation);
    CHECK_THROWS_AS(g.add_relation(make_relation(2, 1, 1)), PreconditionViolation);
    CHECK_THROWS_AS(g.add_relation(make_relation(0, 1, 0)), PreconditionViolation);
    CHECK(g.neighbors(EntityId(0)).size() == 1);
    CHECK(g.neighbors(EntityId(1)).begin()->entity_id == EntityId(0));
    CHECK_THROWS_AS(g.neighbors(EntityId(7)), UnknownEntity);
    CHECK(g.find_by_name("ALPHA")->entity_id == EntityId(0));
}

TEST_CASE("merge groups by normalized name, ids in name order") {
    std::vector<EntityMention> m = {
        {"Zeta", "short", ChunkId(2)},
        {"alpha", "first alpha description", ChunkId(1)},
        {"Alpha ", "a much longer alpha description", ChunkId(3)},
        {"ALPHA", "another one of equal len gth ok", ChunkId(0)},
        {"zeta", "a longer zeta description", ChunkId(0)},
    };
    const auto e = merge_entities(m);
    REQUIRE(e.size() == 2);
    CHECK(e[0].entity_id == EntityId(0));
    CHECK(text::normalize(e[0].name) == "alpha");
    CHECK(e[0].description == "another one of equal len gth ok");  // tie in length: earliest chunk wins
    CHECK(e[0].name == "ALPHA");
    CHECK(e[0].source_chunk_ids == std::set<ChunkId>{ChunkId(0), ChunkId(1), ChunkId(3)});
    CHECK(e[0].aliases.size() == 3);
    CHECK(e[1].name == "zeta");  // earliest chunk supplies the display name
    CHECK(e[1].description == "a longer zeta description");
}

TEST_CASE("extraction: ungrounded names are dropped, repair on malformed reply") {
    const auto doc = load_document("x.txt", "Ada Lovelace worked with Charles Babbage.");
    const auto chunk = chunk_document(doc).at(0);
    ScriptedChat chat;
    chat.add_rule({{"[Format Reminder]"}, "ENTITY\tAda Lovelace\tMathematician\nENTITY\tAlan Turing\tNot here\nEND\n"});
    chat.add_rule({{"[Entity Extraction]"}, "Sure! Here are the entities:\nAda Lovelace\n"});
    std::size_t repairs = 0;
    const auto m = extract_entities(chunk, chat, &repairs);
    CHECK(repairs == 1);
    REQUIRE(m.size() == 1);
    CHECK(m[0].name == "Ada Lovelace");
    CHECK(chat.call_log().count() == 2);
}

TEST_CASE("extraction fails after one unsuccessful repair") {
    const auto doc = load_document("x.txt", "Some text.");
    const auto chunk = chunk_document(doc).at(0);
    ScriptedChat chat;
    chat.add_rule({{"[Entity Extraction]"}, "no protocol here"});
    CHECK_THROWS_AS(extract_entities(chunk, chat), MalformedModelOutput);
    CHECK(chat.call_log().count() == 2);
}

TEST_CASE("reply protocol tolerates fences, blank lines and CRLF") {
    const auto doc = load_document("x.txt", "Ada Lovelace worked with Charles Babbage.");
    const auto chunk = chunk_document(doc).at(0);
    ScriptedChat chat;
    chat.add_rule({{"[Entity Extraction]"}, "```\r\nENTITY\tAda Lovelace\r\n\r\nENTITY\tCharles Babbage\tEngineer\r\nEND\r\n```"});
    const auto m = extract_entities(chunk, chat);
    REQUIRE(m.size() == 2);
    CHECK(m[0].description.empty());
}

TEST_CASE("relation probing is skipped with fewer than two entities") {
    const auto doc = load_document("x.txt", "Ada Lovelace.");
    const auto chunk = chunk_document(doc).at(0);
    ScriptedChat chat;
    Entity e = make_entity(0, "Ada Lovelace");
    std::size_t calls = 0;
    CHECK(probe_relations(chunk, {&e}, chat, nullptr, &calls).empty());
    CHECK(calls == 0);
    CHECK(chat.call_log().count() == 0);
}

TEST_CASE("corpus graphs: provenance, call counts, determinism") {
    std::shared_ptr<ScriptedChat> chat;
    const auto providers = fixture::corpus_providers(&chat);
    for (const auto& d : fixture::corpus()) {
        const auto doc = load_document(d.source_name, d.text);
        const auto chunks = chunk_document(doc, fixture::corpus_chunking());
        const auto before_ext = chat->call_log().count_containing("[Entity Extraction]");
        const auto [g, stats] = build_graph(doc, chunks, *providers.chat);
        CHECK(chat->call_log().count_containing("[Entity Extraction]") - before_ext == chunks.size());
        CHECK(stats.llm_calls_extraction == chunks.size());
        CHECK(stats.llm_calls_relation <= chunks.size());
        CHECK(stats.n_chunks == chunks.size());
        CHECK(stats.skipped_chunk_ids.empty());
        CHECK(stats.n_entities == g.entities().size());
        CHECK(!g.empty());
        for (const auto& [id, e] : g.entities()) {
            for (auto c : e.source_chunk_ids) {
                CHECK(text::normalize(chunks.at(c.value).text).find(text::normalize(e.name)) != std::string::npos);
            }
        }
        for (const auto& [id, r] : g.relations()) {
            for (auto c : r.source_chunk_ids) {
                CHECK(g.entity(r.src_entity_id).source_chunk_ids.contains(c));
                CHECK(g.entity(r.dst_entity_id).source_chunk_ids.contains(c));
            }
        }
        const auto again = build_graph(doc, chunks, *providers.chat, {RelationStrategy::per_chunk, 1, {}});
        CHECK(again.first == g);
        CHECK(again.second == stats);
    }
}

TEST_CASE("graph json round trip and corruption") {
    std::shared_ptr<ScriptedChat> chat;
    const auto providers = fixture::corpus_providers(&chat);
    const auto& d = fixture::corpus().at(0);
    const auto doc = load_document(d.source_name, d.text);
    const auto [g, stats] = build_graph(doc, chunk_document(doc, fixture::corpus_chunking()), *providers.chat);
    const auto bytes = save_graph(g);
    const auto loaded = load_graph(bytes);
    CHECK(loaded == g);
    CHECK(save_graph(loaded) == bytes);
    CHECK(stats_from_json(stats_to_json(stats)) == stats);

    CHECK_THROWS_AS(load_graph("not json"), CorruptGraphFile);
    CHECK_THROWS_AS(load_graph("{}"), CorruptGraphFile);
    auto j = nlohmann::json::parse(bytes);
    j["version"] = 99;
    CHECK_THROWS_AS(load_graph(j.dump()), CorruptGraphFile);
    j = nlohmann::json::parse(bytes);
    j["relations"][0]["src"] = 12345;
    CHECK_THROWS_AS(load_graph(j.dump()), CorruptGraphFile);
    j = nlohmann::json::parse(bytes);
    j["entities"][0]["colour"] = "red";
    CHECK_THROWS_AS(load_graph(j.dump()), CorruptGraphFile);
}

TEST_CASE("failure budget") {
    std::shared_ptr<ScriptedChat> inner;
    fixture::corpus_providers(&inner);
    const auto& d = fixture::corpus().at(1);
    const auto doc = load_document(d.source_name, d.text);
    const auto chunks = chunk_document(doc, fixture::corpus_chunking());
    REQUIRE(chunks.size() >= 3);

    // one failing chunk: the build completes and records it
    FlakyChat one(inner, {chunks[1].text});
    const auto [g, stats] = build_graph(doc, chunks, one);
    REQUIRE(stats.skipped_chunk_ids.size() == 1);
    CHECK(stats.skipped_chunk_ids[0] == ChunkId(1));
    for (const auto& [id, e] : g.entities()) CHECK(!e.source_chunk_ids.contains(ChunkId(1)));

    // most chunks failing aborts the build
    std::vector<std::string> poison;
    for (std::size_t i = 0; i < chunks.size(); i += 1) {
        if (i != 0) poison.push_back(chunks[i].text);
    }
    FlakyChat most(inner, poison);
    CHECK_THROWS_AS(build_graph(doc, chunks, most), BuildFailed);
}

TEST_CASE("progress reaches the total") {
    std::shared_ptr<ScriptedChat> chat;
    const auto providers = fixture::corpus_providers(&chat);
    const auto& d = fixture::corpus().at(2);
    const auto doc = load_document(d.source_name, d.text);
    const auto chunks = chunk_document(doc, fixture::corpus_chunking());
    std::size_t last_done = 0, last_total = 0;
    BuildOptions o;
    o.on_progress = [&](std::size_t done, std::size_t total) {
        CHECK(done > last_done);
        last_done = done;
        last_total = total;
    };
    build_graph(doc, chunks, *providers.chat, o);
    CHECK(last_done == last_total);
    CHECK(last_total == 2 * chunks.size());
}

TEST_CASE("global pair strategy") {
    std::shared_ptr<ScriptedChat> chat;
    const auto providers = fixture::corpus_providers(&chat);
    const auto& d = fixture::corpus().at(3);
    const auto doc = load_document(d.source_name, d.text);
    const auto chunks = chunk_document(doc, fixture::corpus_chunking());
    BuildOptions o;
    o.relation_strategy = RelationStrategy::global_pairs;
    const auto [g, stats] = build_graph(doc, chunks, *providers.chat, o);
    const auto m = g.entities().size();
    CHECK(stats.llm_calls_relation == m * (m - 1) / 2);
}

TEST_CASE("lexical matches use whole words") {
    KnowledgeGraph g("d");
    g.add_entity(make_entity(0, "cat"));
    g.add_entity(make_entity(1, "New York"));
    CHECK(lexical_entity_matches("The Cat sat.", g) == std::vector<EntityId>{EntityId(0)});
    CHECK(lexical_entity_matches("concatenate", g).empty());
    CHECK(lexical_entity_matches("in new  york today", g) == std::vector<EntityId>{EntityId(1)});
}

}
