#include "gechat/kg.hpp"

#include "gechat/errors.hpp"
#include "gechat/parallel.hpp"
#include "gechat/text.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <optional>
#include <sstream>
#include <tuple>

namespace gechat {

// ---------------------------------------------------------------------------
// KnowledgeGraph

void KnowledgeGraph::add_entity(Entity e) {
    if (text::trim(e.name).empty()) throw PreconditionViolation("entity name is empty");
    if (e.source_chunk_ids.empty()) throw PreconditionViolation("entity '" + e.name + "' has no provenance");
    if (entities_.contains(e.entity_id)) {
        throw PreconditionViolation("duplicate entity id " + std::to_string(e.entity_id.value));
    }
    auto key = text::normalize(e.name);
    if (by_normalized_name_.contains(key)) throw PreconditionViolation("duplicate entity name '" + e.name + "'");
    by_normalized_name_.emplace(std::move(key), e.entity_id);
    adjacency_[e.entity_id];
    const EntityId id = e.entity_id;
    entities_.emplace(id, std::move(e));
}

void KnowledgeGraph::add_relation(Relation r) {
    if (!entities_.contains(r.src_entity_id) || !entities_.contains(r.dst_entity_id)) {
        throw PreconditionViolation("relation " + std::to_string(r.relation_id.value) + " has a dangling endpoint");
    }
    if (r.src_entity_id == r.dst_entity_id) throw PreconditionViolation("self-relation");
    if (r.source_chunk_ids.empty()) throw PreconditionViolation("relation has no provenance");
    if (relations_.contains(r.relation_id)) {
        throw PreconditionViolation("duplicate relation id " + std::to_string(r.relation_id.value));
    }
    adjacency_[r.src_entity_id].insert({r.dst_entity_id, r.relation_id});
    adjacency_[r.dst_entity_id].insert({r.src_entity_id, r.relation_id});
    const RelationId id = r.relation_id;
    relations_.emplace(id, std::move(r));
}

const std::set<Neighbor>& KnowledgeGraph::neighbors(EntityId id) const {
    auto it = adjacency_.find(id);
    if (it == adjacency_.end()) throw UnknownEntity("unknown entity id " + std::to_string(id.value));
    return it->second;
}

const Entity& KnowledgeGraph::entity(EntityId id) const {
    auto it = entities_.find(id);
    if (it == entities_.end()) throw UnknownEntity("unknown entity id " + std::to_string(id.value));
    return it->second;
}

const Relation& KnowledgeGraph::relation(RelationId id) const {
    auto it = relations_.find(id);
    if (it == relations_.end()) throw NotFound("unknown relation id " + std::to_string(id.value));
    return it->second;
}

const Entity* KnowledgeGraph::find_by_name(std::string_view surface) const {
    auto it = by_normalized_name_.find(text::normalize(surface));
    return it == by_normalized_name_.end() ? nullptr : &entities_.at(it->second);
}

// ---------------------------------------------------------------------------
// Prompts and reply parsing

std::string render_extraction_prompt(const Chunk& chunk) {
    std::ostringstream p;
    p << "[Entity Extraction]\n"
         "List the named entities and key concepts that appear in the passage below.\n"
         "Use the exact spelling from the passage for every name.\n\n"
         "Reply with one line per entity and nothing else:\n"
         "ENTITY<TAB>name<TAB>one-sentence description\n"
         "Finish with a line containing only END.\n\n"
         "[Passage]\n"
      << chunk.text << "\n";
    return p.str();
}

std::string render_relation_prompt(const Chunk& chunk, const std::vector<const Entity*>& entities) {
    std::ostringstream p;
    p << "[Relation Probing]\n"
         "Identify relations stated or clearly implied in the passage between the listed entities.\n"
         "Only use names from the entity list.\n\n"
         "Reply with one line per relation and nothing else:\n"
         "REL<TAB>source name<TAB>target name<TAB>short label<TAB>one-sentence description\n"
         "Finish with a line containing only END.\n\n"
         "[Entities]\n";
    for (const Entity* e : entities) p << "- " << e->name << "\n";
    p << "\n[Passage]\n" << chunk.text << "\n";
    return p.str();
}

std::string format_reminder() {
    return "[Format Reminder]\n"
           "Your previous reply could not be parsed. Reply only with tab-separated lines starting with "
           "ENTITY or REL as instructed, then a final line END. No other text.\n";
}

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

// Records of the given tag, or nullopt when the reply breaks the line protocol.
std::optional<std::vector<std::vector<std::string>>> parse_records(std::string_view reply, std::string_view tag,
                                                                 std::size_t min_fields, std::size_t max_fields) {
    std::vector<std::vector<std::string>> records;
    for (const auto& raw : split(reply, '\n')) {
        std::string_view line = raw;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const std::string_view trimmed = text::trim(line);
        if (trimmed.empty() || trimmed.starts_with("```")) continue;
        if (trimmed == "END") return records;
        auto fields = split(line, '\t');
        if (fields.empty() || text::trim(fields[0]) != tag) return std::nullopt;
        if (fields.size() < min_fields || fields.size() > max_fields) return std::nullopt;
        for (auto& f : fields) f = std::string(text::trim(f));
        fields.resize(max_fields);
        records.push_back(std::move(fields));
    }
    return std::nullopt;  // missing END
}

[[noreturn]] void rethrow_with_chunk(const ProviderError& e, ChunkId chunk) {
    const std::string what = "chunk " + std::to_string(chunk.value) + ": " + e.what();
    if (dynamic_cast<const TimeoutError*>(&e)) throw TimeoutError(what);
    throw ProviderError(e.kind(), what);
}

// One call, one repair retry on protocol violations.
std::vector<std::vector<std::string>> call_with_repair(const std::string& prompt, const ChatProvider& chat,
                                                       const Chunk& chunk, std::string_view tag,
                                                       std::size_t min_fields, std::size_t max_fields,
                                                       std::size_t* repairs) {
    try {
        if (auto rec = parse_records(chat.chat(prompt), tag, min_fields, max_fields)) return *rec;
        if (repairs) ++*repairs;
        if (auto rec = parse_records(chat.chat(prompt + "\n" + format_reminder()), tag, min_fields, max_fields)) {
            return *rec;
        }
    } catch (const ProviderError& e) {
        rethrow_with_chunk(e, chunk.chunk_id);
    }
    throw MalformedModelOutput("chunk " + std::to_string(chunk.chunk_id.value) + ": unparsable " +
                               std::string(tag) + " reply after repair");
}

}  // namespace

std::vector<EntityMention> extract_entities(const Chunk& chunk, const ChatProvider& chat, std::size_t* repairs) {
    if (text::trim(chunk.text).empty()) throw PreconditionViolation("cannot extract entities from an empty chunk");
    const auto records = call_with_repair(render_extraction_prompt(chunk), chat, chunk, "ENTITY", 2, 3, repairs);
    const std::string haystack = text::normalize(chunk.text);
    std::vector<EntityMention> out;
    for (const auto& r : records) {
        const std::string& name = r[1];
        if (name.empty()) continue;
        // grounding: the surface form must occur in the passage
        if (haystack.find(text::normalize(name)) == std::string::npos) continue;
        out.push_back({name, r[2], chunk.chunk_id});
    }
    return out;
}

std::vector<RawRelation> probe_relations(const Chunk& chunk, const std::vector<const Entity*>& entities_in_chunk,
                                         const ChatProvider& chat, std::size_t* repairs, std::size_t* calls) {
    if (entities_in_chunk.size() < 2) return {};
    std::map<std::string, EntityId> lookup;
    for (const Entity* e : entities_in_chunk) {
        lookup.emplace(text::normalize(e->name), e->entity_id);
        for (const auto& a : e->aliases) lookup.emplace(text::normalize(a), e->entity_id);
    }
    if (calls) ++*calls;
    const auto records =
        call_with_repair(render_relation_prompt(chunk, entities_in_chunk), chat, chunk, "REL", 4, 5, repairs);
    std::vector<RawRelation> out;
    for (const auto& r : records) {
        auto src = lookup.find(text::normalize(r[1]));
        auto dst = lookup.find(text::normalize(r[2]));
        if (src == lookup.end() || dst == lookup.end()) continue;
        if (src->second == dst->second) continue;
        if (r[3].empty()) continue;
        out.push_back({src->second, dst->second, r[3], r[4], chunk.chunk_id});
    }
    return out;
}

std::vector<Entity> merge_entities(std::vector<EntityMention> mentions) {
    std::stable_sort(mentions.begin(), mentions.end(),
                     [](const EntityMention& a, const EntityMention& b) { return a.chunk_id < b.chunk_id; });
    std::map<std::string, Entity> groups;
    std::map<std::string, ChunkId> description_chunk;
    for (auto& m : mentions) {
        const std::string key = text::normalize(m.name);
        if (key.empty()) continue;
        auto [it, fresh] = groups.try_emplace(key);
        Entity& e = it->second;
        if (fresh) e.name = std::string(text::trim(m.name));
        e.aliases.insert(std::string(text::trim(m.name)));
        e.source_chunk_ids.insert(m.chunk_id);
        // longest description wins; mentions arrive in chunk order so ties keep the earliest
        if (fresh || m.description.size() > e.description.size()) e.description = std::move(m.description);
    }
    std::vector<Entity> out;
    out.reserve(groups.size());
    std::uint32_t next = 0;
    for (auto& [key, e] : groups) {
        e.entity_id = EntityId(next++);
        out.push_back(std::move(e));
    }
    return out;
}

namespace {

std::vector<Relation> merge_relations(std::vector<RawRelation> raw) {
    std::stable_sort(raw.begin(), raw.end(),
                     [](const RawRelation& a, const RawRelation& b) { return a.chunk_id < b.chunk_id; });
    std::map<std::tuple<EntityId, EntityId, std::string>, Relation> groups;
    for (auto& r : raw) {
        auto [it, fresh] = groups.try_emplace({r.src, r.dst, text::normalize(r.label)});
        Relation& rel = it->second;
        if (fresh) {
            rel.src_entity_id = r.src;
            rel.dst_entity_id = r.dst;
            rel.label = r.label;
        }
        rel.source_chunk_ids.insert(r.chunk_id);
        if (fresh || r.description.size() > rel.description.size()) rel.description = std::move(r.description);
    }
    std::vector<Relation> out;
    std::uint32_t next = 0;
    for (auto& [key, rel] : groups) {
        rel.relation_id = RelationId(next++);
        out.push_back(std::move(rel));
    }
    return out;
}

}  // namespace

std::pair<KnowledgeGraph, GraphStats> build_graph(const Document& doc, const std::vector<Chunk>& chunks,
                                                  const ChatProvider& chat, const BuildOptions& options) {
    for (const auto& c : chunks) {
        if (c.doc_id != doc.doc_id()) throw PreconditionViolation("chunk does not belong to document " + doc.doc_id());
    }
    const std::size_t n = chunks.size();
    GraphStats stats;
    stats.n_chunks = n;
    if (n > 0) {
        std::size_t total = 0;
        for (const auto& c : chunks) total += c.char_end - c.char_start;
        stats.mean_chunk_len = static_cast<double>(total) / static_cast<double>(n);
    }

    std::mutex progress_mu;
    std::size_t done = 0;
    const bool global = options.relation_strategy == RelationStrategy::global_pairs;
    auto tick = [&](std::size_t total) {
        if (!options.on_progress) return;
        std::lock_guard lock(progress_mu);
        options.on_progress(++done, total);
    };

    // stage 1: extraction, one call per chunk
    std::vector<std::vector<EntityMention>> mentions(n);
    std::vector<std::size_t> repairs(n, 0);
    std::vector<char> failed(n, 0);  // not vector<bool>: written from worker threads
    std::vector<std::string> failure(n);
    parallel_for(n, options.parallelism, [&](std::size_t i) {
        try {
            if (!text::trim(chunks[i].text).empty()) mentions[i] = extract_entities(chunks[i], chat, &repairs[i]);
        } catch (const std::exception& e) {
            failed[i] = 1;
            failure[i] = e.what();
        }
        tick(global ? n : 2 * n);
    });
    for (std::size_t i = 0; i < n; ++i) {
        if (!text::trim(chunks[i].text).empty()) ++stats.llm_calls_extraction;
    }
    auto failed_count = [&] { return static_cast<std::size_t>(std::count(failed.begin(), failed.end(), char{1})); };
    auto check_budget = [&](const char* stage) {
        if (n > 0 && 2 * failed_count() > n) {
            std::string first;
            for (std::size_t i = 0; i < n && first.empty(); ++i) first = failure[i];
            throw BuildFailed(std::to_string(failed_count()) + " of " + std::to_string(n) + " chunks failed during " +
                              stage + "; first error: " + first);
        }
    };
    check_budget("entity extraction");

    std::vector<EntityMention> all;
    for (auto& m : mentions) std::move(m.begin(), m.end(), std::back_inserter(all));
    const auto entities = merge_entities(std::move(all));

    KnowledgeGraph g(doc.doc_id());
    for (const auto& e : entities) g.add_entity(e);

    // stage 2: relations
    std::vector<RawRelation> raw;
    if (!global) {
        std::vector<std::vector<RawRelation>> per_chunk(n);
        std::vector<std::size_t> calls(n, 0);
        parallel_for(n, options.parallelism, [&](std::size_t i) {
            if (!failed[i]) {
                std::vector<const Entity*> here;
                for (const auto& [id, e] : g.entities()) {
                    if (e.source_chunk_ids.contains(chunks[i].chunk_id)) here.push_back(&e);
                }
                try {
                    per_chunk[i] = probe_relations(chunks[i], here, chat, &repairs[i], &calls[i]);
                } catch (const std::exception& e) {
                    failed[i] = 1;
                    failure[i] = e.what();
                }
            }
            tick(2 * n);
        });
        for (std::size_t i = 0; i < n; ++i) {
            stats.llm_calls_relation += calls[i];
            std::move(per_chunk[i].begin(), per_chunk[i].end(), std::back_inserter(raw));
        }
    } else {
        std::map<ChunkId, const Chunk*> by_id;
        for (const auto& c : chunks) by_id.emplace(c.chunk_id, &c);
        std::vector<std::pair<const Entity*, const Entity*>> pairs;
        for (auto a = g.entities().begin(); a != g.entities().end(); ++a) {
            for (auto b = std::next(a); b != g.entities().end(); ++b) pairs.emplace_back(&a->second, &b->second);
        }
        std::vector<std::vector<RawRelation>> per_pair(pairs.size());
        std::vector<std::size_t> calls(pairs.size(), 0);
        std::vector<std::size_t> pair_repairs(pairs.size(), 0);
        parallel_for(pairs.size(), options.parallelism, [&](std::size_t i) {
            const auto [a, b] = pairs[i];
            std::vector<ChunkId> shared;
            std::set_intersection(a->source_chunk_ids.begin(), a->source_chunk_ids.end(), b->source_chunk_ids.begin(),
                                  b->source_chunk_ids.end(), std::back_inserter(shared));
            Chunk context = *by_id.at(shared.empty() ? *a->source_chunk_ids.begin() : shared.front());
            std::optional<ChunkId> second;
            if (shared.empty()) {
                second = *b->source_chunk_ids.begin();
                context.text += "\n\n" + by_id.at(*second)->text;
            }
            try {
                auto rels = probe_relations(context, {a, b}, chat, &pair_repairs[i], &calls[i]);
                if (second) {
                    const auto n_rels = rels.size();
                    for (std::size_t k = 0; k < n_rels; ++k) {
                        RawRelation copy = rels[k];
                        copy.chunk_id = *second;
                        rels.push_back(std::move(copy));
                    }
                }
                per_pair[i] = std::move(rels);
            } catch (const std::exception&) {
                // pair-level failures do not map to a single chunk; the pair is skipped
            }
        });
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            stats.llm_calls_relation += calls[i];
            stats.llm_calls_repair += pair_repairs[i];
            std::move(per_pair[i].begin(), per_pair[i].end(), std::back_inserter(raw));
        }
    }
    check_budget("relation probing");

    for (auto& r : merge_relations(std::move(raw))) g.add_relation(std::move(r));

    for (std::size_t i = 0; i < n; ++i) {
        stats.llm_calls_repair += repairs[i];
        if (failed[i]) stats.skipped_chunk_ids.push_back(chunks[i].chunk_id);
    }
    stats.n_entities = g.entities().size();
    stats.n_edges = g.relations().size();
    return {std::move(g), std::move(stats)};
}

std::vector<EntityId> lexical_entity_matches(std::string_view text, const KnowledgeGraph& g) {
    const std::string haystack = text::normalize(text);
    std::vector<EntityId> out;
    for (const auto& [id, e] : g.entities()) {
        bool hit = text::contains_word(haystack, text::normalize(e.name));
        for (auto a = e.aliases.begin(); !hit && a != e.aliases.end(); ++a) {
            hit = text::contains_word(haystack, text::normalize(*a));
        }
        if (hit) out.push_back(id);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr int kGraphFormatVersion = 1;

using nlohmann::json;

json chunk_ids_json(const std::set<ChunkId>& ids) {
    json a = json::array();
    for (auto c : ids) a.push_back(c.value);
    return a;
}

void require_keys(const json& obj, std::initializer_list<const char*> keys, const char* what) {
    if (!obj.is_object()) throw CorruptGraphFile(std::string(what) + " is not an object");
    for (const auto& [k, v] : obj.items()) {
        if (std::find_if(keys.begin(), keys.end(), [&](const char* key) { return k == key; }) == keys.end()) {
            throw CorruptGraphFile(std::string("unknown field '") + k + "' in " + what);
        }
    }
    for (const char* k : keys) {
        if (!obj.contains(k)) throw CorruptGraphFile(std::string("missing field '") + k + "' in " + what);
    }
}

std::set<ChunkId> chunk_ids_from(const json& a) {
    std::set<ChunkId> out;
    for (const auto& v : a) out.insert(ChunkId(v.get<std::uint32_t>()));
    return out;
}

}  // namespace

std::string save_graph(const KnowledgeGraph& g) {
    json entities = json::array();
    for (const auto& [id, e] : g.entities()) {
        entities.push_back({{"id", id.value},
                            {"name", e.name},
                            {"aliases", e.aliases},
                            {"description", e.description},
                            {"source_chunk_ids", chunk_ids_json(e.source_chunk_ids)}});
    }
    json relations = json::array();
    for (const auto& [id, r] : g.relations()) {
        relations.push_back({{"id", id.value},
                             {"src", r.src_entity_id.value},
                             {"dst", r.dst_entity_id.value},
                             {"label", r.label},
                             {"description", r.description},
                             {"source_chunk_ids", chunk_ids_json(r.source_chunk_ids)}});
    }
    json root = {{"version", kGraphFormatVersion},
                 {"doc_id", g.doc_id()},
                 {"entities", std::move(entities)},
                 {"relations", std::move(relations)}};
    return root.dump(2) + "\n";
}

KnowledgeGraph load_graph(std::string_view bytes) {
    json root;
    try {
        root = json::parse(bytes);
    } catch (const json::exception& e) {
        throw CorruptGraphFile(std::string("not valid JSON: ") + e.what());
    }
    try {
        require_keys(root, {"version", "doc_id", "entities", "relations"}, "graph");
        if (root["version"].get<int>() != kGraphFormatVersion) {
            throw CorruptGraphFile("unsupported graph version " + root["version"].dump());
        }
        KnowledgeGraph g(root["doc_id"].get<std::string>());
        for (const auto& e : root["entities"]) {
            require_keys(e, {"id", "name", "aliases", "description", "source_chunk_ids"}, "entity");
            g.add_entity({EntityId(e["id"].get<std::uint32_t>()), e["name"].get<std::string>(),
                          e["aliases"].get<std::set<std::string>>(), e["description"].get<std::string>(),
                          chunk_ids_from(e["source_chunk_ids"])});
        }
        for (const auto& r : root["relations"]) {
            require_keys(r, {"id", "src", "dst", "label", "description", "source_chunk_ids"}, "relation");
            g.add_relation({RelationId(r["id"].get<std::uint32_t>()), EntityId(r["src"].get<std::uint32_t>()),
                            EntityId(r["dst"].get<std::uint32_t>()), r["label"].get<std::string>(),
                            r["description"].get<std::string>(), chunk_ids_from(r["source_chunk_ids"])});
        }
        return g;
    } catch (const PreconditionViolation& e) {
        throw CorruptGraphFile(std::string("invariant violated: ") + e.what());
    } catch (const json::exception& e) {
        throw CorruptGraphFile(std::string("schema violation: ") + e.what());
    }
}

nlohmann::json stats_to_json(const GraphStats& s) {
    json skipped = json::array();
    for (auto c : s.skipped_chunk_ids) skipped.push_back(c.value);
    return {{"n_chunks", s.n_chunks},
            {"mean_chunk_len", s.mean_chunk_len},
            {"n_entities", s.n_entities},
            {"n_edges", s.n_edges},
            {"llm_calls_extraction", s.llm_calls_extraction},
            {"llm_calls_relation", s.llm_calls_relation},
            {"llm_calls_repair", s.llm_calls_repair},
            {"skipped_chunk_ids", skipped}};
}

GraphStats stats_from_json(const nlohmann::json& j) {
    GraphStats s;
    s.n_chunks = j.at("n_chunks").get<std::size_t>();
    s.mean_chunk_len = j.at("mean_chunk_len").get<double>();
    s.n_entities = j.at("n_entities").get<std::size_t>();
    s.n_edges = j.at("n_edges").get<std::size_t>();
    s.llm_calls_extraction = j.at("llm_calls_extraction").get<std::size_t>();
    s.llm_calls_relation = j.at("llm_calls_relation").get<std::size_t>();
    s.llm_calls_repair = j.value("llm_calls_repair", std::size_t{0});
    for (const auto& c : j.value("skipped_chunk_ids", json::array())) s.skipped_chunk_ids.push_back(ChunkId(c.get<std::uint32_t>()));
    return s;
}

}  // namespace gechat
