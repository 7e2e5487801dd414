#include "gechat/cot.hpp"

#include "gechat/errors.hpp"
#include "gechat/text.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace gechat {

ContextPack build_context_pack(std::string_view question, const KnowledgeGraph& g, const std::vector<Chunk>& chunks,
                               std::size_t top_k) {
    const auto matched = lexical_entity_matches(question, g);
    std::map<ChunkId, std::size_t> hits;
    for (auto id : matched) {
        for (auto c : g.entity(id).source_chunk_ids) ++hits[c];
    }
    std::vector<std::pair<ChunkId, std::size_t>> ranked(hits.begin(), hits.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

    ContextPack pack;
    for (const auto& [id, count] : ranked) {
        if (pack.chunk_ids.size() == top_k) break;
        pack.chunk_ids.push_back(id);
    }
    if (pack.chunk_ids.empty()) {
        for (std::size_t i = 0; i < chunks.size() && i < top_k; ++i) pack.chunk_ids.push_back(chunks[i].chunk_id);
    }
    std::sort(pack.chunk_ids.begin(), pack.chunk_ids.end());

    std::set<RelationId> rels;
    for (auto id : matched) {
        for (const auto& nb : g.neighbors(id)) rels.insert(nb.relation_id);
    }
    for (auto rid : rels) {
        const Relation& r = g.relation(rid);
        std::string line = g.entity(r.src_entity_id).name + " --" + r.label + "--> " + g.entity(r.dst_entity_id).name;
        if (!r.description.empty()) line += ": " + r.description;
        pack.relation_lines.push_back(std::move(line));
    }

    std::map<ChunkId, const Chunk*> by_id;
    for (const auto& c : chunks) by_id.emplace(c.chunk_id, &c);
    std::ostringstream out;
    for (auto id : pack.chunk_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) continue;
        out << "[Chunk " << id.value << "]\n" << it->second->text << "\n\n";
    }
    if (!pack.relation_lines.empty()) {
        out << "[Relations]\n";
        for (const auto& l : pack.relation_lines) out << "- " << l << "\n";
    }
    pack.text = out.str();
    return pack;
}

std::string render_cot_prompt(std::string_view question, std::string_view context) {
    if (text::trim(question).empty()) throw PreconditionViolation("question is empty");
    std::string p;
    p += "<<INST>><<SYS>>\n";
    p += "You are an agent to provide question answering tasks based on the provided document.\n\n";
    p += "[Task]\n";
    p += "Your task is to generate answers to the user's question, please think step-by-step for the conclusion, "
         "and provide your thinking steps behind the output.\n\n";
    p += "[Output Format]\n";
    p += "Answer: { [text] }\n";
    p += "Thoughts: {1.[text] 2.[text] 3.[text] ... n.[text]}\n\n";
    p += "[Document]\n";
    p += context;
    if (!context.empty() && context.back() != '\n') p += '\n';
    p += "\n[Question]\n";
    p += question;
    p += "\n";
    return p;
}

namespace {

bool is_ascii_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::size_t find_ci(std::string_view hay, std::string_view needle, std::size_t from = 0) {
    if (needle.size() > hay.size()) return std::string_view::npos;
    for (std::size_t i = from; i + needle.size() <= hay.size(); ++i) {
        bool ok = true;
        for (std::size_t k = 0; k < needle.size() && ok; ++k) {
            ok = std::tolower(static_cast<unsigned char>(hay[i + k])) == std::tolower(static_cast<unsigned char>(needle[k]));
        }
        if (ok) return i;
    }
    return std::string_view::npos;
}

std::string unescape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) ++i;
        out.push_back(s[i]);
    }
    return out;
}

std::string escape_braces(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '\\' || c == '{' || c == '}') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

// Also escapes '.' / ')' after a leading-whitespace digit run, so content never looks like an item marker.
std::string escape_step(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c == '\\' || c == '{' || c == '}') {
            out.push_back('\\');
            out.push_back(c);
            continue;
        }
        if ((c == '.' || c == ')') && i > 0 && is_digit(s[i - 1])) {
            std::size_t j = i;
            while (j > 0 && is_digit(s[j - 1])) --j;
            if (j == 0 || is_ascii_space(s[j - 1])) out.push_back('\\');
        }
        out.push_back(c);
    }
    return out;
}

struct Block {
    std::string_view content;  // still escaped
    std::size_t end = 0;       // index just past the closing brace
    bool balanced = false;
};

// Brace block starting at the first '{' at or after `from`, closed at the first balanced '}'.
std::optional<Block> brace_block(std::string_view s, std::size_t from) {
    std::size_t open = from;
    while (open < s.size() && is_ascii_space(s[open])) ++open;
    if (open >= s.size() || s[open] != '{') return std::nullopt;
    int depth = 0;
    for (std::size_t i = open; i < s.size(); ++i) {
        if (s[i] == '\\') {
            ++i;
            continue;
        }
        if (s[i] == '{') ++depth;
        if (s[i] == '}' && --depth == 0) return Block{s.substr(open + 1, i - open - 1), i + 1, true};
    }
    return Block{s.substr(open + 1), s.size(), false};
}

struct Marker {
    std::size_t begin;  // first digit
    std::size_t end;    // past the '.' or ')'
};

std::vector<Marker> find_markers(std::string_view s) {
    std::vector<Marker> out;
    long prev = -1;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!is_digit(s[i]) || (i > 0 && (is_digit(s[i - 1]) || !is_ascii_space(s[i - 1])))) continue;
        std::size_t j = i;
        while (j < s.size() && is_digit(s[j]) && j - i < 4) ++j;
        if (j >= s.size() || (s[j] != '.' && s[j] != ')')) continue;
        if (j + 1 < s.size() && is_digit(s[j + 1])) continue;  // decimal number, not a marker
        const long value = std::stol(std::string(s.substr(i, j - i)));
        const bool plausible = prev < 0 ? value <= 9 : (value > prev && value <= prev + 9);
        if (!plausible) continue;
        out.push_back({i, j + 1});
        prev = value;
        i = j;
    }
    return out;
}

std::string trimmed(std::string_view s) { return std::string(text::trim(s)); }

}  // namespace

CoTAnswer parse_cot_response(std::string_view raw, const SegmenterOptions& segmenter) {
    if (text::trim(raw).empty()) throw EmptyReply();
    CoTAnswer out;
    out.raw_reply = std::string(raw);

    std::size_t cursor = 0;
    const std::size_t answer_label = find_ci(raw, "answer:");
    if (answer_label != std::string_view::npos) {
        const std::size_t after = answer_label + 7;
        if (auto block = brace_block(raw, after)) {
            out.answer_text = trimmed(unescape(block->content));
            out.parse_warning |= !block->balanced;
            cursor = block->end;
        } else {
            const std::size_t stop = find_ci(raw, "thoughts:", after);
            out.answer_text = trimmed(raw.substr(after, stop == std::string_view::npos ? raw.size() - after : stop - after));
            out.parse_warning = true;
            cursor = stop == std::string_view::npos ? raw.size() : stop;
        }
    } else {
        out.parse_warning = true;
    }

    const std::size_t thoughts_label = find_ci(raw, "thoughts:", cursor);
    if (answer_label == std::string_view::npos) {
        const std::size_t stop = thoughts_label == std::string_view::npos ? raw.size() : thoughts_label;
        out.answer_text = trimmed(raw.substr(0, stop));
    }

    if (thoughts_label != std::string_view::npos) {
        const std::size_t after = thoughts_label + 9;
        std::string_view content;
        if (auto block = brace_block(raw, after)) {
            content = block->content;
            out.parse_warning |= !block->balanced;
        } else {
            content = raw.substr(after);
            out.parse_warning = true;
        }
        const auto markers = find_markers(content);
        if (markers.empty()) {
            if (auto single = trimmed(unescape(content)); !single.empty()) out.steps.push_back(std::move(single));
            out.parse_warning = true;
        } else {
            if (!text::trim(content.substr(0, markers.front().begin)).empty()) out.parse_warning = true;
            for (std::size_t k = 0; k < markers.size(); ++k) {
                const std::size_t from = markers[k].end;
                const std::size_t to = k + 1 < markers.size() ? markers[k + 1].begin : content.size();
                auto step = trimmed(unescape(content.substr(from, to - from)));
                if (!step.empty()) out.steps.push_back(std::move(step));
            }
        }
    }

    if (out.answer_text.empty() && !out.steps.empty()) {
        out.answer_text = out.steps.back();
        out.parse_warning = true;
    }
    if (out.answer_text.empty()) {
        out.answer_text = trimmed(raw);
        out.parse_warning = true;
    }
    if (out.steps.empty()) {
        out.steps.push_back(out.answer_text);
        out.parse_warning = true;
    }
    for (auto& s : segment_text(out.answer_text, 0, ChunkId{}, segmenter)) out.answer_sentences.push_back(std::move(s.text));
    return out;
}

std::string render_cot_reply(std::string_view answer, const std::vector<std::string>& steps) {
    std::string out = "Answer: {" + escape_braces(answer) + "}\nThoughts: {";
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (i > 0) out += ' ';
        out += std::to_string(i + 1) + ". " + escape_step(steps[i]);
    }
    out += "}";
    return out;
}

}  // namespace gechat
