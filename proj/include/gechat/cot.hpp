#pragma once

#include "gechat/ingest.hpp"
#include "gechat/kg.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gechat {

struct CoTAnswer {
    std::string answer_text;
    std::vector<std::string> answer_sentences;
    std::vector<std::string> steps;
    std::string raw_reply;
    /// Set when the reply deviated from the output format and a fallback was used.
    bool parse_warning = false;
};

/// Retrieved context handed to the reasoning call.
struct ContextPack {
    std::vector<ChunkId> chunk_ids;
    std::vector<std::string> relation_lines;
    std::string text;
};

/// Top-`top_k` chunks by number of question entities they contain, plus the relations touching
/// those entities. Falls back to the leading chunks when the question names no known entity.
ContextPack build_context_pack(std::string_view question, const KnowledgeGraph& g, const std::vector<Chunk>& chunks,
                               std::size_t top_k = 8);

std::string render_cot_prompt(std::string_view question, std::string_view context);

/// Total over non-blank input: malformed replies degrade with parse_warning. Throws EmptyReply.
CoTAnswer parse_cot_response(std::string_view raw_reply, const SegmenterOptions& segmenter = {});

/// Canonical reply text for (answer, steps); parse_cot_response inverts it.
std::string render_cot_reply(std::string_view answer, const std::vector<std::string>& steps);

}  // namespace gechat
