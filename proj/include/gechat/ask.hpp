#pragma once

#include "gechat/config.hpp"
#include "gechat/cot.hpp"
#include "gechat/evidence.hpp"
#include "gechat/ingest.hpp"
#include "gechat/kg.hpp"
#include "gechat/providers.hpp"
#include "gechat/subgraph.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace gechat {

/// Per-request algorithm knobs; start from ask_params(config) and override.
struct AskParams {
    std::size_t k = 2;
    double alpha = 0.5;
    double beta = 0.5;
    double tau = 0.80;
    double min_support = 0.5;
    std::size_t max_chunks_per_step = 6;
    std::size_t context_k = 8;
    LengthMode length_mode = LengthMode::pool_normalized;
};

AskParams ask_params(const EngineConfig& c);

/// Applies the optional keys k, alpha, beta, tau, min_support of a request body.
/// Throws PreconditionViolation on ill-typed or out-of-range values.
AskParams apply_overrides(AskParams p, const nlohmann::json& request);

struct ScoredSpan {
    SentenceSpan span;
    double p_ent = 0.0;
    double score = 0.0;
};

struct AnswerEvidence {
    std::string answer_sentence;
    std::vector<ScoredSpan> spans;
    SupportStatus support_status = SupportStatus::unsupported;
};

struct AskResponse {
    std::string doc_id;
    std::string question;
    std::string answer_text;
    std::vector<std::string> steps;
    std::vector<AnswerEvidence> evidence;
    std::vector<std::size_t> ungrounded_steps;
    std::map<std::string, double> timing_ms;
    bool parse_warning = false;
    AskParams effective;
};

/// Milliseconds since an arbitrary epoch.
using Clock = std::function<double()>;
Clock steady_clock_ms();
Clock frozen_clock();

/// Reasoning call, per-step grounding, then per-answer-sentence evidence selection.
/// Provider failures surface as StageError with stage "cot", "subgraph" or "nli".
AskResponse ask_question(const Document& doc, const std::vector<Chunk>& chunks, const KnowledgeGraph& g,
                         const std::string& question, const Providers& providers, const AskParams& params,
                         const SegmenterOptions& segmenter = {}, const Clock& clock = steady_clock_ms());

/// true iff every evidence span re-slices verbatim from `doc`.
bool spans_are_verbatim(const AskResponse& r, const Document& doc);

nlohmann::json to_json(const AskResponse& r);

}  // namespace gechat
