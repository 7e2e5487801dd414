#include "gechat/ask.hpp"

#include "gechat/errors.hpp"
#include "gechat/text.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace gechat {

AskParams ask_params(const EngineConfig& c) {
    return {c.k, c.alpha, c.beta, c.tau, c.min_support, c.max_chunks_per_step, c.context_k, c.length_mode};
}

AskParams apply_overrides(AskParams p, const nlohmann::json& req) {
    auto number = [&](const char* key, double& field) {
        if (!req.contains(key) || req[key].is_null()) return;
        if (!req[key].is_number()) throw PreconditionViolation(std::string(key) + " must be a number");
        field = req[key].get<double>();
        if (!std::isfinite(field)) throw PreconditionViolation(std::string(key) + " must be finite");
    };
    if (req.contains("k") && !req["k"].is_null()) {
        if (!req["k"].is_number_unsigned()) throw PreconditionViolation("k must be a non-negative integer");
        p.k = req["k"].get<std::size_t>();
    }
    number("alpha", p.alpha);
    number("beta", p.beta);
    number("tau", p.tau);
    number("min_support", p.min_support);
    if (p.alpha < 0 || p.beta < 0) throw PreconditionViolation("alpha and beta must be non-negative");
    return p;
}

Clock steady_clock_ms() {
    return [] {
        using namespace std::chrono;
        return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
    };
}

Clock frozen_clock() {
    return [] { return 0.0; };
}

AskResponse ask_question(const Document& doc, const std::vector<Chunk>& chunks, const KnowledgeGraph& g,
                         const std::string& question, const Providers& providers, const AskParams& params,
                         const SegmenterOptions& segmenter, const Clock& clock) {
    if (text::trim(question).empty()) throw PreconditionViolation("question is empty");
    AskResponse r;
    r.doc_id = doc.doc_id();
    r.question = question;
    r.effective = params;
    const double t0 = clock();

    CoTAnswer cot;
    try {
        const auto pack = build_context_pack(question, g, chunks, params.context_k);
        cot = parse_cot_response(providers.chat->chat(render_cot_prompt(question, pack.text)), segmenter);
    } catch (const ProviderError& e) {
        throw StageError("cot", e.what());
    } catch (const EmptyReply& e) {
        throw StageError("cot", e.what());
    }
    const double t1 = clock();

    GroundingOptions grounding;
    grounding.k = params.k;
    grounding.max_chunks_per_step = params.max_chunks_per_step;
    grounding.match.tau = params.tau;
    std::vector<ChunkEvidencePool> pools;
    try {
        pools = ground_steps(cot, g, *providers.embed, grounding);
    } catch (const ProviderError& e) {
        throw StageError("subgraph", e.what());
    }
    const double t2 = clock();

    EvidenceOptions ev;
    ev.alpha = params.alpha;
    ev.beta = params.beta;
    ev.min_support = params.min_support;
    ev.length_mode = params.length_mode;
    ev.segmenter = segmenter;
    NliCache cache;
    for (const auto& sentence : cot.answer_sentences) {
        EvidenceSelection sel;
        try {
            sel = select_evidence(sentence, pools, chunks, *providers.nli, ev, &cache);
        } catch (const ProviderError& e) {
            throw StageError("nli", e.what());
        }
        AnswerEvidence out;
        out.answer_sentence = sentence;
        out.support_status = sel.support_status;
        for (const auto& span : sel.combined) {
            ScoredSpan s{span, 0.0, -std::numeric_limits<double>::infinity()};
            for (const auto& chosen : sel.per_step) {
                if (chosen && chosen->sentence.char_start == span.char_start && chosen->sentence.char_end == span.char_end) {
                    s.p_ent = chosen->p_ent;
                    s.score = std::max(s.score, chosen->score);
                }
            }
            out.spans.push_back(std::move(s));
        }
        r.evidence.push_back(std::move(out));
    }
    const double t3 = clock();

    r.answer_text = cot.answer_text;
    r.steps = cot.steps;
    r.parse_warning = cot.parse_warning;
    for (const auto& p : pools) {
        if (p.ungrounded) r.ungrounded_steps.push_back(p.for_step);
    }
    r.timing_ms = {{"cot", t1 - t0}, {"subgraph", t2 - t1}, {"nli", t3 - t2}, {"total", t3 - t0}};
    return r;
}

bool spans_are_verbatim(const AskResponse& r, const Document& doc) {
    for (const auto& ev : r.evidence) {
        for (const auto& s : ev.spans) {
            if (s.span.char_end > doc.char_len() || s.span.char_start >= s.span.char_end) return false;
            if (doc.slice(s.span.char_start, s.span.char_end) != s.span.text) return false;
        }
    }
    return true;
}

nlohmann::json to_json(const AskResponse& r) {
    using nlohmann::json;
    json evidence = json::array();
    for (const auto& ev : r.evidence) {
        json spans = json::array();
        for (const auto& s : ev.spans) {
            spans.push_back({{"chunk_id", s.span.chunk_id.value},
                             {"char_start", s.span.char_start},
                             {"char_end", s.span.char_end},
                             {"text", s.span.text},
                             {"p_ent", s.p_ent},
                             {"score", s.score}});
        }
        evidence.push_back({{"answer_sentence", ev.answer_sentence},
                            {"spans", std::move(spans)},
                            {"support_status", to_string(ev.support_status)}});
    }
    const auto& p = r.effective;
    return {{"doc_id", r.doc_id},
            {"question", r.question},
            {"answer_text", r.answer_text},
            {"steps", r.steps},
            {"evidence", std::move(evidence)},
            {"ungrounded_steps", r.ungrounded_steps},
            {"timing", r.timing_ms},
            {"metadata",
             {{"parse_warning", r.parse_warning},
              {"effective_config",
               {{"k", p.k},
                {"alpha", p.alpha},
                {"beta", p.beta},
                {"tau", p.tau},
                {"min_support", p.min_support},
                {"max_chunks_per_step", p.max_chunks_per_step},
                {"context_k", p.context_k},
                {"length_mode", to_string(p.length_mode)}}}}}};
}

}  // namespace gechat
