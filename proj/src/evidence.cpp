#include "gechat/evidence.hpp"

#include "gechat/errors.hpp"
#include "gechat/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>

namespace gechat {

const char* to_string(SupportStatus s) noexcept {
    switch (s) {
        case SupportStatus::supported: return "supported";
        case SupportStatus::partial: return "partial";
        case SupportStatus::unsupported: return "unsupported";
    }
    return "unsupported";
}

EntailmentScore softmax_scores(const NliLogits& l) noexcept {
    const double m = std::max({l.contradiction, l.neutral, l.entailment});
    const double ec = std::exp(l.contradiction - m);
    const double en = std::exp(l.neutral - m);
    const double ee = std::exp(l.entailment - m);
    const double z = ec + en + ee;
    return {l.contradiction, l.neutral, l.entailment, ec / z, en / z, ee / z};
}

EntailmentScore entailment_probability(const std::string& premise, const std::string& hypothesis,
                                       const NliProvider& nli) {
    if (premise.empty() || hypothesis.empty()) throw PreconditionViolation("NLI premise and hypothesis must be non-empty");
    const NliLogits l = nli.nli_logits(premise, hypothesis);
    if (!std::isfinite(l.contradiction) || !std::isfinite(l.neutral) || !std::isfinite(l.entailment)) {
        throw ProviderError(ProviderErrorKind::permanent, "NLI provider returned a non-finite logit");
    }
    return softmax_scores(l);
}

std::size_t select_best_index(std::span<const EvidenceCandidate> c) {
    if (c.empty()) throw NoCandidates();
    std::size_t best = 0;
    for (std::size_t i = 1; i < c.size(); ++i) {
        const auto& a = c[i];
        const auto& b = c[best];
        if (a.score != b.score) {
            if (a.score > b.score) best = i;
            continue;
        }
        if (a.sentence.char_start != b.sentence.char_start) {
            if (a.sentence.char_start < b.sentence.char_start) best = i;
            continue;
        }
        const auto la = a.sentence.char_end - a.sentence.char_start;
        const auto lb = b.sentence.char_end - b.sentence.char_start;
        if (la < lb) best = i;
    }
    return best;
}

const EvidenceCandidate& select_best(std::span<const EvidenceCandidate> candidates) {
    return candidates[select_best_index(candidates)];
}

std::optional<EntailmentScore> NliCache::find(const SentenceSpan& s, const std::string& hypothesis) const {
    std::lock_guard lock(mu_);
    auto it = scores_.find({s.char_start, s.char_end, hypothesis});
    if (it == scores_.end()) return std::nullopt;
    return it->second;
}

void NliCache::put(const SentenceSpan& s, const std::string& hypothesis, const EntailmentScore& e) {
    std::lock_guard lock(mu_);
    scores_.insert_or_assign({s.char_start, s.char_end, hypothesis}, e);
}

std::size_t NliCache::size() const {
    std::lock_guard lock(mu_);
    return scores_.size();
}

std::vector<SentenceSpan> pool_sentences(const ChunkEvidencePool& pool, const std::vector<Chunk>& chunks,
                                         const SegmenterOptions& segmenter) {
    std::map<ChunkId, const Chunk*> by_id;
    for (const auto& c : chunks) by_id.emplace(c.chunk_id, &c);
    std::vector<SentenceSpan> out;
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (auto id : pool.chunk_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw NotFound("pooled chunk " + std::to_string(id.value) + " is not in the document");
        for (auto& s : segment_sentences(*it->second, segmenter)) {
            if (seen.emplace(s.char_start, s.char_end).second) out.push_back(std::move(s));
        }
    }
    return out;
}

EvidenceSelection select_evidence(const std::string& answer_sentence, const std::vector<ChunkEvidencePool>& pools,
                                  const std::vector<Chunk>& chunks, const NliProvider& nli,
                                  const EvidenceOptions& options, NliCache* cache) {
    EvidenceSelection sel;
    sel.answer_sentence = answer_sentence;
    NliCache local;
    NliCache& memo = cache ? *cache : local;

    std::vector<std::vector<SentenceSpan>> per_step(pools.size());
    std::vector<SentenceSpan> todo;
    std::set<std::pair<std::size_t, std::size_t>> queued;
    for (std::size_t i = 0; i < pools.size(); ++i) {
        if (pools[i].ungrounded) continue;
        per_step[i] = pool_sentences(pools[i], chunks, options.segmenter);
        for (const auto& s : per_step[i]) {
            if (!memo.find(s, answer_sentence) && queued.emplace(s.char_start, s.char_end).second) todo.push_back(s);
        }
    }

    std::vector<std::exception_ptr> errors(todo.size());
    parallel_for(todo.size(), options.parallelism, [&](std::size_t i) {
        try {
            memo.put(todo[i], answer_sentence, entailment_probability(todo[i].text, answer_sentence, nli));
        } catch (...) {
            errors[i] = std::current_exception();
        }
    });
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::size_t supported_steps = 0;
    std::set<std::pair<std::size_t, std::size_t>> combined_keys;
    for (std::size_t i = 0; i < pools.size(); ++i) {
        if (per_step[i].empty()) {
            sel.per_step.emplace_back(std::nullopt);
            continue;
        }
        std::size_t longest = 0;
        for (const auto& s : per_step[i]) longest = std::max(longest, s.char_end - s.char_start);
        std::vector<EvidenceCandidate> cands;
        cands.reserve(per_step[i].size());
        for (const auto& s : per_step[i]) {
            const double len = static_cast<double>(s.char_end - s.char_start);
            const double norm = options.length_mode == LengthMode::pool_normalized
                                    ? len / static_cast<double>(longest)
                                    : len;
            const double p = memo.find(s, answer_sentence)->p_ent;
            cands.push_back({s, p, norm, score_sentence(p, norm, options.alpha, options.beta)});
        }
        const EvidenceCandidate& best = select_best(cands);
        if (best.p_ent >= options.min_support) ++supported_steps;
        if (combined_keys.emplace(best.sentence.char_start, best.sentence.char_end).second) {
            sel.combined.push_back(best.sentence);
        }
        sel.per_step.emplace_back(best);
    }
    std::sort(sel.combined.begin(), sel.combined.end(), [](const SentenceSpan& a, const SentenceSpan& b) {
        return std::tie(a.char_start, a.char_end) < std::tie(b.char_start, b.char_end);
    });
    if (!pools.empty() && supported_steps == pools.size()) sel.support_status = SupportStatus::supported;
    else if (supported_steps == 0) sel.support_status = SupportStatus::unsupported;
    else sel.support_status = SupportStatus::partial;
    return sel;
}

}  // namespace gechat
