#pragma once

#include "gechat/ingest.hpp"
#include "gechat/providers.hpp"
#include "gechat/subgraph.hpp"

#include <cstddef>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace gechat {

struct EntailmentScore {
    double logit_cont = 0.0;
    double logit_neut = 0.0;
    double logit_ent = 0.0;
    double p_cont = 0.0;
    double p_neut = 0.0;
    double p_ent = 0.0;
};

struct EvidenceCandidate {
    SentenceSpan sentence;
    double p_ent = 0.0;
    double norm_len = 0.0;
    double score = 0.0;
};

enum class SupportStatus { supported, partial, unsupported };
const char* to_string(SupportStatus s) noexcept;

/// pool_normalized: length / longest candidate in the pool, in (0, 1].
/// chars_raw: raw scalar count, taken literally.
enum class LengthMode { pool_normalized, chars_raw };

struct EvidenceOptions {
    double alpha = 0.5;
    double beta = 0.5;
    double min_support = 0.5;
    LengthMode length_mode = LengthMode::pool_normalized;
    std::size_t parallelism = 4;
    SegmenterOptions segmenter;
};

struct EvidenceSelection {
    std::string answer_sentence;
    std::vector<std::optional<EvidenceCandidate>> per_step;  // empty optional: step ungrounded
    std::vector<SentenceSpan> combined;                       // deduplicated, document order
    SupportStatus support_status = SupportStatus::unsupported;
};

/// Max-subtracted softmax over (contradiction, neutral, entailment).
EntailmentScore softmax_scores(const NliLogits& logits) noexcept;

/// premise = candidate sentence, hypothesis = answer sentence.
EntailmentScore entailment_probability(const std::string& premise, const std::string& hypothesis,
                                       const NliProvider& nli);

/// alpha * p_ent - beta * length
constexpr double score_sentence(double p_ent, double length, double alpha, double beta) noexcept {
    return alpha * p_ent - beta * length;
}

/// Highest score; ties go to the earliest document offset, then the shorter sentence.
std::size_t select_best_index(std::span<const EvidenceCandidate> candidates);
const EvidenceCandidate& select_best(std::span<const EvidenceCandidate> candidates);

/// Request-scoped memo of NLI results keyed by (span, hypothesis).
class NliCache {
public:
    std::optional<EntailmentScore> find(const SentenceSpan& s, const std::string& hypothesis) const;
    void put(const SentenceSpan& s, const std::string& hypothesis, const EntailmentScore& e);
    std::size_t size() const;

private:
    using Key = std::tuple<std::size_t, std::size_t, std::string>;
    mutable std::mutex mu_;
    std::map<Key, EntailmentScore> scores_;
};

/// Sentences of each pooled chunk, deduplicated by span, in pool order.
std::vector<SentenceSpan> pool_sentences(const ChunkEvidencePool& pool, const std::vector<Chunk>& chunks,
                                         const SegmenterOptions& segmenter = {});

EvidenceSelection select_evidence(const std::string& answer_sentence, const std::vector<ChunkEvidencePool>& pools,
                                  const std::vector<Chunk>& chunks, const NliProvider& nli,
                                  const EvidenceOptions& options = {}, NliCache* cache = nullptr);

}  // namespace gechat
