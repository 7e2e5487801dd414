#include "doctest.h"

#include "gechat/errors.hpp"
#include "gechat/evidence.hpp"
#include "oracles.hpp"

#include <atomic>
#include <cmath>
#include <random>

using namespace gechat;

namespace {

EvidenceCandidate cand(std::size_t start, std::size_t len, double score) {
    EvidenceCandidate c;
    c.sentence.char_start = start;
    c.sentence.char_end = start + len;
    c.score = score;
    return c;
}

class CountingNli final : public NliProvider {
public:
    NliLogits nli_logits(const std::string& premise, const std::string& hypothesis) const override {
        ++calls;
        return inner.nli_logits(premise, hypothesis);
    }
    std::string name() const override { return "counting"; }
    ScriptedNli inner{NliFallback::token_overlap};
    mutable std::atomic<int> calls{0};
};

}  // namespace

TEST_SUITE("evidence") {

TEST_CASE("softmax reference values") {
    const auto u = softmax_scores({0, 0, 0});
    CHECK(std::abs(u.p_cont - 1.0 / 3) < 1e-15);
    CHECK(std::abs(u.p_ent - 1.0 / 3) < 1e-15);
    const auto l = softmax_scores({0, 0, std::log(2.0)});
    CHECK(std::abs(l.p_ent - 0.5) < 1e-15);
    CHECK(std::abs(l.p_neut - 0.25) < 1e-15);
    const auto big = softmax_scores({1000, 0, 1000});
    CHECK(std::abs(big.p_ent - 0.5) < 1e-15);
    CHECK(std::isfinite(big.p_neut));
    CHECK(u.logit_ent == 0.0);
}

TEST_CASE("score matches the long double oracle") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> p(0, 1), w(0, 2);
    for (int i = 0; i < 200; ++i) {
        const double a = p(rng), b = p(rng), al = w(rng), be = w(rng);
        CHECK(std::abs(score_sentence(a, b, al, be) - static_cast<double>(oracle::score(a, b, al, be))) < 1e-12);
    }
    static_assert(score_sentence(1.0, 0.5, 0.5, 0.5) == 0.25);
}

TEST_CASE("select_best ties: earliest offset, then shorter") {
    std::vector<EvidenceCandidate> c = {cand(10, 5, 0.3), cand(4, 9, 0.3), cand(4, 3, 0.3), cand(0, 2, 0.1)};
    CHECK(select_best_index(c) == 2);
    c.push_back(cand(50, 1, 0.31));
    CHECK(select_best_index(c) == 4);
    CHECK_THROWS_AS(select_best(std::span<const EvidenceCandidate>{}), NoCandidates);
}

TEST_CASE("select_best equals exhaustive scan") {
    std::mt19937 rng(9);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<EvidenceCandidate> c;
        const std::size_t n = 1 + rng() % 30;
        for (std::size_t i = 0; i < n; ++i) c.push_back(cand(rng() % 10, 1 + rng() % 4, (rng() % 4) * 0.25));
        CHECK(select_best_index(c) == oracle::best_index(c));
    }
}

TEST_CASE("select_evidence picks per-step maxima and derives status") {
    const std::string text =
        "The catalase enzyme splits peroxide. Unrelated words fill this sentence entirely. "
        "Catalase splits peroxide into water. Bananas are yellow.";
    const auto doc = load_document("e.txt", text);
    const auto chunks = chunk_document(doc, {60, 10});
    ChunkEvidencePool all;
    for (const auto& c : chunks) all.chunk_ids.push_back(c.chunk_id);
    ChunkEvidencePool ungrounded;
    ungrounded.ungrounded = true;
    ungrounded.for_step = 1;

    CountingNli nli;
    NliCache cache;
    const auto sel = select_evidence("catalase splits peroxide", {all, ungrounded, all}, chunks, nli, {}, &cache);
    REQUIRE(sel.per_step.size() == 3);
    CHECK_FALSE(sel.per_step[1].has_value());
    REQUIRE(sel.per_step[0].has_value());
    CHECK(sel.per_step[0]->sentence == sel.per_step[2]->sentence);
    CHECK(sel.combined.size() == 1);
    CHECK(std::string(doc.slice(sel.combined[0].char_start, sel.combined[0].char_end)) == sel.combined[0].text);
    CHECK(sel.support_status == SupportStatus::partial);
    // each distinct sentence is scored once across both grounded steps
    const auto sentences = pool_sentences(all, chunks);
    CHECK(nli.calls == static_cast<int>(sentences.size()));
    CHECK(cache.size() == sentences.size());

    const auto again = select_evidence("catalase splits peroxide", {all}, chunks, nli, {}, &cache);
    CHECK(nli.calls == static_cast<int>(sentences.size()));
    CHECK(again.support_status == SupportStatus::supported);

    EvidenceOptions strict;
    strict.min_support = 0.999;
    CHECK(select_evidence("catalase splits peroxide", {all}, chunks, nli, strict).support_status ==
          SupportStatus::unsupported);
}

TEST_CASE("beta trades entailment against length") {
    const std::string text = "Catalase splits peroxide. Catalase splits peroxide into water and oxygen in cells of the liver.";
    const auto doc = load_document("e.txt", text);
    const auto chunks = chunk_document(doc);
    ChunkEvidencePool pool;
    pool.chunk_ids = {ChunkId(0)};
    ScriptedNli nli(NliFallback::none);
    nli.add_pair("Catalase splits peroxide.", "h", {0, 0, 1});
    nli.add_pair("Catalase splits peroxide into water and oxygen in cells of the liver.", "h", {0, 0, 3});
    EvidenceOptions o;
    o.beta = 0.0;
    CHECK(select_evidence("h", {pool}, chunks, nli, o).combined.at(0).text.size() > 30);
    o.beta = 2.0;
    CHECK(select_evidence("h", {pool}, chunks, nli, o).combined.at(0).text == "Catalase splits peroxide.");
}

TEST_CASE("NLI errors propagate") {
    const auto doc = load_document("e.txt", "One. Two.");
    const auto chunks = chunk_document(doc);
    ChunkEvidencePool pool;
    pool.chunk_ids = {ChunkId(0)};
    ScriptedNli none(NliFallback::none);
    CHECK_THROWS_AS(select_evidence("h", {pool}, chunks, none), MockMiss);
}

}
