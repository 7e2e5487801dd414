#pragma once
// Reference implementations used only by tests. Each one is written the slow, obvious
// way and shares no code with the library beyond plain data types.

#include "gechat/evidence.hpp"
#include "gechat/kg.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace oracle {

/// Softmax in long double without max subtraction; fine for the logit ranges tested.
inline std::vector<long double> softmax(const std::vector<long double>& logits) {
    long double z = 0.0L;
    for (auto l : logits) z += std::exp(l);
    std::vector<long double> out;
    for (auto l : logits) out.push_back(std::exp(l) / z);
    return out;
}

inline long double score(long double p_ent, long double length, long double alpha, long double beta) {
    return alpha * p_ent - beta * length;
}

/// Exhaustive argmax: highest score, then lowest char_start, then fewest scalars.
inline std::size_t best_index(const std::vector<gechat::EvidenceCandidate>& c) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < c.size(); ++i) {
        const auto& a = c[i];
        const auto& b = c[best];
        const auto len_a = a.sentence.char_end - a.sentence.char_start;
        const auto len_b = b.sentence.char_end - b.sentence.char_start;
        bool better = false;
        if (a.score != b.score) better = a.score > b.score;
        else if (a.sentence.char_start != b.sentence.char_start) better = a.sentence.char_start < b.sentence.char_start;
        else better = len_a < len_b;
        if (better) best = i;
    }
    return best;
}

/// All-pairs shortest hop counts by repeated relaxation over an adjacency matrix.
struct BfsResult {
    std::map<std::uint32_t, std::size_t> hop_of;
    std::set<std::uint32_t> relations;
};

inline BfsResult k_hop(std::size_t n_nodes, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges,
                       const std::set<std::uint32_t>& seeds, std::size_t k) {
    constexpr std::size_t inf = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> dist(n_nodes, inf);
    for (auto s : seeds) dist[s] = 0;
    for (std::size_t round = 0; round < n_nodes; ++round) {
        bool changed = false;
        for (const auto& [u, v] : edges) {
            if (dist[u] != inf && dist[u] + 1 < dist[v]) { dist[v] = dist[u] + 1; changed = true; }
            if (dist[v] != inf && dist[v] + 1 < dist[u]) { dist[u] = dist[v] + 1; changed = true; }
        }
        if (!changed) break;
    }
    BfsResult r;
    for (std::uint32_t i = 0; i < n_nodes; ++i) {
        if (dist[i] <= k) r.hop_of[i] = dist[i];
    }
    for (std::uint32_t e = 0; e < edges.size(); ++e) {
        if (r.hop_of.contains(edges[e].first) && r.hop_of.contains(edges[e].second)) r.relations.insert(e);
    }
    return r;
}

/// Byte offset of the n-th Unicode scalar in valid UTF-8 (n may equal the scalar count).
inline std::size_t byte_of_scalar(std::string_view s, std::size_t n) {
    std::size_t seen = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto b = static_cast<unsigned char>(s[i]);
        if ((b & 0xC0) != 0x80) {
            if (seen == n) return i;
            ++seen;
        }
    }
    if (seen == n) return s.size();
    throw std::out_of_range("scalar index past the end");
}

inline std::string reslice(std::string_view s, std::size_t start, std::size_t end) {
    const auto b = byte_of_scalar(s, start);
    const auto e = byte_of_scalar(s, end);
    return std::string(s.substr(b, e - b));
}

/// Mean of doubles accumulated in long double.
inline long double mean(const std::vector<double>& v) {
    long double s = 0.0L;
    for (auto x : v) s += x;
    return v.empty() ? 0.0L : s / static_cast<long double>(v.size());
}

}  // namespace oracle
