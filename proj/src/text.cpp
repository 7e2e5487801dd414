#include "gechat/text.hpp"

#include "gechat/errors.hpp"

#include <cstdio>

namespace gechat::text {
namespace {

constexpr char32_t kReplacement = 0xFFFD;

bool is_cont(unsigned char b) { return (b & 0xC0) == 0x80; }

// Returns byte length of a well-formed sequence at pos, or 0.
std::size_t valid_seq_len(std::string_view s, std::size_t pos, char32_t& out) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    const std::size_t left = s.size() - pos;
    if (b0 < 0x80) {
        out = b0;
        return 1;
    }
    std::size_t len = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2, cp = b0 & 0x1F, min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3, cp = b0 & 0x0F, min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4, cp = b0 & 0x07, min = 0x10000;
    } else {
        return 0;
    }
    if (left < len) return 0;
    for (std::size_t i = 1; i < len; ++i) {
        const auto b = static_cast<unsigned char>(s[pos + i]);
        if (!is_cont(b)) return 0;
        cp = (cp << 6) | (b & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
    out = cp;
    return len;
}

bool is_word_byte(unsigned char b) {
    return b >= 0x80 || (b >= '0' && b <= '9') || (b >= 'a' && b <= 'z') || (b >= 'A' && b <= 'Z');
}

}  // namespace

DecodedChar decode_at(std::string_view s, std::size_t pos) noexcept {
    char32_t cp = 0;
    const std::size_t len = valid_seq_len(s, pos, cp);
    if (len == 0) return {kReplacement, 1};
    return {cp, len};
}

std::vector<std::uint32_t> scalar_boundaries(std::string_view s) {
    std::vector<std::uint32_t> out;
    out.reserve(s.size() + 1);
    std::size_t pos = 0;
    while (pos < s.size()) {
        char32_t cp = 0;
        const std::size_t len = valid_seq_len(s, pos, cp);
        if (len == 0) throw InvalidEncoding(pos);
        out.push_back(static_cast<std::uint32_t>(pos));
        pos += len;
    }
    out.push_back(static_cast<std::uint32_t>(s.size()));
    return out;
}

std::size_t scalar_count(std::string_view s) noexcept {
    std::size_t n = 0;
    for (std::size_t pos = 0; pos < s.size(); ++n) pos += decode_at(s, pos).byte_len;
    return n;
}

bool is_space(char32_t c) noexcept {
    switch (c) {
        case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

std::string_view trim(std::string_view s) noexcept {
    std::size_t begin = 0;
    while (begin < s.size()) {
        const auto d = decode_at(s, begin);
        if (!is_space(d.value)) break;
        begin += d.byte_len;
    }
    std::size_t end = begin;
    for (std::size_t pos = begin; pos < s.size();) {
        const auto d = decode_at(s, pos);
        pos += d.byte_len;
        if (!is_space(d.value)) end = pos;
    }
    return s.substr(begin, end - begin);
}

std::string casefold(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::string normalize(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (std::size_t pos = 0; pos < s.size();) {
        const auto d = decode_at(s, pos);
        if (is_space(d.value)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.append(s.substr(pos, d.byte_len));
        }
        pos += d.byte_len;
    }
    return casefold(out);
}

bool contains_word(std::string_view haystack, std::string_view needle) noexcept {
    if (needle.empty()) return false;
    const bool word_start = is_word_byte(static_cast<unsigned char>(needle.front()));
    const bool word_end = is_word_byte(static_cast<unsigned char>(needle.back()));
    for (std::size_t at = haystack.find(needle); at != std::string_view::npos;
         at = haystack.find(needle, at + 1)) {
        const bool left_ok = !word_start || at == 0 ||
                             !is_word_byte(static_cast<unsigned char>(haystack[at - 1]));
        const std::size_t after = at + needle.size();
        const bool right_ok = !word_end || after == haystack.size() ||
                              !is_word_byte(static_cast<unsigned char>(haystack[after]));
        if (left_ok && right_ok) return true;
    }
    return false;
}

std::size_t word_count(std::string_view s) noexcept {
    std::size_t n = 0;
    bool in_word = false;
    for (std::size_t pos = 0; pos < s.size();) {
        const auto d = decode_at(s, pos);
        if (is_space(d.value)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
        pos += d.byte_len;
    }
    return n;
}

std::vector<std::string> word_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        const auto b = static_cast<unsigned char>(c);
        if (is_word_byte(b)) {
            cur.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace gechat::text
