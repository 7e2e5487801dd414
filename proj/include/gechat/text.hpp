#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gechat::text {

struct DecodedChar {
    char32_t value;
    std::size_t byte_len;
};

/// Decodes one scalar at `pos`. Malformed sequences decode as U+FFFD of length 1.
DecodedChar decode_at(std::string_view s, std::size_t pos) noexcept;

/// Byte offset of every scalar boundary (size = scalar count + 1).
/// Throws InvalidEncoding on malformed input.
std::vector<std::uint32_t> scalar_boundaries(std::string_view s);

std::size_t scalar_count(std::string_view s) noexcept;

bool is_space(char32_t c) noexcept;

std::string_view trim(std::string_view s) noexcept;

/// ASCII case fold; non-ASCII bytes pass through unchanged.
std::string casefold(std::string_view s);

/// Case-fold, trim, collapse internal whitespace runs to one space.
std::string normalize(std::string_view s);

/// true if `needle` occurs in `haystack` with no word character on either side.
bool contains_word(std::string_view haystack, std::string_view needle) noexcept;

/// Whitespace-delimited token count.
std::size_t word_count(std::string_view s) noexcept;

/// Lowercased alphanumeric runs (non-ASCII bytes count as word characters).
std::vector<std::string> word_tokens(std::string_view s);

std::uint64_t fnv1a64(std::string_view s) noexcept;
std::string hex64(std::uint64_t v);

}  // namespace gechat::text
