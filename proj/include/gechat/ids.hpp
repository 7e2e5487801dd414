#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <string>

namespace gechat {

template <typename Tag>
struct StrongId {
    std::uint32_t value = 0;

    constexpr StrongId() = default;
    constexpr explicit StrongId(std::uint32_t v) : value(v) {}

    friend constexpr auto operator<=>(StrongId, StrongId) = default;
};

using ChunkId = StrongId<struct ChunkTag>;
using EntityId = StrongId<struct EntityTag>;
using RelationId = StrongId<struct RelationTag>;

/// Opaque document id, stable for identical (source_name, text).
using DocId = std::string;

}  // namespace gechat

template <typename Tag>
struct std::hash<gechat::StrongId<Tag>> {
    std::size_t operator()(gechat::StrongId<Tag> id) const noexcept {
        return std::hash<std::uint32_t>{}(id.value);
    }
};
