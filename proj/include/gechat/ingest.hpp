#pragma once

#include "gechat/ids.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace gechat {

/// Immutable source text. All offsets are in Unicode scalar values.
class Document {
public:
    Document(DocId doc_id, std::string source_name, std::string text);

    const DocId& doc_id() const noexcept { return doc_id_; }
    const std::string& source_name() const noexcept { return source_name_; }
    const std::string& text() const noexcept { return text_; }
    std::size_t char_len() const noexcept { return boundaries_.size() - 1; }

    /// Text of the half-open scalar range [char_start, char_end).
    std::string_view slice(std::size_t char_start, std::size_t char_end) const;

    friend bool operator==(const Document& a, const Document& b) {
        return a.doc_id_ == b.doc_id_ && a.source_name_ == b.source_name_ && a.text_ == b.text_;
    }

private:
    DocId doc_id_;
    std::string source_name_;
    std::string text_;
    std::vector<std::uint32_t> boundaries_;
};

struct Chunk {
    ChunkId chunk_id;
    DocId doc_id;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    std::string text;

    friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct SentenceSpan {
    ChunkId chunk_id;
    std::size_t char_start = 0;  // document-global
    std::size_t char_end = 0;
    std::string text;

    friend bool operator==(const SentenceSpan&, const SentenceSpan&) = default;
};

struct ChunkParams {
    std::size_t chunk_size = 1200;
    std::size_t overlap = 200;
};

struct SegmenterOptions {
    /// Tokens that end in '.' without ending a sentence. Compared case-insensitively.
    std::vector<std::string> abbreviations = default_abbreviations();
    /// Treat a blank line as a sentence boundary even without a terminator.
    bool split_on_blank_lines = true;

    static std::vector<std::string> default_abbreviations();
};

/// Id derived from (source_name, text) so re-uploads map to the same document.
DocId make_doc_id(std::string_view source_name, std::string_view text);

/// Throws EmptyDocument or InvalidEncoding.
Document load_document(std::string source_name, std::string raw_text);

/// Chunk k starts at k * (chunk_size - overlap); the last chunk ends at char_len.
std::vector<Chunk> chunk_document(const Document& doc, const ChunkParams& params = {});

std::vector<SentenceSpan> segment_sentences(const Chunk& chunk, const SegmenterOptions& options = {});

/// Segments arbitrary text; offsets are scalar positions in `text` plus `base_offset`.
std::vector<SentenceSpan> segment_text(std::string_view text, std::size_t base_offset, ChunkId chunk_id,
                                       const SegmenterOptions& options = {});

/// Converts a non-plain-text file to plain text.
using PreExtractor = std::function<std::string(const std::filesystem::path&)>;

/// Runs `command <path>` through the shell and captures stdout.
PreExtractor command_pre_extractor(std::string command);

/// Reads .txt/.md directly; anything else goes through `pre_extractor` when one is set.
Document load_document_file(const std::filesystem::path& path, const PreExtractor& pre_extractor = {});

}  // namespace gechat
