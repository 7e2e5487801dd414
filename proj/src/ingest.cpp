#include "gechat/ingest.hpp"

#include "gechat/errors.hpp"
#include "gechat/text.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace gechat {

Document::Document(DocId doc_id, std::string source_name, std::string text)
    : doc_id_(std::move(doc_id)),
      source_name_(std::move(source_name)),
      text_(std::move(text)),
      boundaries_(text::scalar_boundaries(text_)) {}

std::string_view Document::slice(std::size_t char_start, std::size_t char_end) const {
    if (char_start > char_end || char_end > char_len()) {
        throw std::out_of_range("slice [" + std::to_string(char_start) + "," + std::to_string(char_end) +
                                ") outside document of length " + std::to_string(char_len()));
    }
    const auto b = boundaries_[char_start];
    return std::string_view(text_).substr(b, boundaries_[char_end] - b);
}

DocId make_doc_id(std::string_view source_name, std::string_view text) {
    std::string key;
    key.reserve(source_name.size() + 1 + text.size());
    key.append(source_name).push_back('\0');
    key.append(text);
    return "d" + text::hex64(text::fnv1a64(key));
}

Document load_document(std::string source_name, std::string raw_text) {
    // validate before the emptiness check so malformed bytes are reported as such
    text::scalar_boundaries(raw_text);
    if (text::trim(raw_text).empty()) throw EmptyDocument();
    auto id = make_doc_id(source_name, raw_text);
    return Document(std::move(id), std::move(source_name), std::move(raw_text));
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkParams& params) {
    if (params.chunk_size == 0) throw BadChunkParams("chunk_size must be positive");
    if (params.overlap >= params.chunk_size) {
        throw BadChunkParams("overlap " + std::to_string(params.overlap) + " must be smaller than chunk_size " +
                             std::to_string(params.chunk_size));
    }
    const std::size_t step = params.chunk_size - params.overlap;
    const std::size_t len = doc.char_len();
    std::vector<Chunk> chunks;
    for (std::size_t k = 0;; ++k) {
        const std::size_t start = k * step;
        const std::size_t end = std::min(start + params.chunk_size, len);
        chunks.push_back(Chunk{ChunkId(static_cast<std::uint32_t>(k)), doc.doc_id(), start, end,
                               std::string(doc.slice(start, end))});
        if (end == len) break;
    }
    return chunks;
}

std::vector<std::string> SegmenterOptions::default_abbreviations() {
    return {"Dr", "Mr", "Mrs", "Ms", "Prof", "Sr", "Jr", "St", "Mt", "vs", "e.g", "i.e",
            "Inc", "Ltd", "Co", "Corp", "No", "Fig", "Eq", "approx", "cf", "al"};
}

namespace {

bool is_terminator(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }

bool is_closer(char32_t c) {
    return c == U'"' || c == U'\'' || c == U')' || c == U']' || c == 0x201D || c == 0x2019 || c == 0xBB;
}

bool is_opener(char32_t c) {
    return c == U'"' || c == U'\'' || c == U'(' || c == U'[' || c == 0x201C || c == 0x2018 || c == 0xAB;
}

struct Scalar {
    char32_t value;
    std::size_t byte;  // byte offset in the segmented text
};

// Token immediately preceding the '.' at index `dot`, without leading openers.
std::string token_before(const std::vector<Scalar>& cps, std::string_view text, std::size_t dot) {
    std::size_t begin = dot;
    while (begin > 0 && !text::is_space(cps[begin - 1].value)) --begin;
    while (begin < dot && is_opener(cps[begin].value)) ++begin;
    return std::string(text.substr(cps[begin].byte, cps[dot].byte - cps[begin].byte));
}

bool is_abbreviation(const std::string& token, const std::vector<std::string>& guard) {
    if (token.empty()) return false;
    const std::string folded = text::casefold(token);
    return std::any_of(guard.begin(), guard.end(),
                       [&](const std::string& a) { return text::casefold(a) == folded; });
}

}  // namespace

std::vector<SentenceSpan> segment_text(std::string_view text, std::size_t base_offset, ChunkId chunk_id,
                                       const SegmenterOptions& options) {
    std::vector<Scalar> cps;
    cps.reserve(text.size());
    for (std::size_t pos = 0; pos < text.size();) {
        const auto d = text::decode_at(text, pos);
        cps.push_back({d.value, pos});
        pos += d.byte_len;
    }
    const std::size_t n = cps.size();
    auto byte_at = [&](std::size_t i) { return i < n ? cps[i].byte : text.size(); };

    std::vector<SentenceSpan> spans;
    auto emit = [&](std::size_t begin, std::size_t end) {
        // trailing whitespace is never part of a span
        while (end > begin && text::is_space(cps[end - 1].value)) --end;
        if (end <= begin) return;
        spans.push_back(SentenceSpan{chunk_id, base_offset + begin, base_offset + end,
                                     std::string(text.substr(byte_at(begin), byte_at(end) - byte_at(begin)))});
    };

    std::size_t i = 0;
    while (i < n && text::is_space(cps[i].value)) ++i;
    std::size_t start = i;
    while (i < n) {
        const char32_t c = cps[i].value;
        if (is_terminator(c)) {
            std::size_t j = i + 1;
            while (j < n && is_terminator(cps[j].value)) ++j;
            while (j < n && is_closer(cps[j].value)) ++j;
            const bool at_break = j == n || text::is_space(cps[j].value);
            const bool lone_dot = c == U'.' && j == i + 1;
            if (at_break && !(lone_dot && is_abbreviation(token_before(cps, text, i), options.abbreviations))) {
                emit(start, j);
                while (j < n && text::is_space(cps[j].value)) ++j;
                start = i = j;
                continue;
            }
            i = j;
            continue;
        }
        if (options.split_on_blank_lines && c == U'\n') {
            std::size_t j = i + 1;
            std::size_t newlines = 1;
            while (j < n && text::is_space(cps[j].value)) {
                if (cps[j].value == U'\n') ++newlines;
                ++j;
            }
            if (newlines >= 2) {
                emit(start, i);
                start = i = j;
                continue;
            }
        }
        ++i;
    }
    emit(start, n);
    return spans;
}

std::vector<SentenceSpan> segment_sentences(const Chunk& chunk, const SegmenterOptions& options) {
    return segment_text(chunk.text, chunk.char_start, chunk.chunk_id, options);
}

PreExtractor command_pre_extractor(std::string command) {
    return [command = std::move(command)](const std::filesystem::path& path) {
        std::string quoted = "'";
        for (char c : path.string()) {
            if (c == '\'') quoted += "'\\''";
            else quoted.push_back(c);
        }
        quoted += "'";
        const std::string cmd = command + " " + quoted;
        std::unique_ptr<FILE, int (*)(FILE*)> pipe(::popen(cmd.c_str(), "r"), ::pclose);
        if (!pipe) throw Error("cannot run pre-extractor: " + command);
        std::string out;
        std::array<char, 4096> buf{};
        std::size_t got = 0;
        while ((got = std::fread(buf.data(), 1, buf.size(), pipe.get())) > 0) out.append(buf.data(), got);
        const int status = ::pclose(pipe.release());
        if (status != 0) throw Error("pre-extractor failed with status " + std::to_string(status) + ": " + cmd);
        return out;
    };
}

Document load_document_file(const std::filesystem::path& path, const PreExtractor& pre_extractor) {
    if (!std::filesystem::is_regular_file(path)) throw NotFound("no such file: " + path.string());
    std::string ext = text::casefold(path.extension().string());
    std::string body;
    if (ext == ".txt" || ext == ".md") {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        body = std::move(ss).str();
    } else if (pre_extractor) {
        body = pre_extractor(path);
    } else {
        throw PreconditionViolation("unsupported format '" + ext + "' without a pre-extractor: " + path.string());
    }
    return load_document(path.filename().string(), std::move(body));
}

}  // namespace gechat
