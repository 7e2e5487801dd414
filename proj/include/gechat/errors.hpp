#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gechat {

/// Root of every exception the engine throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PreconditionViolation : public Error {
public:
    using Error::Error;
};

// ---- ingest ----

class EmptyDocument : public Error {
public:
    EmptyDocument() : Error("document is empty after trimming whitespace") {}
};

class InvalidEncoding : public Error {
public:
    explicit InvalidEncoding(std::size_t byte_offset)
        : Error("invalid UTF-8 at byte " + std::to_string(byte_offset)), byte_offset_(byte_offset) {}
    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

class BadChunkParams : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

// ---- providers ----

enum class ProviderErrorKind { transient, permanent, timeout };

class ProviderError : public Error {
public:
    ProviderError(ProviderErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
    ProviderErrorKind kind() const noexcept { return kind_; }
    bool transient() const noexcept { return kind_ != ProviderErrorKind::permanent; }

private:
    ProviderErrorKind kind_;
};

class TimeoutError : public ProviderError {
public:
    explicit TimeoutError(const std::string& what) : ProviderError(ProviderErrorKind::timeout, what) {}
};

/// A scripted mock received a request it has no canned answer for.
class MockMiss : public ProviderError {
public:
    explicit MockMiss(const std::string& what)
        : ProviderError(ProviderErrorKind::permanent, "mock miss: " + what) {}
};

// ---- kg-builder ----

class MalformedModelOutput : public Error {
public:
    using Error::Error;
};

class BuildFailed : public Error {
public:
    using Error::Error;
};

class CorruptGraphFile : public Error {
public:
    using Error::Error;
};

// ---- cot ----

class EmptyReply : public Error {
public:
    EmptyReply() : Error("model reply is blank") {}
};

// ---- subgraph / evidence ----

class UnknownEntity : public Error {
public:
    using Error::Error;
};

class NoCandidates : public Error {
public:
    NoCandidates() : Error("no evidence candidates") {}
};

// ---- eval ----

class SchemaError : public Error {
public:
    SchemaError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Provider failure tagged with the pipeline stage it happened in.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

class GraphNotBuilt : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace gechat
