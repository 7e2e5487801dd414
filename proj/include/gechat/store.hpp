#pragma once

#include "gechat/ingest.hpp"
#include "gechat/kg.hpp"

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

namespace gechat {

enum class JobKind { graph_build, evaluation };
enum class JobState { queued, running, done, failed };

const char* to_string(JobKind k) noexcept;
const char* to_string(JobState s) noexcept;

/// Forward-only: queued -> running -> done | failed, and queued -> failed.
bool can_transition(JobState from, JobState to) noexcept;

struct Job {
    std::string job_id;
    JobKind kind = JobKind::graph_build;
    std::string subject;  // doc id or dataset path
    JobState state = JobState::queued;
    double progress = 0.0;
    nlohmann::json result_ref;
    std::string error_detail;

    /// Throws PreconditionViolation on a backward or sideways transition.
    void advance(JobState next);
    /// Clamped to [0, 1] and never decreases.
    void set_progress(double p) noexcept;
};

nlohmann::json to_json(const Job& j);
Job job_from_json(const nlohmann::json& j);

struct BuiltGraph {
    KnowledgeGraph graph;
    GraphStats stats;
    ChunkParams chunking;
};

class Store {
public:
    virtual ~Store() = default;
    virtual void put_document(const Document& doc) = 0;
    virtual std::optional<Document> get_document(const DocId& id) const = 0;
    virtual void put_graph(const DocId& id, const BuiltGraph& g) = 0;
    virtual std::optional<BuiltGraph> get_graph(const DocId& id) const = 0;
    virtual void put_job(const Job& job) = 0;
    virtual std::optional<Job> get_job(const std::string& id) const = 0;
    virtual bool reachable() const = 0;
};

/// JSON files under root/{documents,graphs,jobs}, written via rename for atomic replacement.
class FileStore final : public Store {
public:
    explicit FileStore(std::filesystem::path root);

    void put_document(const Document& doc) override;
    std::optional<Document> get_document(const DocId& id) const override;
    void put_graph(const DocId& id, const BuiltGraph& g) override;
    std::optional<BuiltGraph> get_graph(const DocId& id) const override;
    void put_job(const Job& job) override;
    std::optional<Job> get_job(const std::string& id) const override;
    bool reachable() const override;

    const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
    mutable std::mutex mu_;
};

/// Ids become file names, so only [A-Za-z0-9_-] is accepted.
bool is_safe_id(std::string_view id) noexcept;

}  // namespace gechat
