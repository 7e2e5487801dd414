#include "gechat/store.hpp"

#include "gechat/errors.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace gechat {

const char* to_string(JobKind k) noexcept { return k == JobKind::evaluation ? "evaluation" : "graph_build"; }

const char* to_string(JobState s) noexcept {
    switch (s) {
        case JobState::queued: return "queued";
        case JobState::running: return "running";
        case JobState::done: return "done";
        case JobState::failed: return "failed";
    }
    return "failed";
}

bool can_transition(JobState from, JobState to) noexcept {
    switch (from) {
        case JobState::queued: return to == JobState::running || to == JobState::failed;
        case JobState::running: return to == JobState::done || to == JobState::failed;
        default: return false;
    }
}

void Job::advance(JobState next) {
    if (!can_transition(state, next)) {
        throw PreconditionViolation(std::string("job ") + job_id + ": illegal transition " + to_string(state) + " -> " +
                                    to_string(next));
    }
    state = next;
    if (next == JobState::done) progress = 1.0;
}

void Job::set_progress(double p) noexcept {
    if (!(p >= 0.0)) p = 0.0;
    progress = std::max(progress, std::min(1.0, p));
}

nlohmann::json to_json(const Job& j) {
    return {{"job_id", j.job_id},
            {"kind", to_string(j.kind)},
            {"subject", j.subject},
            {"state", to_string(j.state)},
            {"progress", j.progress},
            {"result_ref", j.result_ref},
            {"error_detail", j.error_detail}};
}

Job job_from_json(const nlohmann::json& j) {
    Job job;
    job.job_id = j.at("job_id").get<std::string>();
    job.kind = j.at("kind").get<std::string>() == "evaluation" ? JobKind::evaluation : JobKind::graph_build;
    job.subject = j.at("subject").get<std::string>();
    const auto s = j.at("state").get<std::string>();
    job.state = s == "queued" ? JobState::queued
              : s == "running" ? JobState::running
              : s == "done"    ? JobState::done
                               : JobState::failed;
    job.progress = j.at("progress").get<double>();
    job.result_ref = j.value("result_ref", nlohmann::json());
    job.error_detail = j.value("error_detail", std::string());
    return job;
}

bool is_safe_id(std::string_view id) noexcept {
    return !id.empty() && id.size() <= 128 && std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    });
}

namespace {

void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << bytes;
        if (!out) throw Error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::optional<std::string> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void require_safe(std::string_view id) {
    if (!is_safe_id(id)) throw NotFound("invalid id '" + std::string(id) + "'");
}

}  // namespace

FileStore::FileStore(std::filesystem::path root) : root_(std::move(root)) {
    for (const char* sub : {"documents", "graphs", "jobs"}) std::filesystem::create_directories(root_ / sub);
}

void FileStore::put_document(const Document& doc) {
    require_safe(doc.doc_id());
    const nlohmann::json j = {{"doc_id", doc.doc_id()}, {"source_name", doc.source_name()}, {"text", doc.text()}};
    std::lock_guard lock(mu_);
    write_atomic(root_ / "documents" / (doc.doc_id() + ".json"), j.dump());
}

std::optional<Document> FileStore::get_document(const DocId& id) const {
    if (!is_safe_id(id)) return std::nullopt;
    std::optional<std::string> bytes;
    {
        std::lock_guard lock(mu_);
        bytes = read_file(root_ / "documents" / (id + ".json"));
    }
    if (!bytes) return std::nullopt;
    const auto j = nlohmann::json::parse(*bytes);
    return Document(j.at("doc_id").get<std::string>(), j.at("source_name").get<std::string>(),
                    j.at("text").get<std::string>());
}

void FileStore::put_graph(const DocId& id, const BuiltGraph& g) {
    require_safe(id);
    const nlohmann::json meta = {{"stats", stats_to_json(g.stats)},
                                 {"chunk_size", g.chunking.chunk_size},
                                 {"chunk_overlap", g.chunking.overlap}};
    std::lock_guard lock(mu_);
    write_atomic(root_ / "graphs" / (id + ".graph.json"), save_graph(g.graph));
    write_atomic(root_ / "graphs" / (id + ".build.json"), meta.dump(2));
}

std::optional<BuiltGraph> FileStore::get_graph(const DocId& id) const {
    if (!is_safe_id(id)) return std::nullopt;
    std::optional<std::string> graph_bytes, meta_bytes;
    {
        std::lock_guard lock(mu_);
        graph_bytes = read_file(root_ / "graphs" / (id + ".graph.json"));
        meta_bytes = read_file(root_ / "graphs" / (id + ".build.json"));
    }
    if (!graph_bytes || !meta_bytes) return std::nullopt;
    const auto meta = nlohmann::json::parse(*meta_bytes);
    return BuiltGraph{load_graph(*graph_bytes), stats_from_json(meta.at("stats")),
                      ChunkParams{meta.at("chunk_size").get<std::size_t>(), meta.at("chunk_overlap").get<std::size_t>()}};
}

void FileStore::put_job(const Job& job) {
    require_safe(job.job_id);
    std::lock_guard lock(mu_);
    write_atomic(root_ / "jobs" / (job.job_id + ".json"), to_json(job).dump(2));
}

std::optional<Job> FileStore::get_job(const std::string& id) const {
    if (!is_safe_id(id)) return std::nullopt;
    std::lock_guard lock(mu_);
    auto bytes = read_file(root_ / "jobs" / (id + ".json"));
    if (!bytes) return std::nullopt;
    return job_from_json(nlohmann::json::parse(*bytes));
}

bool FileStore::reachable() const {
    std::error_code ec;
    return std::filesystem::is_directory(root_ / "documents", ec) && std::filesystem::is_directory(root_ / "jobs", ec);
}

}  // namespace gechat
