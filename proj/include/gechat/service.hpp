#pragma once

#include "gechat/engine.hpp"
#include "gechat/store.hpp"

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace gechat {

/// Bounded worker pool running graph builds and evaluations. The job table is the only
/// mutable state shared between request threads and workers.
class JobManager {
public:
    /// Receives a progress callback; returns the job's result_ref.
    using Task = std::function<nlohmann::json(const std::function<void(double)>& progress)>;

    JobManager(std::shared_ptr<Store> store, std::size_t workers);
    ~JobManager();
    JobManager(const JobManager&) = delete;
    JobManager& operator=(const JobManager&) = delete;

    /// nullopt when `exclusive` and a job for `subject` is still queued or running.
    std::optional<std::string> submit(JobKind kind, std::string subject, Task task, bool exclusive);
    std::optional<Job> get(const std::string& job_id) const;
    bool active(const std::string& subject) const;
    /// Blocks until no job is queued or running.
    void wait_idle();

private:
    struct Pending {
        std::string job_id;
        Task task;
    };

    void work(std::stop_token stop);
    void update(const std::string& job_id, const std::function<void(Job&)>& fn);
    std::string next_id();

    std::shared_ptr<Store> store_;
    mutable std::mutex mu_;
    std::condition_variable_any cv_;
    std::condition_variable_any idle_cv_;
    std::deque<Pending> queue_;
    std::map<std::string, Job> jobs_;
    std::set<std::string> active_subjects_;
    std::size_t running_ = 0;
    std::uint64_t counter_ = 0;
    std::string id_prefix_;
    std::vector<std::jthread> workers_;
};

struct ApiRequest {
    std::string method;
    std::string path;
    std::string body;
    std::string content_type;
    std::map<std::string, std::string> query;
};

struct ApiResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// HTTP/JSON boundary. `handle` is transport-independent; `run` serves it over HTTP.
class Service {
public:
    Service(EngineConfig config, Providers providers, std::shared_ptr<Store> store);
    ~Service();

    ApiResponse handle(const ApiRequest& req);

    /// Blocks serving host:port. `on_ready` receives the bound port (useful with port 0).
    void run(const std::string& host, int port, const std::function<void(int)>& on_ready = {});
    void stop();

    Engine& engine() noexcept { return *engine_; }
    JobManager& jobs() noexcept { return *jobs_; }

private:
    ApiResponse post_document(const ApiRequest& req);
    ApiResponse post_graph(const std::string& doc_id);
    ApiResponse get_chunks(const std::string& doc_id);
    ApiResponse get_document(const std::string& doc_id);
    ApiResponse post_ask(const ApiRequest& req);
    ApiResponse post_evaluation(const ApiRequest& req);

    std::unique_ptr<Engine> engine_;
    std::unique_ptr<JobManager> jobs_;
    Clock clock_;
    struct Server;
    std::unique_ptr<Server> server_;
    std::mutex server_mu_;
};

}  // namespace gechat
