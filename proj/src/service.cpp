#include "gechat/service.hpp"

#include "gechat/errors.hpp"
#include "gechat/text.hpp"

#include "httplib.h"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>

namespace gechat {

// ---------------------------------------------------------------------------
// JobManager

JobManager::JobManager(std::shared_ptr<Store> store, std::size_t workers) : store_(std::move(store)) {
    std::random_device rd;
    id_prefix_ = "j" + text::hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd()).substr(0, 8);
    for (std::size_t i = 0; i < std::max<std::size_t>(1, workers); ++i) {
        workers_.emplace_back([this](std::stop_token st) { work(st); });
    }
}

JobManager::~JobManager() {
    for (auto& w : workers_) w.request_stop();
    cv_.notify_all();
    workers_.clear();
}

std::string JobManager::next_id() { return id_prefix_ + "-" + std::to_string(++counter_); }

std::optional<std::string> JobManager::submit(JobKind kind, std::string subject, Task task, bool exclusive) {
    Job job;
    {
        std::lock_guard lock(mu_);
        if (exclusive && active_subjects_.contains(subject)) return std::nullopt;
        job.job_id = next_id();
        job.kind = kind;
        job.subject = subject;
        if (exclusive) active_subjects_.insert(subject);
        jobs_.emplace(job.job_id, job);
        queue_.push_back({job.job_id, std::move(task)});
    }
    store_->put_job(job);
    cv_.notify_one();
    return job.job_id;
}

std::optional<Job> JobManager::get(const std::string& job_id) const {
    {
        std::lock_guard lock(mu_);
        if (auto it = jobs_.find(job_id); it != jobs_.end()) return it->second;
    }
    return store_->get_job(job_id);
}

bool JobManager::active(const std::string& subject) const {
    std::lock_guard lock(mu_);
    return active_subjects_.contains(subject);
}

void JobManager::wait_idle() {
    std::unique_lock lock(mu_);
    idle_cv_.wait(lock, [&] { return queue_.empty() && running_ == 0; });
}

void JobManager::update(const std::string& job_id, const std::function<void(Job&)>& fn) {
    Job snapshot;
    {
        std::lock_guard lock(mu_);
        Job& j = jobs_.at(job_id);
        fn(j);
        snapshot = j;
    }
    store_->put_job(snapshot);
}

void JobManager::work(std::stop_token stop) {
    while (true) {
        Pending next;
        {
            std::unique_lock lock(mu_);
            if (!cv_.wait(lock, stop, [&] { return !queue_.empty(); })) return;
            next = std::move(queue_.front());
            queue_.pop_front();
            ++running_;
        }
        update(next.job_id, [](Job& j) { j.advance(JobState::running); });
        try {
            auto result = next.task([&](double p) { update(next.job_id, [p](Job& j) { j.set_progress(p); }); });
            update(next.job_id, [&](Job& j) {
                j.result_ref = std::move(result);
                j.advance(JobState::done);
            });
        } catch (const std::exception& e) {
            update(next.job_id, [&](Job& j) {
                j.error_detail = e.what();
                j.advance(JobState::failed);
            });
        }
        {
            std::lock_guard lock(mu_);
            active_subjects_.erase(jobs_.at(next.job_id).subject);
            --running_;
        }
        idle_cv_.notify_all();
    }
}

// ---------------------------------------------------------------------------
// Service

struct Service::Server {
    httplib::Server http;
};

namespace {

using nlohmann::json;

ApiResponse json_response(int status, const json& body) { return {status, body.dump(2) + "\n", "application/json"}; }

ApiResponse error_response(int status, const std::string& message, const json& extra = json::object()) {
    json body = {{"error", message}};
    for (const auto& [k, v] : extra.items()) body[k] = v;
    return json_response(status, body);
}

std::vector<std::string> path_segments(std::string_view path) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= path.size()) {
        const auto slash = path.find('/', start);
        const auto end = slash == std::string_view::npos ? path.size() : slash;
        if (end > start) out.emplace_back(path.substr(start, end - start));
        if (slash == std::string_view::npos) break;
        start = slash + 1;
    }
    return out;
}

json parse_body(const ApiRequest& req) {
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) throw PreconditionViolation("request body must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw PreconditionViolation(std::string("request body is not valid JSON: ") + e.what());
    }
}

std::string required_string(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) throw PreconditionViolation(std::string("missing string field '") + key + "'");
    return j[key].get<std::string>();
}

}  // namespace

Service::Service(EngineConfig config, Providers providers, std::shared_ptr<Store> store)
    : clock_(config.frozen_clock ? frozen_clock() : steady_clock_ms()) {
    const std::size_t workers = config.workers;
    jobs_ = std::make_unique<JobManager>(store, workers);
    engine_ = std::make_unique<Engine>(std::move(config), std::move(providers), std::move(store));
}

Service::~Service() {
    stop();
    jobs_.reset();
}

ApiResponse Service::handle(const ApiRequest& req) {
    const auto seg = path_segments(req.path);
    const bool get = req.method == "GET";
    const bool post = req.method == "POST";
    try {
        if (seg.size() == 1 && seg[0] == "healthz") {
            if (!get) return error_response(405, "method not allowed");
            if (!engine_->store().reachable()) return {503, "store unreachable\n", "text/plain"};
            return {200, "ok", "text/plain"};
        }
        if (seg.size() == 1 && seg[0] == "documents" && post) return post_document(req);
        if (seg.size() == 2 && seg[0] == "documents" && get) return get_document(seg[1]);
        if (seg.size() == 3 && seg[0] == "documents" && seg[2] == "chunks" && get) return get_chunks(seg[1]);
        if (seg.size() == 3 && seg[0] == "documents" && seg[2] == "graph" && post) return post_graph(seg[1]);
        if (seg.size() == 2 && seg[0] == "jobs" && get) {
            auto job = jobs_->get(seg[1]);
            if (!job) return error_response(404, "unknown job " + seg[1]);
            return json_response(200, to_json(*job));
        }
        if (seg.size() == 1 && seg[0] == "ask" && post) return post_ask(req);
        if (seg.size() == 1 && seg[0] == "evaluations" && post) return post_evaluation(req);
        return error_response(404, "no route for " + req.method + " " + req.path);
    } catch (const NotFound& e) {
        return error_response(404, e.what());
    } catch (const GraphNotBuilt& e) {
        return error_response(412, e.what());
    } catch (const StageError& e) {
        return error_response(502, e.what(), {{"stage", e.stage()}});
    } catch (const EmptyDocument& e) {
        return error_response(400, e.what());
    } catch (const InvalidEncoding& e) {
        return error_response(400, e.what());
    } catch (const PreconditionViolation& e) {
        return error_response(400, e.what());
    } catch (const SchemaError& e) {
        return error_response(400, e.what());
    } catch (const std::exception& e) {
        return error_response(500, e.what());
    }
}

ApiResponse Service::post_document(const ApiRequest& req) {
    if (req.body.size() > engine_->config().max_upload_bytes) {
        return error_response(413, "document exceeds " + std::to_string(engine_->config().max_upload_bytes) + " bytes");
    }
    std::string source_name;
    std::string body;
    if (req.content_type.starts_with("application/json")) {
        const auto j = parse_body(req);
        source_name = j.contains("source_name") ? required_string(j, "source_name") : "upload.txt";
        body = required_string(j, "text");
    } else {
        auto it = req.query.find("source_name");
        source_name = it == req.query.end() ? "upload.txt" : it->second;
        body = req.body;
    }
    const auto result = engine_->ingest(load_document(std::move(source_name), std::move(body)));
    return json_response(result.created ? 201 : 200, {{"doc_id", result.doc_id}});
}

ApiResponse Service::get_document(const std::string& doc_id) {
    const Document doc = engine_->document(doc_id);
    const auto built = engine_->graph(doc_id);
    json j = {{"doc_id", doc.doc_id()},
              {"source_name", doc.source_name()},
              {"char_len", doc.char_len()},
              {"graph_built", built.has_value()},
              {"graph_building", jobs_->active(doc_id)}};
    if (built) j["graph_stats"] = stats_to_json(built->stats);
    return json_response(200, j);
}

ApiResponse Service::get_chunks(const std::string& doc_id) {
    const auto [chunks, params] = engine_->chunks(doc_id);
    json arr = json::array();
    for (const auto& c : chunks) {
        arr.push_back({{"chunk_id", c.chunk_id.value}, {"char_start", c.char_start}, {"char_end", c.char_end}, {"text", c.text}});
    }
    return json_response(200, {{"doc_id", doc_id},
                               {"chunk_size", params.chunk_size},
                               {"chunk_overlap", params.overlap},
                               {"chunks", std::move(arr)}});
}

ApiResponse Service::post_graph(const std::string& doc_id) {
    engine_->document(doc_id);  // 404 before enqueueing
    Engine* engine = engine_.get();
    auto job_id = jobs_->submit(
        JobKind::graph_build, doc_id,
        [engine, doc_id](const std::function<void(double)>& progress) {
            const auto built = engine->build(doc_id, progress);
            return json{{"doc_id", doc_id}, {"stats", stats_to_json(built.stats)}};
        },
        true);
    if (!job_id) return error_response(409, "a graph build is already running for document " + doc_id);
    return json_response(202, {{"job_id", *job_id}});
}

ApiResponse Service::post_ask(const ApiRequest& req) {
    const auto body = parse_body(req);
    const std::string doc_id = required_string(body, "doc_id");
    const std::string question = required_string(body, "question");
    const AskParams params = apply_overrides(ask_params(engine_->config()), body);
    const AskResponse r = engine_->ask(doc_id, question, params, clock_);
    if (!spans_are_verbatim(r, engine_->document(doc_id))) {
        return error_response(500, "evidence span does not match the stored document");
    }
    return json_response(200, to_json(r));
}

ApiResponse Service::post_evaluation(const ApiRequest& req) {
    const auto body = parse_body(req);
    const std::filesystem::path dataset = required_string(body, "dataset");
    if (!std::filesystem::is_regular_file(dataset)) throw NotFound("no such dataset " + dataset.string());
    std::optional<std::filesystem::path> predictions;
    if (body.contains("predictions")) predictions = required_string(body, "predictions");
    Engine* engine = engine_.get();
    auto job_id = jobs_->submit(
        JobKind::evaluation, dataset.string(),
        [engine, dataset, predictions](const std::function<void(double)>& progress) {
            const auto cases = load_dataset(dataset);
            std::optional<std::map<std::string, std::vector<std::string>>> table;
            if (predictions) table = load_predictions(*predictions);
            ScoreOptions opts;
            opts.allow_negative_cosine = engine->config().allow_negative_cosine;
            auto report = run_benchmark(cases, engine->pipeline(dataset.parent_path(), std::move(table)),
                                        *engine->providers().embed, opts, 1);
            progress(1.0);
            return report_to_json(report);
        },
        false);
    return json_response(202, {{"job_id", *job_id}});
}

void Service::run(const std::string& host, int port, const std::function<void(int)>& on_ready) {
    {
        std::lock_guard lock(server_mu_);
        server_ = std::make_unique<Server>();
    }
    auto& http = server_->http;
    const auto& cfg = engine_->config();
    http.set_payload_max_length(cfg.max_upload_bytes + (1u << 20));
    auto dispatch = [this](const httplib::Request& in, httplib::Response& out) {
        ApiRequest req{in.method, in.path, in.body, in.get_header_value("Content-Type"), {}};
        for (const auto& [k, v] : in.params) req.query.emplace(k, v);
        const ApiResponse res = handle(req);
        out.status = res.status;
        out.set_content(res.body, res.content_type);
    };
    http.Get(".*", dispatch);
    http.Post(".*", dispatch);
    if (cfg.request_log) {
        http.set_logger([](const httplib::Request& req, const httplib::Response& res) {
            static std::mutex log_mu;
            const json line = {{"method", req.method}, {"path", req.path}, {"status", res.status},
                               {"request_bytes", req.body.size()}, {"response_bytes", res.body.size()}};
            std::lock_guard lock(log_mu);
            std::cout << line.dump() << std::endl;
        });
    }
    const int bound = port == 0 ? http.bind_to_any_port(host) : (http.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    if (on_ready) on_ready(bound);
    http.listen_after_bind();
}

void Service::stop() {
    std::lock_guard lock(server_mu_);
    if (server_) server_->http.stop();
}

}  // namespace gechat
