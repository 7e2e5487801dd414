// gechat: command-line front end for ingest, graph builds, questions, evaluation and the HTTP server.

#include "gechat/engine.hpp"
#include "gechat/errors.hpp"
#include "gechat/service.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <pthread.h>
#include <thread>

namespace {

using namespace gechat;

constexpr int exit_other = 1;
constexpr int exit_usage = 2;
constexpr int exit_not_found = 3;
constexpr int exit_provider = 4;

struct Options {
    std::string data_dir;
    std::string config_path;

    std::string file;
    std::string pre_extractor;

    std::string doc_id;
    std::string question;
    bool json = false;
    bool frozen = false;
    std::optional<std::size_t> k;
    std::optional<double> alpha, beta, tau, min_support;

    std::string dataset;
    std::string predictions;
    std::string out;
    std::string csv;

    std::string host;
    int port = -1;
};

EngineConfig make_config(const Options& o) {
    EngineConfig c = o.config_path.empty() ? config_from_env() : load_config(o.config_path);
    if (!o.config_path.empty()) {
        if (const char* d = std::getenv("GECHAT_DATA_DIR"); d && *d) c.data_dir = d;
    }
    if (!o.data_dir.empty()) c.data_dir = o.data_dir;
    if (o.frozen) c.frozen_clock = true;
    return c;
}

Engine make_engine(const EngineConfig& c, bool with_providers) {
    return Engine(c, with_providers ? providers_from_env() : Providers{}, std::make_shared<FileStore>(c.data_dir));
}

void print_answer(const AskResponse& r) {
    std::cout << "Answer: " << r.answer_text << "\n";
    if (!r.steps.empty()) std::cout << "\nThoughts:\n";
    for (std::size_t i = 0; i < r.steps.size(); ++i) std::cout << "  " << i + 1 << ". " << r.steps[i] << "\n";
    for (const auto& ev : r.evidence) {
        std::cout << "\n[" << to_string(ev.support_status) << "] " << ev.answer_sentence << "\n";
        for (const auto& s : ev.spans) {
            std::cout << "  chunk " << s.span.chunk_id.value << " [" << s.span.char_start << ", " << s.span.char_end
                      << ") p_ent=" << std::fixed << std::setprecision(4) << s.p_ent << " score=" << s.score
                      << std::defaultfloat << "\n    " << s.span.text << "\n";
        }
    }
    if (!r.ungrounded_steps.empty()) {
        std::cout << "\nungrounded steps:";
        for (auto i : r.ungrounded_steps) std::cout << " " << i + 1;
        std::cout << "\n";
    }
}

int cmd_ingest(const Options& o) {
    const auto cfg = make_config(o);
    auto engine = make_engine(cfg, false);
    PreExtractor pre;
    if (!o.pre_extractor.empty()) pre = command_pre_extractor(o.pre_extractor);
    const auto result = engine.ingest(load_document_file(o.file, pre));
    std::cout << result.doc_id << "\n";
    if (!result.created) std::cerr << "document already stored\n";
    return 0;
}

int cmd_build(const Options& o) {
    const auto cfg = make_config(o);
    auto engine = make_engine(cfg, true);
    const auto built = engine.build(o.doc_id, [&](double p) {
        if (!o.json) std::cerr << "\rbuilding graph " << static_cast<int>(p * 100) << "%" << std::flush;
    });
    if (o.json) {
        std::cout << stats_to_json(built.stats).dump(2) << "\n";
        return 0;
    }
    const auto& s = built.stats;
    std::cerr << "\n";
    std::cout << "chunks:           " << s.n_chunks << "\n"
              << "mean chunk len:   " << s.mean_chunk_len << "\n"
              << "entities:         " << s.n_entities << "\n"
              << "edges:            " << s.n_edges << "\n"
              << "extraction calls: " << s.llm_calls_extraction << "\n"
              << "relation calls:   " << s.llm_calls_relation << "\n"
              << "repair calls:     " << s.llm_calls_repair << "\n"
              << "skipped chunks:   " << s.skipped_chunk_ids.size() << "\n";
    return 0;
}

int cmd_ask(const Options& o) {
    const auto cfg = make_config(o);
    auto engine = make_engine(cfg, true);
    nlohmann::json overrides = nlohmann::json::object();
    if (o.k) overrides["k"] = *o.k;
    if (o.alpha) overrides["alpha"] = *o.alpha;
    if (o.beta) overrides["beta"] = *o.beta;
    if (o.tau) overrides["tau"] = *o.tau;
    if (o.min_support) overrides["min_support"] = *o.min_support;
    const auto params = apply_overrides(ask_params(cfg), overrides);
    const auto clock = cfg.frozen_clock ? frozen_clock() : steady_clock_ms();
    const auto r = engine.ask(o.doc_id, o.question, params, clock);
    if (o.json) {
        std::cout << to_json(r).dump(2) << "\n";
    } else {
        print_answer(r);
    }
    return 0;
}

int cmd_eval(const Options& o) {
    const auto cfg = make_config(o);
    const std::filesystem::path dataset = o.dataset;
    const auto cases = load_dataset(dataset);
    std::optional<std::map<std::string, std::vector<std::string>>> table;
    if (!o.predictions.empty()) table = load_predictions(o.predictions);
    // Scripted predictions only need the embedder; the engine path needs every provider.
    auto engine = make_engine(cfg, true);
    ScoreOptions opts;
    opts.allow_negative_cosine = cfg.allow_negative_cosine;
    const auto report = run_benchmark(cases, engine.pipeline(dataset.parent_path(), std::move(table)),
                                      *engine.providers().embed, opts, 1);
    std::cout << report_table(report);
    if (!o.out.empty()) {
        std::ofstream f(o.out);
        if (!f) throw Error("cannot write " + o.out);
        f << report_to_json(report).dump(2) << "\n";
    }
    if (!o.csv.empty()) {
        std::ofstream f(o.csv);
        if (!f) throw Error("cannot write " + o.csv);
        f << report_csv(report);
    }
    return 0;
}

int cmd_serve(const Options& o) {
    auto cfg = make_config(o);
    if (!o.host.empty()) cfg.host = o.host;
    if (o.port >= 0) cfg.port = o.port;
    const std::string host = cfg.host;
    const int port = cfg.port;

    // Signals are taken synchronously on a dedicated thread so stop() runs outside a handler.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    auto store = std::make_shared<FileStore>(cfg.data_dir);
    Service service(cfg, providers_from_env(), store);
    std::jthread waiter([&](std::stop_token st) {
        while (!st.stop_requested()) {
            timespec ts{0, 200'000'000};
            if (sigtimedwait(&set, nullptr, &ts) > 0) {
                service.stop();
                return;
            }
        }
    });
    service.run(host, port, [&](int bound) {
        std::cerr << "listening on http://" << host << ":" << bound << std::endl;
    });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Evidence-grounded question answering over documents"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--data-dir", o.data_dir, "Storage directory (default: gechat-data or $GECHAT_DATA_DIR)");
    app.add_option("--config", o.config_path, "JSON configuration file (default: $GECHAT_CONFIG)");

    auto* ingest = app.add_subcommand("ingest", "Store a document and print its id");
    ingest->add_option("file", o.file, "Document path (.txt/.md, anything else via --pre-extractor)")->required();
    ingest->add_option("--pre-extractor", o.pre_extractor, "Command that prints plain text for the file given as its last argument");

    auto* build = app.add_subcommand("build-graph", "Build the knowledge graph of a stored document");
    build->add_option("doc_id", o.doc_id)->required();
    build->add_flag("--json", o.json, "Print the build statistics as JSON");

    auto* ask = app.add_subcommand("ask", "Answer a question with verbatim evidence");
    ask->add_option("doc_id", o.doc_id)->required();
    ask->add_option("question", o.question)->required();
    ask->add_option("--k", o.k, "Subgraph hop count");
    ask->add_option("--alpha", o.alpha, "Entailment weight");
    ask->add_option("--beta", o.beta, "Conciseness weight");
    ask->add_option("--tau", o.tau, "Entity embedding match threshold");
    ask->add_option("--min-support", o.min_support, "Entailment probability for 'supported'");
    ask->add_flag("--json", o.json, "Print the response as JSON");
    ask->add_flag("--frozen-clock", o.frozen, "Report zero stage timings");

    auto* eval = app.add_subcommand("eval", "Score evidence against a JSONL benchmark");
    eval->add_option("dataset", o.dataset)->required();
    eval->add_option("--predictions", o.predictions, "JSONL of {id, evidence[]} to score instead of running the engine");
    eval->add_option("--out", o.out, "Write the JSON report here");
    eval->add_option("--csv", o.csv, "Write per-case scores as CSV here");

    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    serve->add_option("--host", o.host);
    serve->add_option("--port", o.port);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try {
        if (*ingest) return cmd_ingest(o);
        if (*build) return cmd_build(o);
        if (*ask) return cmd_ask(o);
        if (*eval) return cmd_eval(o);
        if (*serve) return cmd_serve(o);
    } catch (const NotFound& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_not_found;
    } catch (const GraphNotBuilt& e) {
        std::cerr << "error: " << e.what() << " (run build-graph first)\n";
        return exit_not_found;
    } catch (const ProviderError& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return exit_provider;
    } catch (const StageError& e) {
        std::cerr << "provider error in stage " << e.stage() << ": " << e.what() << "\n";
        return exit_provider;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return exit_usage;
    } catch (const PreconditionViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_other;
    }
    return exit_other;
}
