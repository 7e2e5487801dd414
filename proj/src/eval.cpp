#include "gechat/eval.hpp"

#include "gechat/errors.hpp"
#include "gechat/parallel.hpp"
#include "gechat/text.hpp"

#include <set>

#include <algorithm>
#include <array>
#include <cstdio>
#include <exception>
#include <fstream>
#include <istream>
#include <sstream>

namespace gechat {
namespace {

constexpr std::array<std::pair<Category, std::string_view>, 10> kCategories{{
    {Category::Biology, "Biology"},
    {Category::Business, "Business"},
    {Category::Chemistry, "Chemistry"},
    {Category::ComputerScience, "Computer Science"},
    {Category::History, "History"},
    {Category::Management, "Management"},
    {Category::Mathematics, "Mathematics"},
    {Category::Physics, "Physics"},
    {Category::Semiconductors, "Semiconductors"},
    {Category::Story, "Story"},
}};

constexpr std::array<std::pair<LengthBin, std::string_view>, 3> kBins{{
    {LengthBin::short_doc, "short"}, {LengthBin::medium_doc, "medium"}, {LengthBin::long_doc, "long"}}};

constexpr std::array<std::pair<QuestionType, std::string_view>, 3> kTypes{{
    {QuestionType::Synthesis, "Synthesis"},
    {QuestionType::Structure, "Structure"},
    {QuestionType::TermExplanation, "TermExplanation"}}};

template <typename E, std::size_t N>
std::string name_of(const std::array<std::pair<E, std::string_view>, N>& table, E v) {
    for (const auto& [e, s] : table) {
        if (e == v) return std::string(s);
    }
    return "?";
}

template <typename E, std::size_t N>
std::optional<E> value_of(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view s) {
    for (const auto& [e, name] : table) {
        if (name == s) return e;
    }
    return std::nullopt;
}

std::string join_lines(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += '\n';
        out += parts[i];
    }
    return out;
}

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

std::string to_string(Category c) { return name_of(kCategories, c); }
std::string to_string(LengthBin b) { return name_of(kBins, b); }
std::string to_string(QuestionType t) { return name_of(kTypes, t); }
std::optional<Category> parse_category(std::string_view s) { return value_of(kCategories, s); }
std::optional<LengthBin> parse_length_bin(std::string_view s) { return value_of(kBins, s); }
std::optional<QuestionType> parse_question_type(std::string_view s) { return value_of(kTypes, s); }

std::vector<EvalCase> parse_dataset(std::istream& in) {
    std::vector<EvalCase> cases;
    std::set<std::string> seen;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (text::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(lineno, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) throw SchemaError(lineno, "record is not an object");
        auto str = [&](const char* key) {
            if (!j.contains(key) || !j[key].is_string()) throw SchemaError(lineno, std::string("missing string field '") + key + "'");
            return j[key].get<std::string>();
        };
        EvalCase c;
        c.case_id = j.contains("id") && j["id"].is_number_integer() ? std::to_string(j["id"].get<long long>()) : str("id");
        const auto cat = str("category");
        const auto bin = str("pdf_length_bin");
        const auto type = str("question_type");
        auto pc = parse_category(cat);
        if (!pc) throw SchemaError(lineno, "unknown category '" + cat + "'");
        auto pb = parse_length_bin(bin);
        if (!pb) throw SchemaError(lineno, "unknown pdf_length_bin '" + bin + "'");
        auto pt = parse_question_type(type);
        if (!pt) throw SchemaError(lineno, "unknown question_type '" + type + "'");
        c.category = *pc;
        c.pdf_length_bin = *pb;
        c.question_type = *pt;
        c.question = str("question");
        c.answer_gt = str("answer_gt");
        c.document_ref = str("document_ref");
        if (!j.contains("evidence_gt") || !j["evidence_gt"].is_array()) throw SchemaError(lineno, "evidence_gt must be an array");
        for (const auto& e : j["evidence_gt"]) {
            if (!e.is_string()) throw SchemaError(lineno, "evidence_gt entries must be strings");
            c.evidence_gt.push_back(e.get<std::string>());
        }
        if (c.evidence_gt.empty()) throw SchemaError(lineno, "evidence_gt is empty");
        if (!seen.insert(c.case_id).second) throw SchemaError(lineno, "duplicate id '" + c.case_id + "'");
        cases.push_back(std::move(c));
    }
    return cases;
}

std::vector<EvalCase> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFound("cannot open dataset " + path.string());
    return parse_dataset(in);
}

CaseScore case_score(const std::vector<std::string>& generated, const std::vector<std::string>& ground_truth,
                     const EmbeddingProvider& embed, const ScoreOptions& options) {
    if (ground_truth.empty()) throw PreconditionViolation("ground-truth evidence is empty");
    const std::string gen = join_lines(generated);
    const std::string gt = join_lines(ground_truth);
    const std::size_t gen_words = text::word_count(gen);
    if (gen_words == 0) return {0.0, 1.0, 0.0};
    const std::size_t gt_words = text::word_count(gt);

    const auto vecs = embed.embed({gen, gt});
    if (vecs.size() != 2) throw ProviderError(ProviderErrorKind::permanent, "embedding count mismatch");
    CaseScore s;
    s.cosine = cosine(vecs[0], vecs[1]);
    if (!options.allow_negative_cosine) s.cosine = std::max(0.0, s.cosine);
    s.conciseness_factor = std::min(1.0, static_cast<double>(gt_words) / static_cast<double>(gen_words));
    s.case_score = s.cosine * s.conciseness_factor;
    return s;
}

EvalReport run_benchmark(const std::vector<EvalCase>& cases, const EvidencePipeline& pipeline,
                         const EmbeddingProvider& embed, const ScoreOptions& options, std::size_t parallelism) {
    std::vector<CaseResult> results(cases.size());
    parallel_for(cases.size(), parallelism, [&](std::size_t i) {
        try {
            results[i].score = case_score(pipeline(cases[i]), cases[i].evidence_gt, embed, options);
        } catch (const std::exception& e) {
            results[i] = CaseResult{CaseScore{0.0, 1.0, 0.0}, true, e.what()};
        }
    });

    EvalReport r;
    r.embedder = embed.name();
    r.n_cases = cases.size();
    std::map<std::string, std::pair<double, std::size_t>> cat, bin, type;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& c = cases[i];
        r.per_case[c.case_id] = results[i];
        const double s = results[i].score.case_score;
        auto add = [s](auto& m, const std::string& k) {
            m[k].first += s;
            m[k].second += 1;
        };
        add(cat, to_string(c.category));
        add(bin, to_string(c.pdf_length_bin));
        add(type, to_string(c.question_type));
    }
    double sum = 0.0;
    for (const auto& [id, res] : r.per_case) {
        sum += res.score.case_score;
        if (res.failed) r.failed_cases.push_back(id);
    }
    if (!r.per_case.empty()) r.aggregate = sum / static_cast<double>(r.per_case.size());
    auto mean = [](const auto& m, auto& out) {
        for (const auto& [k, v] : m) out[k] = v.first / static_cast<double>(v.second);
    };
    mean(cat, r.by_category);
    mean(bin, r.by_length_bin);
    mean(type, r.by_question_type);
    return r;
}

nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json per_case = nlohmann::json::object();
    for (const auto& [id, res] : r.per_case) {
        nlohmann::json c = {{"cosine", res.score.cosine},
                            {"conciseness_factor", res.score.conciseness_factor},
                            {"case_score", res.score.case_score}};
        if (res.failed) c["error"] = res.error;
        per_case[id] = std::move(c);
    }
    nlohmann::json j = {{"n_cases", r.n_cases},
                        {"per_case", per_case},
                        {"failed_cases", r.failed_cases},
                        {"slices",
                         {{"category", r.by_category},
                          {"pdf_length_bin", r.by_length_bin},
                          {"question_type", r.by_question_type}}},
                        {"metadata", {{"embedder", r.embedder}}}};
    j["evidence_score"] = r.aggregate ? nlohmann::json(*r.aggregate) : nlohmann::json(nullptr);
    j["aggregate_defined"] = r.aggregate.has_value();
    return j;
}

std::string report_table(const EvalReport& r) {
    std::ostringstream out;
    out << "case                      cosine  concise  score\n";
    for (const auto& [id, res] : r.per_case) {
        char line[160];
        std::snprintf(line, sizeof line, "%-24s  %.4f  %.4f   %.4f%s\n", id.c_str(), res.score.cosine,
                      res.score.conciseness_factor, res.score.case_score, res.failed ? "  (failed)" : "");
        out << line;
    }
    auto slice = [&](const char* title, const std::map<std::string, double>& m) {
        for (const auto& [k, v] : m) out << title << " " << k << ": " << fixed4(v) << "\n";
    };
    slice("category", r.by_category);
    slice("length", r.by_length_bin);
    slice("type", r.by_question_type);
    out << "cases: " << r.n_cases << "  failed: " << r.failed_cases.size() << "  embedder: " << r.embedder << "\n";
    out << "Evidence_score: " << (r.aggregate ? fixed4(*r.aggregate) : std::string("undefined (no cases)")) << "\n";
    return out.str();
}

std::string report_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "case_id,cosine,conciseness_factor,case_score,failed\n";
    for (const auto& [id, res] : r.per_case) {
        std::string quoted = "\"";
        for (char c : id) {
            if (c == '"') quoted += '"';
            quoted += c;
        }
        quoted += '"';
        out << quoted << ',' << res.score.cosine << ',' << res.score.conciseness_factor << ','
            << res.score.case_score << ',' << (res.failed ? 1 : 0) << "\n";
    }
    return out.str();
}

std::map<std::string, std::vector<std::string>> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFound("cannot open predictions " + path.string());
    std::map<std::string, std::vector<std::string>> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (text::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto id = j.at("id").is_number_integer() ? std::to_string(j["id"].get<long long>())
                                                           : j.at("id").get<std::string>();
            out[id] = j.at("evidence").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(lineno, std::string("bad prediction record: ") + e.what());
        }
    }
    return out;
}

}  // namespace gechat
