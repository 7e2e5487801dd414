#pragma once

#include "gechat/providers.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gechat {

enum class Category {
    Biology, Business, Chemistry, ComputerScience, History,
    Management, Mathematics, Physics, Semiconductors, Story,
};
enum class LengthBin { short_doc, medium_doc, long_doc };
enum class QuestionType { Synthesis, Structure, TermExplanation };

std::string to_string(Category c);
std::string to_string(LengthBin b);
std::string to_string(QuestionType t);
std::optional<Category> parse_category(std::string_view s);
std::optional<LengthBin> parse_length_bin(std::string_view s);
std::optional<QuestionType> parse_question_type(std::string_view s);

struct EvalCase {
    std::string case_id;
    Category category = Category::Story;
    LengthBin pdf_length_bin = LengthBin::short_doc;
    QuestionType question_type = QuestionType::Synthesis;
    std::string question;
    std::string answer_gt;
    std::vector<std::string> evidence_gt;
    std::string document_ref;
};

/// JSON lines; blank lines are skipped. Throws SchemaError with the 1-based line number.
std::vector<EvalCase> parse_dataset(std::istream& in);
std::vector<EvalCase> load_dataset(const std::filesystem::path& path);

struct CaseScore {
    double cosine = 0.0;
    double conciseness_factor = 1.0;
    double case_score = 0.0;
};

struct ScoreOptions {
    /// Use the raw cosine instead of clamping it at 0.
    bool allow_negative_cosine = false;
};

/// cos(E, E_gt) * min(1, L_gt / L) over newline-joined evidence, L in whitespace words.
CaseScore case_score(const std::vector<std::string>& generated, const std::vector<std::string>& ground_truth,
                     const EmbeddingProvider& embed, const ScoreOptions& options = {});

using EvidencePipeline = std::function<std::vector<std::string>(const EvalCase&)>;

struct CaseResult {
    CaseScore score;
    bool failed = false;
    std::string error;
};

struct EvalReport {
    std::map<std::string, CaseResult> per_case;  // by case id
    std::optional<double> aggregate;              // undefined for an empty run
    std::map<std::string, double> by_category;
    std::map<std::string, double> by_length_bin;
    std::map<std::string, double> by_question_type;
    std::size_t n_cases = 0;
    std::vector<std::string> failed_cases;
    std::string embedder;
};

/// Failed pipeline calls score 0 and are listed in failed_cases.
EvalReport run_benchmark(const std::vector<EvalCase>& cases, const EvidencePipeline& pipeline,
                         const EmbeddingProvider& embed, const ScoreOptions& options = {},
                         std::size_t parallelism = 1);

nlohmann::json report_to_json(const EvalReport& r);
std::string report_table(const EvalReport& r);
std::string report_csv(const EvalReport& r);

/// Per-case evidence keyed by case id, from JSON lines {"id", "evidence":[...]}.
std::map<std::string, std::vector<std::string>> load_predictions(const std::filesystem::path& path);

}  // namespace gechat
