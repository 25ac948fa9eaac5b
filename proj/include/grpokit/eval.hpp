#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "grpokit/answer_extraction.hpp"
#include "grpokit/backend.hpp"

namespace grpokit {

enum class Grade { junior_high, high_school, college, social_test };
enum class Subject { math, physics, chemistry, biology, deduction };
enum class QuestionType { multiple_choice, free_form };

inline constexpr Grade kGrades[] = {Grade::junior_high, Grade::high_school, Grade::college, Grade::social_test};
inline constexpr Subject kSubjects[] = {Subject::math, Subject::physics, Subject::chemistry, Subject::biology,
                                        Subject::deduction};

std::string_view to_string(Grade g);
std::string_view to_string(Subject s);
std::string_view to_string(QuestionType t);
Grade grade_from_string(std::string_view name);
Subject subject_from_string(std::string_view name);
QuestionType question_type_from_string(std::string_view name);
/// Column header used in the score table, e.g. "Junior High School".
std::string_view display_name(Grade g);
std::string_view display_name(Subject s);

struct BenchmarkItem {
    std::string id;
    Grade grade = Grade::junior_high;
    Subject category = Subject::math;
    std::string subcategory;
    std::string question;
    QuestionType question_type = QuestionType::multiple_choice;
    std::string answer;
    std::optional<std::string> image_ref;
};

/// Fields: id, grade, category, subcategory, question, question_type, answer
/// (strings, required); image_ref optional. Throws SchemaError.
BenchmarkItem item_from_json(const nlohmann::json& j);
nlohmann::json item_to_json(const BenchmarkItem& item);

/// Aggregate statistics to compare a manifest against; unset fields are not checked.
struct ExpectedStats {
    std::optional<std::size_t> total;
    std::optional<std::size_t> multiple_choice;
    std::optional<std::size_t> free_form;
    std::optional<std::size_t> grades;
    std::optional<std::size_t> categories;
    std::optional<std::size_t> subcategories;

    /// The official benchmark: 942 questions, 783 multiple choice, 159
    /// free-form, 4 grades, 5 categories, 38 subcategories.
    static ExpectedStats published();
    static ExpectedStats from_json(const nlohmann::json& j);
};

struct ManifestStats {
    std::size_t total = 0;
    std::size_t multiple_choice = 0;
    std::size_t free_form = 0;
    std::map<std::string, std::size_t> by_grade;
    std::map<std::string, std::size_t> by_category;
    std::size_t subcategories = 0;  // distinct subcategory names

    nlohmann::json to_json() const;
};

struct LineError {
    std::size_t line = 0;  // 1-based
    std::string message;
};

struct ManifestReport {
    std::vector<LineError> errors;
    std::vector<std::string> warnings;  // statistic mismatches
    std::vector<std::string> notes;
    ManifestStats stats;

    bool ok() const { return errors.empty(); }
    nlohmann::json to_json() const;
};

struct Manifest {
    std::vector<BenchmarkItem> items;  // valid lines only, file order
    ManifestReport report;
};

Manifest parse_manifest(std::istream& in, const std::optional<ExpectedStats>& expected = std::nullopt);
Manifest load_manifest(const std::filesystem::path& path, const std::optional<ExpectedStats>& expected = std::nullopt);

/// Lines of {"id", "response"}. Throws SchemaError naming the line.
std::map<std::string, std::string> load_responses(const std::filesystem::path& path);

enum class JudgeKind { rules, llm };
enum class JudgeVerdict { correct, incorrect, unanswered, deferred };

std::string_view to_string(JudgeKind k);
std::string_view to_string(JudgeVerdict v);
JudgeKind judge_kind_from_string(std::string_view name);

struct Judgement {
    JudgeVerdict verdict = JudgeVerdict::unanswered;
    std::string extracted;  // empty when unanswered
    std::string detail;     // raw judge replies or failure message
};

/// Ground truth derived from an item: choice for multiple choice; numeric
/// when the answer evaluates to a number, else text.
GroundTruth item_ground_truth(const BenchmarkItem& item);

/// rules: local extraction + answers_match. llm: extraction prompt then
/// scoring prompt through `client`; a backend failure yields deferred.
Judgement judge(const BenchmarkItem& item, std::string_view response, JudgeKind kind, BackendClient* client = nullptr,
                const ExtractionOptions& options = {});

struct ScoreOptions {
    bool exclude_unanswered = false;  // drop unanswered from the denominator
};

struct SliceScore {
    std::size_t items = 0;
    std::size_t correct = 0;
    std::size_t incorrect = 0;
    std::size_t unanswered = 0;
    std::size_t deferred = 0;
    std::size_t attempted = 0;      // accuracy denominator
    std::optional<double> accuracy;  // absent for an empty slice

    nlohmann::json to_json() const;
};

struct ScoreReport {
    std::string judge_backend;
    bool exclude_unanswered = false;
    SliceScore overall;
    std::map<Grade, SliceScore> by_grade;
    std::map<Subject, SliceScore> by_category;
    std::vector<std::string> flagged;  // ids of deferred items

    nlohmann::json to_json() const;
    /// Fixed-width table: Model | Avg | four grades | five categories, in percent.
    std::string format_table(std::string_view model) const;
};

/// `judgements[i]` belongs to `items[i]`.
ScoreReport aggregate(const std::vector<BenchmarkItem>& items, const std::vector<Judgement>& judgements,
                      std::string judge_backend, const ScoreOptions& options = {});

}  // namespace grpokit
