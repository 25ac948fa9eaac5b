#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "grpokit/backend.hpp"

namespace grpokit {

enum class Category { chart_diagram, natural_scene, text_only, mixed, math };
enum class RecordStatus { pending, generated, rewritten, accepted, rejected };
enum class Stage { generate, rewrite, filter };

std::string_view to_string(Category c);
std::string_view to_string(RecordStatus s);
std::string_view to_string(Stage s);
Category category_from_string(std::string_view name);
RecordStatus status_from_string(std::string_view name);

bool is_terminal(RecordStatus s);

struct PipelineRecord {
    std::string id;
    std::string image_ref;
    std::optional<Category> category;
    std::vector<std::string> tags;  // metadata used by classify_category
    std::string caption;            // formal description of the image
    std::string question;
    std::string ground_truth;
    std::optional<std::string> cot;
    std::optional<std::string> cot_rewritten;
    RecordStatus status = RecordStatus::pending;
    std::optional<std::string> failure_reason;
    int attempt = 0;  // regeneration round, 0-based

    bool operator==(const PipelineRecord&) const = default;
};

/// Line schema: id, caption, question, ground_truth required (strings);
/// image_ref, category, tags, cot, cot_rewritten, status, failure_reason,
/// attempt optional. Throws SchemaError.
PipelineRecord record_from_json(const nlohmann::json& j);
nlohmann::json record_to_json(const PipelineRecord& r);

/// Caller-supplied category wins; otherwise tags are mapped onto the
/// five-way taxonomy. Tags spanning several categories, or none, give mixed.
Category classify_category(const PipelineRecord& record);

struct VerdictGrammar {
    std::vector<std::string> valid_markers{"valid", "yes"};
    std::vector<std::string> invalid_markers{"invalid", "no", "not valid"};
};

enum class Verdict { valid, invalid, unparseable };

/// Classifies the last non-empty line of a filter response.
Verdict parse_verdict(std::string_view response, const VerdictGrammar& grammar = {});

/// One stage transition. Throws InputError if the record is not in the
/// stage's predecessor status and lets BackendError through untouched.
PipelineRecord run_stage(const PipelineRecord& record, Stage stage, BackendClient& client,
                         const VerdictGrammar& grammar = {});

struct PipelineOptions {
    std::size_t max_in_flight = 4;
    int max_attempts = 3;  // per backend call
    std::chrono::milliseconds backoff_initial{100};
    int max_regens = 0;    // extra generate/rewrite/filter rounds for rejected records
    VerdictGrammar grammar;
};

struct PipelineSummary {
    std::size_t input_records = 0;  // non-blank input lines
    std::size_t processed = 0;
    std::size_t quarantined = 0;
    std::size_t resumed_terminal = 0;  // already terminal before this run
    std::size_t backend_calls = 0;
    std::map<std::string, std::size_t> by_status;
    std::map<std::string, std::size_t> by_category;
    std::map<std::string, std::size_t> by_failure_reason;

    nlohmann::json to_json() const;
};

/// Drives every input record to accepted/rejected. Progress is journaled to
/// `<output>.journal` after each stage so an interrupted run resumes without
/// repeating completed backend calls; the output is written via temp file +
/// rename, bad lines go to `<output>.quarantine.jsonl`.
PipelineSummary run_pipeline(const std::filesystem::path& input, const std::filesystem::path& output,
                             BackendClient& client, const PipelineOptions& options = {});

}  // namespace grpokit
