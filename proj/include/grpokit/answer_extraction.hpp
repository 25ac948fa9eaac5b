#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace grpokit {

enum class AnswerKind { choice, numeric, expression, text, none };

/// Half-open byte range [begin, end) into the source text.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    bool operator==(const Span&) const = default;
};

struct ExtractedAnswer {
    AnswerKind kind = AnswerKind::none;
    std::string value;
    std::optional<std::string> unit;
    std::optional<Span> span;

    static ExtractedAnswer none() { return {}; }
    bool operator==(const ExtractedAnswer&) const = default;
};

struct TagParse {
    std::optional<std::string> think;
    std::optional<std::string> answer;
    bool well_formed = true;
    bool ordering_ok = true;

    bool operator==(const TagParse&) const = default;
};

enum class GroundTruthKind { choice, numeric, text };

struct GroundTruth {
    GroundTruthKind kind = GroundTruthKind::text;
    std::string value;
    /// Relative tolerance; numeric ground truths only.
    std::optional<double> tolerance;
    std::optional<std::vector<std::string>> accepted_units;

    /// Throws ConfigError when the invariants on tolerance or numeric value fail.
    void validate() const;
};

struct ExtractionOptions {
    /// Matched case-insensitively; the last occurrence of any cue wins.
    std::vector<std::string> cue_phrases{"answer is", "final answer", "=", "therefore"};
    bool strip_terminal_punctuation = true;
    bool case_fold = true;
    double default_rel_tolerance = 1e-6;
    double abs_tolerance_floor = 1e-9;
};

std::string_view to_string(AnswerKind kind);
std::string_view to_string(GroundTruthKind kind);
GroundTruthKind ground_truth_kind_from_string(std::string_view name);

/// Trim, collapse internal whitespace and optionally strip terminal punctuation.
/// Case is preserved; comparison folds case separately. Idempotent.
std::string normalize_text(std::string_view text, const ExtractionOptions& options = {});

/// Contents of the last complete \boxed{...}, nested braces kept verbatim.
std::optional<std::string> extract_boxed(std::string_view text);

/// Byte range of the contents of the last complete \boxed{...}.
std::optional<Span> find_last_box(std::string_view text);

ExtractedAnswer extract_choice(std::string_view text);

ExtractedAnswer extract_free_form(std::string_view text, const ExtractionOptions& options = {});

/// Classify an already isolated answer string (tag or box contents) as
/// numeric, expression or text. `offset` shifts the reported span.
ExtractedAnswer classify_value(std::string_view raw, std::size_t offset = 0,
                               const ExtractionOptions& options = {});

TagParse parse_tags(std::string_view text);

/// Throws ConfigError when `gt` is malformed.
bool answers_match(const ExtractedAnswer& extracted, const GroundTruth& gt,
                   const ExtractionOptions& options = {});

}  // namespace grpokit
