#include "grpokit/answer_extraction.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "grpokit/error.hpp"
#include "grpokit/numeric_expression.hpp"

namespace grpokit {

namespace {

constexpr std::string_view kBoxMacro = "\\boxed{";
constexpr std::string_view kTerminalPunctuation = ".,;:!?";

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_letter(char c) { return is_upper(c) || is_lower(c); }
char to_upper(char c) { return is_lower(c) ? static_cast<char>(c - 'a' + 'A') : c; }

std::string fold_case(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Narrow [begin, end) past surrounding whitespace and, optionally, trailing
// terminal punctuation.
void trim_region(std::string_view text, std::size_t& begin, std::size_t& end, bool strip_punct) {
    while (begin < end && is_space(text[begin])) ++begin;
    bool changed = true;
    while (changed && end > begin) {
        changed = false;
        while (end > begin && is_space(text[end - 1])) {
            --end;
            changed = true;
        }
        if (strip_punct && end > begin && kTerminalPunctuation.find(text[end - 1]) != std::string_view::npos) {
            --end;
            changed = true;
        }
    }
}

bool strip_pair(std::string_view text, std::size_t& begin, std::size_t& end, std::string_view open,
                std::string_view close) {
    if (end - begin < open.size() + close.size()) return false;
    if (text.substr(begin, open.size()) != open) return false;
    if (text.substr(end - close.size(), close.size()) != close) return false;
    begin += open.size();
    end -= close.size();
    return true;
}

// Remove math-mode and emphasis wrappers that commonly surround final answers.
void strip_wrappers(std::string_view text, std::size_t& begin, std::size_t& end, bool strip_punct) {
    bool changed = true;
    while (changed) {
        changed = false;
        trim_region(text, begin, end, strip_punct);
        changed |= strip_pair(text, begin, end, "$$", "$$");
        changed |= strip_pair(text, begin, end, "$", "$");
        changed |= strip_pair(text, begin, end, "\\(", "\\)");
        changed |= strip_pair(text, begin, end, "\\[", "\\]");
        changed |= strip_pair(text, begin, end, "**", "**");
        changed |= strip_pair(text, begin, end, "\\text{", "}");
        changed |= strip_pair(text, begin, end, "\\mathrm{", "}");
    }
}

// Close brace index matching the open brace just before `content_begin`.
std::optional<std::size_t> matching_brace(std::string_view text, std::size_t content_begin) {
    int depth = 1;
    for (std::size_t i = content_begin; i < text.size(); ++i) {
        if (text[i] == '{') {
            ++depth;
        } else if (text[i] == '}') {
            if (--depth == 0) return i;
        }
    }
    return std::nullopt;
}

enum TagIndex { kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose };
constexpr std::array<std::string_view, 4> kTags{"<think>", "</think>", "<answer>", "</answer>"};

struct TagScan {
    std::array<std::vector<std::size_t>, 4> positions;
};

TagScan scan_tags(std::string_view text) {
    TagScan scan;
    for (std::size_t k = 0; k < kTags.size(); ++k) {
        for (auto pos = text.find(kTags[k]); pos != std::string_view::npos;
             pos = text.find(kTags[k], pos + 1)) {
            scan.positions[k].push_back(pos);
        }
    }
    return scan;
}

struct Block {
    std::size_t open;           // position of the opening tag
    std::size_t content_begin;
    std::size_t content_end;    // position of the closing tag
    std::size_t close_end;
};

std::optional<Block> first_block(const TagScan& scan, std::size_t open_kind, std::size_t close_kind) {
    const auto& opens = scan.positions[open_kind];
    const auto& closes = scan.positions[close_kind];
    if (opens.empty()) return std::nullopt;
    const std::size_t open = opens.front();
    const std::size_t content_begin = open + kTags[open_kind].size();
    auto it = std::find_if(closes.begin(), closes.end(), [&](std::size_t c) { return c >= content_begin; });
    if (it == closes.end()) return std::nullopt;
    return Block{open, content_begin, *it, *it + kTags[close_kind].size()};
}

std::optional<Block> answer_block(std::string_view text) {
    return first_block(scan_tags(text), kAnswerOpen, kAnswerClose);
}

bool sentence_start_before(std::string_view text, std::size_t i) {
    while (i > 0 && (text[i - 1] == ' ' || text[i - 1] == '\t')) --i;
    if (i == 0) return true;
    const char p = text[i - 1];
    return p == '.' || p == '!' || p == '?' || p == '\n' || p == ':';
}

// Letter at i used as an English word ("I think", "A cat") rather than an option label.
bool looks_like_word(std::string_view text, std::size_t i) {
    const char c = text[i];
    if (c != 'I' && c != 'A') return false;
    const std::size_t next = i + 1;
    if (next < text.size() && (text[next] == '\'' || text.substr(next, 3) == "\xE2\x80\x99")) return true;
    if (next + 1 >= text.size() || text[next] != ' ' || !is_lower(text[next + 1])) return false;
    return c == 'I' || sentence_start_before(text, i);
}

std::optional<std::size_t> last_standalone_letter(std::string_view text) {
    std::optional<std::size_t> found;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (!is_letter(c)) continue;
        const bool prev_ok = i == 0 || !is_alnum(text[i - 1]);
        const bool next_ok = i + 1 >= text.size() || !is_alnum(text[i + 1]);
        if (!prev_ok || !next_ok) continue;
        if (i > 0 && text[i - 1] == '\\') continue;  // LaTeX control symbol
        const bool wrapped = i > 0 && text[i - 1] == '(' && i + 1 < text.size() && text[i + 1] == ')';
        if (wrapped) {
            const bool outer_ok = i < 2 || !is_alnum(text[i - 2]);
            if (outer_ok) found = i;
            continue;
        }
        if (!is_upper(c) || looks_like_word(text, i)) continue;
        found = i;
    }
    return found;
}

// A region that is nothing but an option label: "B", "(b)", "C.", "D)".
std::optional<std::size_t> sole_letter(std::string_view text, std::size_t begin, std::size_t end) {
    strip_wrappers(text, begin, end, true);
    if (end - begin == 3 && text[begin] == '(' && text[end - 1] == ')') {
        ++begin;
        --end;
    } else if (end - begin == 2 && text[end - 1] == ')') {
        --end;
    }
    if (end - begin == 1 && is_letter(text[begin])) return begin;
    return std::nullopt;
}

std::optional<std::size_t> choice_in_region(std::string_view text, std::size_t begin, std::size_t end) {
    if (auto sole = sole_letter(text, begin, end)) return sole;
    if (auto idx = last_standalone_letter(text.substr(begin, end - begin))) return begin + *idx;
    return std::nullopt;
}

ExtractedAnswer make_choice(std::string_view text, std::size_t index) {
    ExtractedAnswer out;
    out.kind = AnswerKind::choice;
    out.value = std::string(1, to_upper(text[index]));
    out.span = Span{index, index + 1};
    return out;
}

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

// Option labels compared by their bare letter: "(b)" == "B".
std::string bare_choice(std::string_view value) {
    std::size_t b = 0;
    std::size_t e = value.size();
    if (auto idx = sole_letter(value, b, e)) return std::string(1, to_upper(value[*idx]));
    std::string s(value);
    std::transform(s.begin(), s.end(), s.begin(), to_upper);
    return collapse_whitespace(s);
}

struct ParsedNumber {
    double value;
    std::string unit;
};

std::optional<ParsedNumber> parse_numeric_value(std::string_view value) {
    if (auto v = evaluate_numeric(value)) return ParsedNumber{*v, {}};
    if (auto n = parse_number_with_unit(value)) return ParsedNumber{n->value, n->unit};
    return std::nullopt;
}

}  // namespace

std::string_view to_string(AnswerKind kind) {
    switch (kind) {
        case AnswerKind::choice: return "choice";
        case AnswerKind::numeric: return "numeric";
        case AnswerKind::expression: return "expression";
        case AnswerKind::text: return "text";
        case AnswerKind::none: return "none";
    }
    return "none";
}

std::string_view to_string(GroundTruthKind kind) {
    switch (kind) {
        case GroundTruthKind::choice: return "choice";
        case GroundTruthKind::numeric: return "numeric";
        case GroundTruthKind::text: return "text";
    }
    return "text";
}

GroundTruthKind ground_truth_kind_from_string(std::string_view name) {
    if (name == "choice") return GroundTruthKind::choice;
    if (name == "numeric") return GroundTruthKind::numeric;
    if (name == "text") return GroundTruthKind::text;
    throw ConfigError("unknown ground truth kind '" + std::string(name) + "'");
}

void GroundTruth::validate() const {
    if (tolerance) {
        if (kind != GroundTruthKind::numeric) throw ConfigError("tolerance is only valid for numeric ground truth");
        if (!(*tolerance >= 0.0)) throw ConfigError("tolerance must be >= 0");
    }
    switch (kind) {
        case GroundTruthKind::numeric:
            if (!parse_numeric_value(normalize_text(value))) {
                throw ConfigError("numeric ground truth '" + value + "' does not parse");
            }
            break;
        case GroundTruthKind::choice:
            if (bare_choice(value).size() != 1 || !is_upper(bare_choice(value).front())) {
                throw ConfigError("choice ground truth '" + value + "' is not a single letter");
            }
            break;
        case GroundTruthKind::text:
            break;
    }
}

std::string normalize_text(std::string_view text, const ExtractionOptions& options) {
    std::size_t begin = 0;
    std::size_t end = text.size();
    trim_region(text, begin, end, options.strip_terminal_punctuation);
    return collapse_whitespace(text.substr(begin, end - begin));
}

std::optional<Span> find_last_box(std::string_view text) {
    std::optional<Span> last;
    for (auto pos = text.find(kBoxMacro); pos != std::string_view::npos; pos = text.find(kBoxMacro, pos + 1)) {
        const std::size_t content = pos + kBoxMacro.size();
        if (auto close = matching_brace(text, content)) last = Span{content, *close};
    }
    return last;
}

std::optional<std::string> extract_boxed(std::string_view text) {
    if (auto span = find_last_box(text)) return std::string(text.substr(span->begin, span->end - span->begin));
    return std::nullopt;
}

TagParse parse_tags(std::string_view text) {
    const TagScan scan = scan_tags(text);
    TagParse out;

    for (const auto& p : scan.positions) {
        if (p.size() > 1) out.well_formed = false;
    }
    const auto think = first_block(scan, kThinkOpen, kThinkClose);
    const auto answer = first_block(scan, kAnswerOpen, kAnswerClose);
    if (think) out.think = std::string(text.substr(think->content_begin, think->content_end - think->content_begin));
    if (answer) {
        out.answer = std::string(text.substr(answer->content_begin, answer->content_end - answer->content_begin));
    }

    // every tag present must belong to a complete block
    const bool think_tags = !scan.positions[kThinkOpen].empty() || !scan.positions[kThinkClose].empty();
    const bool answer_tags = !scan.positions[kAnswerOpen].empty() || !scan.positions[kAnswerClose].empty();
    if ((think_tags && !think) || (answer_tags && !answer)) out.well_formed = false;
    if (think && scan.positions[kThinkClose].front() < think->open) out.well_formed = false;
    if (answer && scan.positions[kAnswerClose].front() < answer->open) out.well_formed = false;

    if (think && answer) {
        const bool think_first = think->close_end <= answer->open;
        const bool answer_first = answer->close_end <= think->open;
        if (!think_first && !answer_first) out.well_formed = false;  // blocks overlap or nest
        out.ordering_ok = think_first;
    }
    return out;
}

ExtractedAnswer classify_value(std::string_view raw, std::size_t offset, const ExtractionOptions& options) {
    std::size_t begin = 0;
    std::size_t end = raw.size();
    strip_wrappers(raw, begin, end, options.strip_terminal_punctuation);
    if (begin >= end) return ExtractedAnswer::none();

    const std::string_view region = raw.substr(begin, end - begin);
    const std::string normalized = collapse_whitespace(region);
    ExtractedAnswer out;
    out.span = Span{offset + begin, offset + end};

    if (auto number = parse_number_with_unit(region)) {
        out.kind = AnswerKind::numeric;
        out.value = number->number;
        if (!number->unit.empty()) out.unit = normalize_text(number->unit, options);
        out.span = Span{offset + begin + number->token_begin, offset + begin + number->token_end};
        return out;
    }
    if (evaluate_rational(normalized)) {
        out.kind = AnswerKind::expression;
        out.value = normalized;
        return out;
    }
    out.kind = AnswerKind::text;
    out.value = normalized;
    return out;
}

ExtractedAnswer extract_choice(std::string_view text) {
    if (auto block = answer_block(text)) {
        if (auto idx = choice_in_region(text, block->content_begin, block->content_end)) return make_choice(text, *idx);
    }
    if (auto box = find_last_box(text)) {
        if (auto idx = choice_in_region(text, box->begin, box->end)) return make_choice(text, *idx);
    }
    if (auto idx = last_standalone_letter(text)) return make_choice(text, *idx);
    return ExtractedAnswer::none();
}

ExtractedAnswer extract_free_form(std::string_view text, const ExtractionOptions& options) {
    if (auto block = answer_block(text)) {
        auto out = classify_value(text.substr(block->content_begin, block->content_end - block->content_begin),
                                  block->content_begin, options);
        if (out.kind != AnswerKind::none) return out;
    }
    if (auto box = find_last_box(text)) {
        auto out = classify_value(text.substr(box->begin, box->end - box->begin), box->begin, options);
        if (out.kind != AnswerKind::none) return out;
    }

    const std::string folded = fold_case(text);
    std::optional<std::size_t> cue_begin;
    std::size_t cue_end = 0;
    for (const auto& cue : options.cue_phrases) {
        if (cue.empty()) continue;
        const std::string needle = fold_case(cue);
        const auto pos = folded.rfind(needle);
        if (pos == std::string::npos) continue;
        const std::size_t end = pos + needle.size();
        if (!cue_begin || pos > *cue_begin || (pos == *cue_begin && end > cue_end)) {
            cue_begin = pos;
            cue_end = end;
        }
    }
    if (!cue_begin) return ExtractedAnswer::none();

    std::size_t begin = cue_end;
    std::size_t end = text.find('\n', begin);
    if (end == std::string_view::npos) end = text.size();
    // the value ends at the first sentence break; decimal points are not breaks
    for (std::size_t i = begin; i < end; ++i) {
        if (text[i] == '.' && (i + 1 == end || is_space(text[i + 1]))) {
            end = i;
            break;
        }
    }
    while (begin < end && (is_space(text[begin]) || text[begin] == ':' || text[begin] == ',')) ++begin;
    return classify_value(text.substr(begin, end - begin), begin, options);
}

bool answers_match(const ExtractedAnswer& extracted, const GroundTruth& gt, const ExtractionOptions& options) {
    gt.validate();
    if (extracted.kind == AnswerKind::none) return false;

    switch (gt.kind) {
        case GroundTruthKind::choice:
            return bare_choice(extracted.value) == bare_choice(gt.value);

        case GroundTruthKind::numeric: {
            const auto truth = parse_numeric_value(normalize_text(gt.value));
            auto got = parse_numeric_value(extracted.value);
            if (!truth || !got) return false;
            const std::string unit = extracted.unit.value_or(got->unit);
            if (!unit.empty() && gt.accepted_units) {
                const auto& accepted = *gt.accepted_units;
                if (std::find(accepted.begin(), accepted.end(), unit) == accepted.end()) return false;
            }
            const double tol = gt.tolerance.value_or(options.default_rel_tolerance);
            const double bound = std::max(tol * std::fabs(truth->value), options.abs_tolerance_floor);
            return std::fabs(got->value - truth->value) <= bound;
        }

        case GroundTruthKind::text: {
            std::string lhs = extracted.value;
            if (extracted.unit) lhs += " " + *extracted.unit;
            lhs = normalize_text(lhs, options);
            std::string rhs = normalize_text(gt.value, options);
            if (options.case_fold) {
                lhs = fold_case(lhs);
                rhs = fold_case(rhs);
            }
            return lhs == rhs;
        }
    }
    return false;
}

}  // namespace grpokit
