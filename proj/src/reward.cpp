#include "grpokit/reward.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "grpokit/assignment.hpp"
#include "grpokit/error.hpp"

namespace grpokit {

namespace {

std::string describe(const ExtractedAnswer& a) {
    if (a.kind == AnswerKind::none) return "nothing extracted";
    std::string out = std::string(to_string(a.kind)) + " '" + a.value + "'";
    if (a.unit) out += " [" + *a.unit + "]";
    return out;
}

ExtractedAnswer extract_for(std::string_view response, const RewardSpec& spec) {
    switch (spec.task_kind) {
        case TaskKind::math_boxed: {
            // no box, no answer: the format is part of the task
            const auto box = find_last_box(response);
            if (!box) return ExtractedAnswer::none();
            return classify_value(response.substr(box->begin, box->end - box->begin), box->begin, spec.extraction);
        }
        case TaskKind::multiple_choice:
            return extract_choice(response);
        case TaskKind::free_form:
            return extract_free_form(response, spec.extraction);
        case TaskKind::detection:
            break;
    }
    throw InputError("accuracy_reward does not handle detection tasks");
}

std::optional<double> parse_real(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

}  // namespace

std::string_view to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::math_boxed: return "math_boxed";
        case TaskKind::multiple_choice: return "multiple_choice";
        case TaskKind::free_form: return "free_form";
        case TaskKind::detection: return "detection";
    }
    return "math_boxed";
}

std::string_view to_string(FormatProfile profile) {
    return profile == FormatProfile::think_only ? "think_only" : "think_answer";
}

TaskKind task_kind_from_string(std::string_view name) {
    if (name == "math_boxed") return TaskKind::math_boxed;
    if (name == "multiple_choice") return TaskKind::multiple_choice;
    if (name == "free_form") return TaskKind::free_form;
    if (name == "detection") return TaskKind::detection;
    throw ConfigError("unknown task kind '" + std::string(name) + "'");
}

FormatProfile format_profile_from_string(std::string_view name) {
    if (name == "think_only") return FormatProfile::think_only;
    if (name == "think_answer") return FormatProfile::think_answer;
    throw ConfigError("unknown format profile '" + std::string(name) + "'");
}

void RewardSpec::validate() const {
    const bool boxes = std::holds_alternative<std::vector<BoundingBox>>(ground_truth);
    if ((task_kind == TaskKind::detection) != boxes) {
        throw ConfigError("detection tasks take box ground truth; other tasks take a GroundTruth");
    }
    if (boxes) {
        for (const auto& b : std::get<std::vector<BoundingBox>>(ground_truth)) {
            if (!b.valid()) throw ConfigError("invalid ground-truth box");
        }
    } else {
        std::get<GroundTruth>(ground_truth).validate();
    }
    if (!(weights.accuracy >= 0.0) || !(weights.format >= 0.0)) throw ConfigError("reward weights must be >= 0");
}

double format_reward(std::string_view response, FormatProfile profile) {
    const TagParse tags = parse_tags(response);
    if (!tags.well_formed || !tags.ordering_ok || !tags.think) return 0.0;
    if (profile == FormatProfile::think_answer && !tags.answer) return 0.0;
    return 1.0;
}

double accuracy_reward(std::string_view response, const RewardSpec& spec) {
    if (spec.task_kind == TaskKind::detection) throw InputError("accuracy_reward does not handle detection tasks");
    const auto& gt = std::get<GroundTruth>(spec.ground_truth);
    return answers_match(extract_for(response, spec), gt, spec.extraction) ? 1.0 : 0.0;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
    if (!a.valid() || !b.valid()) throw InputError("invalid bounding box: min exceeds max");
    const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return a == b ? 1.0 : 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

double detection_reward(std::span<const BoundingBox> pred, std::span<const BoundingBox> gt) {
    if (gt.empty()) throw ConfigError("detection reward needs at least one ground-truth box");
    if (pred.empty()) return 0.0;
    std::vector<std::vector<double>> scores(gt.size(), std::vector<double>(pred.size()));
    for (std::size_t g = 0; g < gt.size(); ++g) {
        for (std::size_t p = 0; p < pred.size(); ++p) scores[g][p] = iou(gt[g], pred[p]);
    }
    const auto match = max_weight_assignment(scores);
    double total = 0.0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
        if (match[g] >= 0) total += scores[g][static_cast<std::size_t>(match[g])];
    }
    return std::clamp(total / static_cast<double>(gt.size()), 0.0, 1.0);
}

std::optional<std::vector<BoundingBox>> parse_box_list(std::string_view text) {
    std::vector<BoundingBox> boxes;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        std::string_view l = line;
        while (!l.empty() && std::isspace(static_cast<unsigned char>(l.front()))) l.remove_prefix(1);
        while (!l.empty() && std::isspace(static_cast<unsigned char>(l.back()))) l.remove_suffix(1);
        if (l.empty()) continue;
        if (l.size() >= 2 && ((l.front() == '[' && l.back() == ']') || (l.front() == '(' && l.back() == ')'))) {
            l = l.substr(1, l.size() - 2);
        }
        double v[4];
        std::size_t n = 0;
        while (true) {
            const auto comma = l.find(',');
            if (n == 4) return std::nullopt;
            auto value = parse_real(l.substr(0, comma));
            if (!value) return std::nullopt;
            v[n++] = *value;
            if (comma == std::string_view::npos) break;
            l.remove_prefix(comma + 1);
        }
        if (n != 4) return std::nullopt;
        BoundingBox box{v[0], v[1], v[2], v[3]};
        if (!box.valid()) return std::nullopt;
        boxes.push_back(box);
    }
    return boxes;
}

RewardOutcome composite_reward(std::string_view response, const RewardSpec& spec) {
    RewardOutcome out;
    out.format = format_reward(response, spec.format_profile);
    std::ostringstream detail;
    detail << "format=" << out.format << " (" << to_string(spec.format_profile) << ")";

    if (spec.task_kind == TaskKind::detection) {
        const auto& gt = std::get<std::vector<BoundingBox>>(spec.ground_truth);
        const auto tags = parse_tags(response);
        std::optional<std::vector<BoundingBox>> pred;
        if (tags.answer) pred = parse_box_list(*tags.answer);
        if (pred) {
            out.accuracy = detection_reward(*pred, gt);
            detail << "; accuracy=" << out.accuracy << " (detection: " << pred->size() << " predicted, " << gt.size()
                   << " ground-truth boxes)";
        } else {
            detail << "; accuracy=0 (detection: no parseable box list in answer block)";
        }
    } else {
        const auto& gt = std::get<GroundTruth>(spec.ground_truth);
        const auto extracted = extract_for(response, spec);
        out.accuracy = answers_match(extracted, gt, spec.extraction) ? 1.0 : 0.0;
        detail << "; accuracy=" << out.accuracy << " (" << to_string(spec.task_kind) << ": " << describe(extracted)
               << " vs '" << gt.value << "')";
    }

    if (spec.strict_format_gating && out.format == 0.0 && out.accuracy != 0.0) {
        out.accuracy = 0.0;
        detail << "; accuracy gated by failed format check";
    }
    out.total = spec.weights.accuracy * out.accuracy + spec.weights.format * out.format;
    out.detail = detail.str();
    return out;
}

}  // namespace grpokit
