#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "grpokit/answer_extraction.hpp"

namespace grpokit {

enum class TaskKind { math_boxed, multiple_choice, free_form, detection };
enum class FormatProfile { think_only, think_answer };

std::string_view to_string(TaskKind kind);
std::string_view to_string(FormatProfile profile);
TaskKind task_kind_from_string(std::string_view name);
FormatProfile format_profile_from_string(std::string_view name);

struct BoundingBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    bool valid() const { return x_min <= x_max && y_min <= y_max; }
    double area() const { return (x_max - x_min) * (y_max - y_min); }
    bool operator==(const BoundingBox&) const = default;
};

struct RewardWeights {
    double accuracy = 1.0;
    double format = 1.0;
};

struct RewardSpec {
    TaskKind task_kind = TaskKind::math_boxed;
    std::variant<GroundTruth, std::vector<BoundingBox>> ground_truth;
    FormatProfile format_profile = FormatProfile::think_answer;
    RewardWeights weights;
    /// When set, accuracy only counts if the format check passed.
    bool strict_format_gating = false;
    ExtractionOptions extraction;

    /// Throws ConfigError on a kind/ground-truth mismatch or negative weights.
    void validate() const;
};

struct RewardOutcome {
    double total = 0.0;
    double accuracy = 0.0;
    double format = 0.0;
    std::string detail;
};

double format_reward(std::string_view response, FormatProfile profile);

/// Binary correctness for non-detection tasks. Throws InputError for detection specs.
double accuracy_reward(std::string_view response, const RewardSpec& spec);

/// Throws InputError for an invalid box.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Optimal one-to-one matching between predictions and ground truth, summed IoU / |gt|.
/// Throws ConfigError when gt is empty.
double detection_reward(std::span<const BoundingBox> pred, std::span<const BoundingBox> gt);

/// One box per non-empty line, four comma-separated reals, optionally wrapped
/// in [] or (). Returns nullopt on any malformed or invalid line.
std::optional<std::vector<BoundingBox>> parse_box_list(std::string_view text);

RewardOutcome composite_reward(std::string_view response, const RewardSpec& spec);

}  // namespace grpokit
