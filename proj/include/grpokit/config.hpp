#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "grpokit/answer_extraction.hpp"
#include "grpokit/backend.hpp"
#include "grpokit/eval.hpp"
#include "grpokit/grpo.hpp"
#include "grpokit/pipeline.hpp"
#include "grpokit/reward.hpp"
#include "grpokit/trainer.hpp"

namespace grpokit {

/// Reward settings applied on top of a task's own reward specs; unset fields
/// keep the task's values.
struct RewardOverrides {
    std::optional<RewardWeights> weights;
    std::optional<FormatProfile> format_profile;
    std::optional<bool> strict_format_gating;
};

struct EvalSettings {
    bool exclude_unanswered = false;
    /// Statistics checked by the manifest validator; absent means no check.
    std::optional<ExpectedStats> expected;
};

/// Top-level sections: extraction, reward, grpo, pipeline, backend, eval.
/// Every section and key is optional; unknown keys are rejected.
struct Config {
    ExtractionOptions extraction;
    RewardOverrides reward;
    GrpoConfig grpo;
    PipelineOptions pipeline;
    HttpOptions backend;
    EvalSettings eval;
};

/// Throws ConfigError naming the offending key.
Config config_from_json(const nlohmann::json& j);
Config load_config(const std::filesystem::path& path);

/// Applies the extraction options and reward overrides to every spec of `task`.
void apply_reward_config(ToyTask& task, const Config& config);

}  // namespace grpokit
