#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "grpokit/grpo.hpp"
#include "grpokit/reward.hpp"
#include "grpokit/toy_policy.hpp"

namespace grpokit {

/// A desk-scale RL task: the toy policy's shape plus one reward spec per prompt.
struct ToyTask {
    std::string name;
    std::vector<std::string> vocabulary;
    std::size_t num_states = 0;
    std::size_t max_length = 0;
    std::optional<TokenId> eos;
    StateFn state_fn;
    std::vector<std::string> prompts;
    std::vector<RewardSpec> rewards;  // parallel to prompts

    ToyPolicy uniform_policy() const;
};

/// Reward = format_reward under the think_answer profile. One prompt; the
/// context state is the position in the response.
ToyTask make_format_task();

/// Prompts "a+b" for a, b in 0..4; reward = math_boxed accuracy against a+b.
/// The state after "\boxed{" is prompt-specific, every other state is keyed
/// by the previous token and shared across prompts.
ToyTask make_boxed_arith_task();

ToyTask make_task(const std::string& name);

struct StepMetrics {
    int step = 0;
    double mean_reward = 0.0;
    double mean_accuracy = 0.0;
    double mean_format = 0.0;
    double loss = 0.0;
    double surrogate = 0.0;
    double kl = 0.0;
    double clip_fraction = 0.0;
};

struct TrainResult {
    ToyPolicy policy;
    std::vector<StepMetrics> metrics;
};

using StepCallback = std::function<void(const StepMetrics&)>;

/// Plain gradient descent on the toy policy's logits with the GRPO loss.
/// Per step: sample config.groups_per_step groups of config.group_size
/// rollouts, score them, normalize rewards, average the per-group gradients
/// and update. Throws TrainingError on a non-finite loss or gradient.
TrainResult train(const ToyPolicy& initial, const ToyTask& task, const GrpoConfig& config, int steps,
                  std::uint64_t seed, const StepCallback& on_step = {});

/// First step (1-based count) whose trailing `window`-step mean of `field`
/// reaches `threshold`, or -1.
int steps_to_threshold(const std::vector<StepMetrics>& metrics, double StepMetrics::*field, double threshold,
                       int window);

}  // namespace grpokit
