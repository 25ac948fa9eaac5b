#include "grpokit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "grpokit/error.hpp"

namespace grpokit {

ToyPolicy ToyTask::uniform_policy() const {
    return make_uniform_policy(vocabulary, num_states, max_length, eos, state_fn);
}

ToyTask make_format_task() {
    ToyTask task;
    task.name = "format";
    task.vocabulary = {"<think>", "</think>", "<answer>", "</answer>", "x", ""};
    task.eos = 5;
    task.max_length = 6;
    task.num_states = task.max_length;
    task.state_fn = [](std::size_t, std::span<const TokenId> prefix) -> StateId { return prefix.size(); };
    task.prompts = {"format"};

    RewardSpec spec;
    spec.task_kind = TaskKind::free_form;
    spec.ground_truth = GroundTruth{GroundTruthKind::text, "x", std::nullopt, std::nullopt};
    spec.format_profile = FormatProfile::think_answer;
    spec.weights = RewardWeights{0.0, 1.0};
    task.rewards = {spec};
    return task;
}

ToyTask make_boxed_arith_task() {
    ToyTask task;
    task.name = "boxed-arith";
    task.vocabulary = {"\\boxed{", "}"};
    for (int d = 0; d <= 9; ++d) task.vocabulary.push_back(std::to_string(d));
    task.vocabulary.push_back("");
    task.eos = static_cast<TokenId>(task.vocabulary.size() - 1);
    task.max_length = 4;

    for (int a = 0; a <= 4; ++a) {
        for (int b = 0; b <= 4; ++b) {
            task.prompts.push_back(std::to_string(a) + "+" + std::to_string(b));
            RewardSpec spec;
            spec.task_kind = TaskKind::math_boxed;
            spec.ground_truth = GroundTruth{GroundTruthKind::numeric, std::to_string(a + b), std::nullopt, std::nullopt};
            spec.format_profile = FormatProfile::think_only;
            spec.weights = RewardWeights{1.0, 0.0};
            task.rewards.push_back(spec);
        }
    }

    // state 0: empty prefix; 1..P: just opened a box for prompt p; then one
    // state per previous token
    const std::size_t prompts = task.prompts.size();
    const std::size_t vocab = task.vocabulary.size();
    task.num_states = 1 + prompts + vocab;
    task.state_fn = [prompts](std::size_t prompt, std::span<const TokenId> prefix) -> StateId {
        if (prefix.empty()) return 0;
        const auto last = static_cast<std::size_t>(prefix.back());
        if (last == 0) return 1 + prompt;
        return 1 + prompts + last;
    };
    return task;
}

ToyTask make_task(const std::string& name) {
    if (name == "format") return make_format_task();
    if (name == "boxed-arith") return make_boxed_arith_task();
    throw ConfigError("unknown toy task '" + name + "' (expected format or boxed-arith)");
}

TrainResult train(const ToyPolicy& initial, const ToyTask& task, const GrpoConfig& config, int steps,
                  std::uint64_t seed, const StepCallback& on_step) {
    config.validate();
    initial.validate();
    if (task.prompts.empty() || task.prompts.size() != task.rewards.size()) {
        throw ConfigError("task needs one reward spec per prompt");
    }
    for (const auto& spec : task.rewards) spec.validate();
    if (!std::all_of(initial.logits.begin(), initial.logits.end(), [](double l) { return std::isfinite(l); })) {
        throw TrainingError("initial policy has non-finite logits");
    }

    TrainResult result{initial, {}};
    ToyPolicy& policy = result.policy;
    ToyPolicy reference = initial;
    std::mt19937_64 rng(seed);
    result.metrics.reserve(static_cast<std::size_t>(std::max(steps, 0)));

    for (int step = 0; step < steps; ++step) {
        if (config.ref_sync_interval > 0 && step % config.ref_sync_interval == 0) reference = policy;

        StepMetrics m;
        m.step = step;
        std::vector<double> grad(policy.logits.size(), 0.0);
        std::size_t scored = 0;
        for (int g = 0; g < config.groups_per_step; ++g) {
            const std::size_t prompt = task.prompts.size() == 1 ? 0 : rng() % task.prompts.size();
            Group group = sample_group(policy, prompt, config.group_size, rng(), &reference);
            for (auto& r : group.rollouts) {
                const auto outcome = composite_reward(r.text, task.rewards[prompt]);
                r.reward = outcome.total;
                m.mean_reward += outcome.total;
                m.mean_accuracy += outcome.accuracy;
                m.mean_format += outcome.format;
                ++scored;
            }
            compute_advantages(group, config.advantage_std_floor);

            LossStats stats;
            try {
                stats = toy_policy_loss(policy, reference, group, config);
            } catch (const DivergenceError& e) {
                throw TrainingError("step " + std::to_string(step) + ": " + e.what());
            }
            if (!std::isfinite(stats.loss)) {
                std::ostringstream msg;
                msg << "non-finite loss at step " << step << ", group " << g << " (surrogate " << stats.surrogate
                    << ", kl " << stats.kl << ")";
                throw TrainingError(msg.str());
            }
            m.loss += stats.loss;
            m.surrogate += stats.surrogate;
            m.kl += stats.kl;
            m.clip_fraction += stats.clip_fraction;

            const auto g_grad = toy_policy_grad(policy, reference, group, config);
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += g_grad[j];
        }

        const double groups = static_cast<double>(config.groups_per_step);
        m.loss /= groups;
        m.surrogate /= groups;
        m.kl /= groups;
        m.clip_fraction /= groups;
        m.mean_reward /= static_cast<double>(scored);
        m.mean_accuracy /= static_cast<double>(scored);
        m.mean_format /= static_cast<double>(scored);

        for (std::size_t j = 0; j < grad.size(); ++j) {
            const double step_j = config.learning_rate * grad[j] / groups;
            if (!std::isfinite(step_j)) {
                throw TrainingError("non-finite gradient at step " + std::to_string(step));
            }
            policy.logits[j] -= step_j;
        }

        result.metrics.push_back(m);
        if (on_step) on_step(m);
    }
    return result;
}

int steps_to_threshold(const std::vector<StepMetrics>& metrics, double StepMetrics::*field, double threshold,
                       int window) {
    if (window < 1) window = 1;
    double sum = 0.0;
    for (std::size_t i = 0; i < metrics.size(); ++i) {
        sum += metrics[i].*field;
        if (i >= static_cast<std::size_t>(window)) sum -= metrics[i - static_cast<std::size_t>(window)].*field;
        if (i + 1 >= static_cast<std::size_t>(window) && sum / window >= threshold) return static_cast<int>(i) + 1;
    }
    return -1;
}

}  // namespace grpokit
