#include <gtest/gtest.h>

#include "grpokit/error.hpp"
#include "grpokit/trainer.hpp"

using namespace grpokit;

TEST(Tasks, FormatTaskRewardsTheTagSequence) {
    const auto task = make_format_task();
    ASSERT_EQ(task.prompts.size(), 1u);
    const std::string good = "<think>x</think><answer>x</answer>";
    EXPECT_EQ(composite_reward(good, task.rewards[0]).total, 1.0);
    EXPECT_EQ(composite_reward("<answer>x</answer>", task.rewards[0]).total, 0.0);
}

TEST(Tasks, BoxedArithTaskChecksTheSum) {
    const auto task = make_boxed_arith_task();
    ASSERT_EQ(task.prompts.size(), 25u);
    for (std::size_t i = 0; i < task.prompts.size(); ++i) {
        const std::string& p = task.prompts[i];
        const int sum = (p[0] - '0') + (p[2] - '0');
        EXPECT_EQ(composite_reward("\\boxed{" + std::to_string(sum) + "}", task.rewards[i]).total, 1.0) << p;
        EXPECT_EQ(composite_reward("\\boxed{" + std::to_string(sum + 1) + "}", task.rewards[i]).total, 0.0) << p;
    }
}

TEST(Tasks, UnknownNameRejected) { EXPECT_THROW(make_task("chess"), ConfigError); }

TEST(Train, ZeroLearningRateLeavesPolicyUnchanged) {
    const auto task = make_format_task();
    GrpoConfig cfg;
    cfg.learning_rate = 0.0;
    const auto initial = task.uniform_policy();
    const auto result = train(initial, task, cfg, 25, 1);
    EXPECT_EQ(result.policy.logits, initial.logits);
    EXPECT_EQ(result.metrics.size(), 25u);
}

TEST(Train, MetricSeriesIsBitReproducible) {
    const auto task = make_boxed_arith_task();
    GrpoConfig cfg;
    const auto a = train(task.uniform_policy(), task, cfg, 30, 42);
    const auto b = train(task.uniform_policy(), task, cfg, 30, 42);
    ASSERT_EQ(a.metrics.size(), b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        EXPECT_EQ(a.metrics[i].mean_reward, b.metrics[i].mean_reward);
        EXPECT_EQ(a.metrics[i].loss, b.metrics[i].loss);
        EXPECT_EQ(a.metrics[i].kl, b.metrics[i].kl);
        EXPECT_EQ(a.metrics[i].clip_fraction, b.metrics[i].clip_fraction);
    }
    EXPECT_EQ(a.policy.logits, b.policy.logits);
    const auto c = train(task.uniform_policy(), task, cfg, 30, 43);
    EXPECT_NE(a.policy.logits, c.policy.logits);
}

TEST(Train, CallbackSeesEveryStep) {
    const auto task = make_format_task();
    int seen = 0;
    train(task.uniform_policy(), task, GrpoConfig{}, 12, 0, [&](const StepMetrics& m) { EXPECT_EQ(m.step, seen++); });
    EXPECT_EQ(seen, 12);
}

TEST(Train, NonFiniteLossAborts) {
    const auto task = make_format_task();
    auto initial = task.uniform_policy();
    initial.logits[0] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(train(initial, task, GrpoConfig{}, 3, 0), TrainingError);
}

TEST(StepsToThreshold, TrailingWindowMean) {
    std::vector<StepMetrics> m(6);
    const double rewards[] = {0.0, 1.0, 0.0, 1.0, 1.0, 1.0};
    for (int i = 0; i < 6; ++i) m[i].mean_reward = rewards[i];
    EXPECT_EQ(steps_to_threshold(m, &StepMetrics::mean_reward, 1.0, 1), 2);
    EXPECT_EQ(steps_to_threshold(m, &StepMetrics::mean_reward, 1.0, 3), 6);
    EXPECT_EQ(steps_to_threshold(m, &StepMetrics::mean_reward, 1.0, 4), -1);
}
