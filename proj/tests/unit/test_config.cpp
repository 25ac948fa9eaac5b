#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "grpokit/config.hpp"
#include "grpokit/error.hpp"

using namespace grpokit;
using nlohmann::json;

namespace {

std::string error_of(const json& j) {
    try {
        config_from_json(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, EmptyObjectGivesDefaults) {
    const Config c = config_from_json(json::object());
    EXPECT_EQ(c.grpo.epsilon, GrpoConfig{}.epsilon);
    EXPECT_EQ(c.pipeline.max_in_flight, PipelineOptions{}.max_in_flight);
    EXPECT_EQ(c.backend.token_env, "GRPOKIT_API_KEY");
    EXPECT_FALSE(c.reward.weights);
    EXPECT_FALSE(c.eval.expected);
}

TEST(Config, ReadsEverySection) {
    const json j = {
        {"extraction", {{"cue_phrases", {"final:"}}, {"case_fold", false}, {"default_rel_tolerance", 0.05}}},
        {"reward", {{"w_accuracy", 2.0}, {"w_format", 0.5}, {"format_profile", "think_only"}}},
        {"grpo", {{"epsilon", 0.1}, {"beta", 0.0}, {"group_size", 8}, {"kl_mode", "estimator"}, {"seed", 7}}},
        {"pipeline", {{"max_in_flight", 16}, {"max_regens", 2}, {"backoff_initial_ms", 0}}},
        {"backend", {{"endpoint", "http://localhost:1/v1"}, {"timeout_s", 5}}},
        {"eval", {{"exclude_unanswered", true}, {"expected_stats", "published"}}}};
    const Config c = config_from_json(j);
    EXPECT_EQ(c.extraction.cue_phrases, std::vector<std::string>{"final:"});
    EXPECT_FALSE(c.extraction.case_fold);
    EXPECT_EQ(c.reward.weights->accuracy, 2.0);
    EXPECT_EQ(c.reward.format_profile, FormatProfile::think_only);
    EXPECT_EQ(c.grpo.group_size, 8u);
    EXPECT_EQ(c.grpo.kl_mode, KlMode::estimator);
    EXPECT_EQ(c.grpo.seed, 7u);
    EXPECT_EQ(c.pipeline.max_in_flight, 16u);
    EXPECT_EQ(c.pipeline.backoff_initial.count(), 0);
    EXPECT_EQ(c.backend.timeout.count(), 5);
    EXPECT_TRUE(c.eval.exclude_unanswered);
    EXPECT_EQ(c.eval.expected->total, 942u);
}

TEST(Config, UnknownKeysNamed) {
    EXPECT_NE(error_of({{"grpo", {{"epsilom", 0.2}}}}).find("grpo.epsilom"), std::string::npos);
    EXPECT_NE(error_of({{"trainer", json::object()}}).find("trainer"), std::string::npos);
    EXPECT_NE(error_of({{"eval", {{"expected_stats", {{"totals", 1}}}}}}).find("totals"), std::string::npos);
}

TEST(Config, WrongTypesAndRanges) {
    EXPECT_NE(error_of({{"grpo", {{"epsilon", "0.2"}}}}), "");
    EXPECT_NE(error_of({{"grpo", {{"group_size", -2}}}}), "");
    EXPECT_NE(error_of({{"grpo", {{"epsilon", 0.0}}}}), "");
    EXPECT_NE(error_of({{"grpo", {{"kl_mode", "jensen"}}}}), "");
    EXPECT_NE(error_of({{"pipeline", {{"max_in_flight", 0}}}}), "");
    EXPECT_NE(error_of({{"reward", {{"w_format", -1.0}}}}), "");
    EXPECT_NE(error_of({{"extraction", {{"cue_phrases", {1, 2}}}}}), "");
    EXPECT_NE(error_of(json::array()), "");
}

TEST(Config, ApplyRewardOverrides) {
    auto task = make_boxed_arith_task();
    Config c;
    c.reward.weights = RewardWeights{1.0, 0.0};
    c.extraction.case_fold = false;
    apply_reward_config(task, c);
    for (const auto& spec : task.rewards) {
        EXPECT_EQ(spec.weights.format, 0.0);
        EXPECT_FALSE(spec.extraction.case_fold);
    }
}

TEST(Config, LoadFromFile) {
    const auto path = std::filesystem::temp_directory_path() / ("grpokit_cfg_" + std::to_string(::getpid()) + ".json");
    {
        std::ofstream(path) << R"({"grpo": {"beta": 0.1}})";
    }
    EXPECT_EQ(load_config(path).grpo.beta, 0.1);
    {
        std::ofstream(path) << "{not json";
    }
    EXPECT_THROW(load_config(path), ConfigError);
    std::filesystem::remove(path);
    EXPECT_THROW(load_config(path), ConfigError);
}
