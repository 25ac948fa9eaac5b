#include "grpokit/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <string>

#include "grpokit/error.hpp"

namespace grpokit {

namespace {

using nlohmann::json;

// Typed access to one config section with unknown-key detection.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        for (const auto& [key, value] : j_.items()) {
            bool known = false;
            for (const char* k : keys) known = known || key == k;
            if (!known) throw ConfigError("unknown config key '" + name_ + "." + key + "'");
        }
    }

    bool has(const char* key) const { return j_.contains(key); }
    const json& raw(const char* key) const { return j_.at(key); }

    template <typename T>
    void read(const char* key, T& out) const {
        if (!j_.contains(key)) return;
        const json& v = j_.at(key);
        bool ok = false;
        if constexpr (std::is_same_v<T, bool>) {
            ok = v.is_boolean();
        } else if constexpr (std::is_integral_v<T>) {
            ok = v.is_number_integer() && (std::is_signed_v<T> || v.get<long long>() >= 0);
        } else if constexpr (std::is_floating_point_v<T>) {
            ok = v.is_number();
        } else if constexpr (std::is_same_v<T, std::string>) {
            ok = v.is_string();
        } else {
            ok = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); });
        }
        if (!ok) throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
        out = v.get<T>();
    }

    std::string read_string(const char* key) const {
        std::string s;
        read(key, s);
        return s;
    }

private:
    const json& j_;
    std::string name_;
};

template <typename Fn>
auto enum_value(const Section& s, const char* key, Fn parse) {
    try {
        return parse(s.read_string(key));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

}  // namespace

Config config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    Section top(j, "");
    top.allow({"extraction", "reward", "grpo", "pipeline", "backend", "eval"});
    Config c;

    if (top.has("extraction")) {
        Section s(top.raw("extraction"), "extraction");
        s.allow({"cue_phrases", "strip_terminal_punctuation", "case_fold", "default_rel_tolerance",
                 "abs_tolerance_floor"});
        s.read("cue_phrases", c.extraction.cue_phrases);
        s.read("strip_terminal_punctuation", c.extraction.strip_terminal_punctuation);
        s.read("case_fold", c.extraction.case_fold);
        s.read("default_rel_tolerance", c.extraction.default_rel_tolerance);
        s.read("abs_tolerance_floor", c.extraction.abs_tolerance_floor);
        if (c.extraction.default_rel_tolerance < 0 || c.extraction.abs_tolerance_floor < 0) {
            throw ConfigError("extraction tolerances must be >= 0");
        }
    }

    if (top.has("reward")) {
        Section s(top.raw("reward"), "reward");
        s.allow({"w_accuracy", "w_format", "format_profile", "strict_format_gating"});
        if (s.has("w_accuracy") || s.has("w_format")) {
            RewardWeights w;
            s.read("w_accuracy", w.accuracy);
            s.read("w_format", w.format);
            if (w.accuracy < 0 || w.format < 0) throw ConfigError("reward weights must be >= 0");
            c.reward.weights = w;
        }
        if (s.has("format_profile")) {
            c.reward.format_profile = enum_value(s, "format_profile", format_profile_from_string);
        }
        if (s.has("strict_format_gating")) {
            bool strict = false;
            s.read("strict_format_gating", strict);
            c.reward.strict_format_gating = strict;
        }
    }

    if (top.has("grpo")) {
        Section s(top.raw("grpo"), "grpo");
        s.allow({"epsilon", "beta", "group_size", "learning_rate", "advantage_std_floor", "kl_mode",
                 "kl_aggregation", "ratio_baseline", "ref_sync_interval", "groups_per_step", "seed"});
        auto& g = c.grpo;
        s.read("epsilon", g.epsilon);
        s.read("beta", g.beta);
        s.read("group_size", g.group_size);
        s.read("learning_rate", g.learning_rate);
        s.read("advantage_std_floor", g.advantage_std_floor);
        if (s.has("kl_mode")) g.kl_mode = enum_value(s, "kl_mode", kl_mode_from_string);
        if (s.has("kl_aggregation")) g.kl_aggregation = enum_value(s, "kl_aggregation", kl_aggregation_from_string);
        if (s.has("ratio_baseline")) g.ratio_baseline = enum_value(s, "ratio_baseline", ratio_baseline_from_string);
        s.read("ref_sync_interval", g.ref_sync_interval);
        s.read("groups_per_step", g.groups_per_step);
        s.read("seed", g.seed);
        g.validate();
    }

    if (top.has("pipeline")) {
        Section s(top.raw("pipeline"), "pipeline");
        s.allow({"max_in_flight", "max_attempts", "backoff_initial_ms", "max_regens", "valid_markers",
                 "invalid_markers"});
        auto& p = c.pipeline;
        s.read("max_in_flight", p.max_in_flight);
        s.read("max_attempts", p.max_attempts);
        long long backoff = p.backoff_initial.count();
        s.read("backoff_initial_ms", backoff);
        if (backoff < 0) throw ConfigError("pipeline.backoff_initial_ms must be >= 0");
        p.backoff_initial = std::chrono::milliseconds(backoff);
        s.read("max_regens", p.max_regens);
        s.read("valid_markers", p.grammar.valid_markers);
        s.read("invalid_markers", p.grammar.invalid_markers);
        if (p.max_in_flight == 0) throw ConfigError("pipeline.max_in_flight must be >= 1");
        if (p.max_attempts < 1) throw ConfigError("pipeline.max_attempts must be >= 1");
        if (p.max_regens < 0) throw ConfigError("pipeline.max_regens must be >= 0");
    }

    if (top.has("backend")) {
        Section s(top.raw("backend"), "backend");
        s.allow({"endpoint", "model", "token_env", "timeout_s"});
        s.read("endpoint", c.backend.endpoint);
        s.read("model", c.backend.model);
        s.read("token_env", c.backend.token_env);
        long long timeout = c.backend.timeout.count();
        s.read("timeout_s", timeout);
        if (timeout <= 0) throw ConfigError("backend.timeout_s must be > 0");
        c.backend.timeout = std::chrono::seconds(timeout);
    }

    if (top.has("eval")) {
        Section s(top.raw("eval"), "eval");
        s.allow({"exclude_unanswered", "expected_stats"});
        s.read("exclude_unanswered", c.eval.exclude_unanswered);
        if (s.has("expected_stats")) {
            const json& e = s.raw("expected_stats");
            if (e.is_string() && e.get<std::string>() == "published") {
                c.eval.expected = ExpectedStats::published();
            } else {
                c.eval.expected = ExpectedStats::from_json(e);
            }
        }
    }
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

void apply_reward_config(ToyTask& task, const Config& config) {
    for (auto& spec : task.rewards) {
        spec.extraction = config.extraction;
        if (config.reward.weights) spec.weights = *config.reward.weights;
        if (config.reward.format_profile) spec.format_profile = *config.reward.format_profile;
        if (config.reward.strict_format_gating) spec.strict_format_gating = *config.reward.strict_format_gating;
    }
}

}  // namespace grpokit
