#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace grpokit {

using TokenId = std::int32_t;
using StateId = std::size_t;

enum class KlMode { exact, estimator };
enum class KlAggregation { per_token, per_sequence };
/// Which log-probabilities the importance ratio divides by.
enum class RatioBaseline { reference, snapshot };

std::string_view to_string(KlMode mode);
std::string_view to_string(KlAggregation aggregation);
std::string_view to_string(RatioBaseline baseline);
KlMode kl_mode_from_string(std::string_view name);
KlAggregation kl_aggregation_from_string(std::string_view name);
RatioBaseline ratio_baseline_from_string(std::string_view name);

struct GrpoConfig {
    double epsilon = 0.2;
    double beta = 0.04;
    int group_size = 8;
    double learning_rate = 20.0;
    double advantage_std_floor = 1e-8;
    KlMode kl_mode = KlMode::exact;
    KlAggregation kl_aggregation = KlAggregation::per_token;
    RatioBaseline ratio_baseline = RatioBaseline::reference;
    /// Steps between copies of the policy into the reference; 0 freezes the
    /// reference at the initial policy.
    int ref_sync_interval = 10;
    int groups_per_step = 4;
    std::uint64_t seed = 0;

    /// Throws ConfigError when an invariant fails.
    void validate() const;
};

struct Rollout {
    std::size_t prompt_id = 0;
    std::vector<TokenId> tokens;
    /// Context state in which each token was emitted; indexes StateDistributions rows.
    std::vector<StateId> states;
    std::vector<double> logp_new;
    std::vector<double> logp_ref;
    /// Sampling-time log-probabilities; used by RatioBaseline::snapshot.
    std::vector<double> logp_old;
    double reward = 0.0;
    std::string text;

    std::size_t size() const { return tokens.size(); }
    /// Throws InputError when per-token arrays disagree in length or a log-probability is positive.
    void validate() const;
};

struct Group {
    std::size_t prompt_id = 0;
    std::vector<Rollout> rollouts;
    std::optional<std::vector<double>> advantages;

    std::size_t token_count() const;
};

/// Full next-token distributions of the current and reference policies, one
/// row of `vocab_size` probabilities per context state.
struct StateDistributions {
    std::size_t vocab_size = 0;
    std::vector<double> current;
    std::vector<double> reference;

    std::span<const double> current_row(StateId s) const;
    std::span<const double> reference_row(StateId s) const;
    std::size_t num_states() const { return vocab_size == 0 ? 0 : current.size() / vocab_size; }
};

struct LossStats {
    double loss = 0.0;
    double surrogate = 0.0;
    double kl = 0.0;
    double clip_fraction = 0.0;
    std::size_t tokens = 0;
};

/// (r - mean) / max(population std, std_floor); constant inputs give zeros.
/// Throws InputError for fewer than two rewards.
std::vector<double> normalize_rewards(std::span<const double> rewards, double std_floor);

/// Fills group.advantages from the rollouts' rewards.
void compute_advantages(Group& group, double std_floor);

double clip_ratio(double ratio, double epsilon);

/// -mean over all tokens of min(ratio * adv, clip(ratio) * adv), each
/// rollout's advantage broadcast to its tokens.
double clipped_surrogate(const Group& group, double epsilon, RatioBaseline baseline = RatioBaseline::reference);

/// sum_v p_v log(p_v / q_v). Throws DivergenceError when q_v = 0 < p_v.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// k3 estimator q/p - 1 - log(q/p) from log-probabilities at a sampled token.
double kl_estimator(double logp_new, double logp_ref);

/// Per-token average KL of one rollout. Exact mode requires `dists`.
double kl_penalty(const Rollout& rollout, const StateDistributions* dists, KlMode mode);

/// clipped_surrogate + beta * aggregated KL. Exact mode requires `dists`.
LossStats grpo_loss(const Group& group, const GrpoConfig& config, const StateDistributions* dists = nullptr);

}  // namespace grpokit
