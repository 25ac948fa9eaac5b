#include "grpokit/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grpokit/error.hpp"

namespace grpokit {

std::string_view to_string(KlMode mode) { return mode == KlMode::exact ? "exact" : "estimator"; }

std::string_view to_string(KlAggregation aggregation) {
    return aggregation == KlAggregation::per_token ? "per_token" : "per_sequence";
}

std::string_view to_string(RatioBaseline baseline) {
    return baseline == RatioBaseline::reference ? "reference" : "snapshot";
}

KlMode kl_mode_from_string(std::string_view name) {
    if (name == "exact") return KlMode::exact;
    if (name == "estimator") return KlMode::estimator;
    throw ConfigError("unknown kl_mode '" + std::string(name) + "'");
}

KlAggregation kl_aggregation_from_string(std::string_view name) {
    if (name == "per_token") return KlAggregation::per_token;
    if (name == "per_sequence") return KlAggregation::per_sequence;
    throw ConfigError("unknown kl_aggregation '" + std::string(name) + "'");
}

RatioBaseline ratio_baseline_from_string(std::string_view name) {
    if (name == "reference") return RatioBaseline::reference;
    if (name == "snapshot") return RatioBaseline::snapshot;
    throw ConfigError("unknown ratio_baseline '" + std::string(name) + "'");
}

void GrpoConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
    if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
    if (group_size < 2) throw ConfigError("group_size must be >= 2");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
    if (!(advantage_std_floor >= 0.0)) throw ConfigError("advantage_std_floor must be >= 0");
    if (ref_sync_interval < 0) throw ConfigError("ref_sync_interval must be >= 0");
    if (groups_per_step < 1) throw ConfigError("groups_per_step must be >= 1");
}

void Rollout::validate() const {
    const std::size_t n = tokens.size();
    if (logp_new.size() != n || logp_ref.size() != n) {
        throw InputError("rollout log-probability arrays must match the token count");
    }
    if (!states.empty() && states.size() != n) throw InputError("rollout state array must match the token count");
    if (!logp_old.empty() && logp_old.size() != n) throw InputError("rollout logp_old must match the token count");
    auto positive = [](double lp) { return !(lp <= 0.0); };
    if (std::any_of(logp_new.begin(), logp_new.end(), positive) ||
        std::any_of(logp_ref.begin(), logp_ref.end(), positive)) {
        throw InputError("log-probabilities must be <= 0");
    }
}

std::size_t Group::token_count() const {
    std::size_t n = 0;
    for (const auto& r : rollouts) n += r.size();
    return n;
}

std::span<const double> StateDistributions::current_row(StateId s) const {
    if ((s + 1) * vocab_size > current.size()) throw InputError("state index out of range");
    return std::span<const double>(current).subspan(s * vocab_size, vocab_size);
}

std::span<const double> StateDistributions::reference_row(StateId s) const {
    if ((s + 1) * vocab_size > reference.size()) throw InputError("state index out of range");
    return std::span<const double>(reference).subspan(s * vocab_size, vocab_size);
}

std::vector<double> normalize_rewards(std::span<const double> rewards, double std_floor) {
    if (rewards.size() < 2) throw InputError("advantage normalization needs at least two rewards");
    const double n = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double stddev = std::sqrt(var / n);

    std::vector<double> out(rewards.size(), 0.0);
    const bool constant = std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; });
    if (constant) return out;
    const double scale = std::max(stddev, std_floor);
    if (scale == 0.0) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / scale;
    return out;
}

void compute_advantages(Group& group, double std_floor) {
    std::vector<double> rewards;
    rewards.reserve(group.rollouts.size());
    for (const auto& r : group.rollouts) rewards.push_back(r.reward);
    group.advantages = normalize_rewards(rewards, std_floor);
}

double clip_ratio(double ratio, double epsilon) { return std::min(std::max(ratio, 1.0 - epsilon), 1.0 + epsilon); }

namespace {

const std::vector<double>& baseline_logp(const Rollout& r, RatioBaseline baseline) {
    if (baseline == RatioBaseline::reference) return r.logp_ref;
    if (r.logp_old.size() != r.size()) throw InputError("snapshot ratio baseline needs logp_old on every rollout");
    return r.logp_old;
}

struct SurrogateTotals {
    double sum = 0.0;
    std::size_t clipped = 0;
    std::size_t tokens = 0;
};

SurrogateTotals surrogate_totals(const Group& group, double epsilon, RatioBaseline baseline) {
    if (!group.advantages || group.advantages->size() != group.rollouts.size()) {
        throw InputError("group advantages have not been computed");
    }
    SurrogateTotals t;
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
        const Rollout& r = group.rollouts[i];
        r.validate();
        const auto& base = baseline_logp(r, baseline);
        const double adv = (*group.advantages)[i];
        for (std::size_t k = 0; k < r.size(); ++k) {
            const double ratio = std::exp(r.logp_new[k] - base[k]);
            const double clipped = clip_ratio(ratio, epsilon);
            t.sum += std::min(ratio * adv, clipped * adv);
            if (std::fabs(ratio - 1.0) > epsilon) ++t.clipped;
        }
        t.tokens += r.size();
    }
    if (t.tokens == 0) throw InputError("group has no tokens");
    return t;
}

}  // namespace

double clipped_surrogate(const Group& group, double epsilon, RatioBaseline baseline) {
    const auto t = surrogate_totals(group, epsilon, baseline);
    return -t.sum / static_cast<double>(t.tokens);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw InputError("distributions differ in support size");
    double kl = 0.0;
    for (std::size_t v = 0; v < p.size(); ++v) {
        if (p[v] <= 0.0) continue;
        if (q[v] <= 0.0) {
            throw DivergenceError("reference assigns zero probability to token " + std::to_string(v) +
                                  " that the policy can emit");
        }
        kl += p[v] * std::log(p[v] / q[v]);
    }
    // rounding can leave tiny negative values for identical rows
    return std::max(kl, 0.0);
}

double kl_estimator(double logp_new, double logp_ref) {
    const double log_ratio = logp_ref - logp_new;
    return std::expm1(log_ratio) - log_ratio;
}

double kl_penalty(const Rollout& rollout, const StateDistributions* dists, KlMode mode) {
    rollout.validate();
    if (rollout.size() == 0) return 0.0;
    double total = 0.0;
    if (mode == KlMode::exact) {
        if (dists == nullptr) throw InputError("exact KL needs full per-state distributions");
        if (rollout.states.size() != rollout.size()) throw InputError("exact KL needs the rollout's context states");
        for (StateId s : rollout.states) total += kl_divergence(dists->current_row(s), dists->reference_row(s));
    } else {
        for (std::size_t k = 0; k < rollout.size(); ++k) total += kl_estimator(rollout.logp_new[k], rollout.logp_ref[k]);
    }
    return total / static_cast<double>(rollout.size());
}

LossStats grpo_loss(const Group& group, const GrpoConfig& config, const StateDistributions* dists) {
    const auto t = surrogate_totals(group, config.epsilon, config.ratio_baseline);
    LossStats stats;
    stats.tokens = t.tokens;
    stats.surrogate = -t.sum / static_cast<double>(t.tokens);
    stats.clip_fraction = static_cast<double>(t.clipped) / static_cast<double>(t.tokens);

    const bool kl_available = config.kl_mode == KlMode::estimator || dists != nullptr;
    if (kl_available) {
        double weighted = 0.0;
        for (const auto& r : group.rollouts) {
            weighted += kl_penalty(r, dists, config.kl_mode) * static_cast<double>(r.size());
        }
        stats.kl = config.kl_aggregation == KlAggregation::per_token
                       ? weighted / static_cast<double>(t.tokens)
                       : weighted / static_cast<double>(group.rollouts.size());
    } else if (config.beta != 0.0) {
        throw InputError("exact KL needs full per-state distributions");
    }
    stats.loss = config.beta == 0.0 ? stats.surrogate : stats.surrogate + config.beta * stats.kl;
    return stats;
}

}  // namespace grpokit
