#include "grpokit/toy_policy.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "grpokit/error.hpp"

namespace grpokit {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

TokenId sample_token(std::span<const double> probs, std::mt19937_64& rng) {
    const double u = uniform01(rng);
    double cumulative = 0.0;
    for (std::size_t v = 0; v < probs.size(); ++v) {
        cumulative += probs[v];
        if (u < cumulative) return static_cast<TokenId>(v);
    }
    // u landed in the rounding gap above the last cumulative sum
    for (std::size_t v = probs.size(); v-- > 0;) {
        if (probs[v] > 0.0) return static_cast<TokenId>(v);
    }
    return 0;
}

Group refreshed(const ToyPolicy& policy, const ToyPolicy& reference, const Group& group) {
    Group g = group;
    for (auto& r : g.rollouts) {
        if (r.states.size() != r.size()) throw InputError("toy-policy rollouts must record their context states");
        for (std::size_t k = 0; k < r.size(); ++k) {
            const auto a = static_cast<std::size_t>(r.tokens[k]);
            r.logp_new[k] = policy.log_probabilities(r.states[k])[a];
            r.logp_ref[k] = reference.log_probabilities(r.states[k])[a];
        }
    }
    return g;
}

}  // namespace

std::span<const double> ToyPolicy::logits_row(StateId s) const {
    if (s >= num_states) throw InputError("state " + std::to_string(s) + " out of range");
    return std::span<const double>(logits).subspan(s * vocab_size(), vocab_size());
}

std::vector<double> ToyPolicy::log_probabilities(StateId s) const {
    const auto row = logits_row(s);
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double z : row) sum += std::exp(z - peak);
    const double log_norm = peak + std::log(sum);
    std::vector<double> out(row.size());
    for (std::size_t v = 0; v < row.size(); ++v) out[v] = row[v] - log_norm;
    return out;
}

std::vector<double> ToyPolicy::probabilities(StateId s) const {
    auto lp = log_probabilities(s);
    for (double& x : lp) x = std::exp(x);
    return lp;
}

std::vector<double> ToyPolicy::distribution_table() const {
    std::vector<double> table;
    table.reserve(logits.size());
    for (StateId s = 0; s < num_states; ++s) {
        const auto p = probabilities(s);
        table.insert(table.end(), p.begin(), p.end());
    }
    return table;
}

std::string ToyPolicy::render(std::span<const TokenId> tokens) const {
    std::string out;
    for (TokenId t : tokens) {
        if (eos && t == *eos) break;
        out += vocabulary.at(static_cast<std::size_t>(t));
    }
    return out;
}

void ToyPolicy::validate() const {
    if (vocabulary.empty()) throw ConfigError("toy policy needs a non-empty vocabulary");
    if (num_states == 0 || max_length == 0) throw ConfigError("toy policy needs states and a positive max_length");
    if (logits.size() != num_states * vocabulary.size()) throw ConfigError("logits table has the wrong shape");
    if (eos && (*eos < 0 || static_cast<std::size_t>(*eos) >= vocabulary.size())) {
        throw ConfigError("eos token out of range");
    }
    if (!state_fn) throw ConfigError("toy policy needs a state function");
}

ToyPolicy make_uniform_policy(std::vector<std::string> vocabulary, std::size_t num_states, std::size_t max_length,
                              std::optional<TokenId> eos, StateFn state_fn) {
    ToyPolicy p;
    p.logits.assign(num_states * vocabulary.size(), 0.0);
    p.vocabulary = std::move(vocabulary);
    p.num_states = num_states;
    p.max_length = max_length;
    p.eos = eos;
    p.state_fn = std::move(state_fn);
    p.validate();
    return p;
}

StateDistributions make_distributions(const ToyPolicy& current, const ToyPolicy& reference) {
    if (current.vocab_size() != reference.vocab_size() || current.num_states != reference.num_states) {
        throw InputError("policy and reference differ in shape");
    }
    return StateDistributions{current.vocab_size(), current.distribution_table(), reference.distribution_table()};
}

Group sample_group(const ToyPolicy& policy, std::size_t prompt_id, int group_size, std::uint64_t seed,
                   const ToyPolicy* reference) {
    if (group_size < 2) throw InputError("group size must be >= 2");
    policy.validate();
    const ToyPolicy& ref = reference != nullptr ? *reference : policy;
    std::mt19937_64 rng(seed);

    Group group;
    group.prompt_id = prompt_id;
    group.rollouts.reserve(static_cast<std::size_t>(group_size));
    for (int i = 0; i < group_size; ++i) {
        Rollout r;
        r.prompt_id = prompt_id;
        while (r.tokens.size() < policy.max_length) {
            const StateId s = policy.state_fn(prompt_id, r.tokens);
            const auto lp = policy.log_probabilities(s);
            const auto probs = policy.probabilities(s);
            const TokenId t = sample_token(probs, rng);
            r.tokens.push_back(t);
            r.states.push_back(s);
            r.logp_new.push_back(lp[static_cast<std::size_t>(t)]);
            r.logp_ref.push_back(ref.log_probabilities(s)[static_cast<std::size_t>(t)]);
            if (policy.eos && t == *policy.eos) break;
        }
        r.logp_old = r.logp_new;
        r.text = policy.render(r.tokens);
        group.rollouts.push_back(std::move(r));
    }
    return group;
}

LossStats toy_policy_loss(const ToyPolicy& policy, const ToyPolicy& reference, const Group& group,
                          const GrpoConfig& config) {
    const Group g = refreshed(policy, reference, group);
    const StateDistributions dists = make_distributions(policy, reference);
    return grpo_loss(g, config, &dists);
}

std::vector<double> toy_policy_grad(const ToyPolicy& policy, const ToyPolicy& reference, const Group& group,
                                    const GrpoConfig& config) {
    if (!group.advantages || group.advantages->size() != group.rollouts.size()) {
        throw InputError("group advantages have not been computed");
    }
    const std::size_t vocab = policy.vocab_size();
    const std::size_t tokens = group.token_count();
    if (tokens == 0) throw InputError("group has no tokens");

    std::vector<std::vector<double>> logp(policy.num_states), logq(policy.num_states);
    auto ensure_rows = [&](StateId s) {
        if (logp[s].empty()) {
            logp[s] = policy.log_probabilities(s);
            logq[s] = reference.log_probabilities(s);
        }
    };

    const double n = static_cast<double>(tokens);
    const double kl_weight = config.kl_aggregation == KlAggregation::per_token
                                 ? config.beta / n
                                 : config.beta / static_cast<double>(group.rollouts.size());
    std::vector<double> grad(policy.logits.size(), 0.0);

    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
        const Rollout& r = group.rollouts[i];
        if (r.states.size() != r.size()) throw InputError("toy-policy rollouts must record their context states");
        const double adv = (*group.advantages)[i];
        for (std::size_t k = 0; k < r.size(); ++k) {
            const StateId s = r.states[k];
            const auto a = static_cast<std::size_t>(r.tokens[k]);
            ensure_rows(s);
            const auto& lp = logp[s];
            const auto& lq = logq[s];
            double* g = grad.data() + s * vocab;

            // d log pi(a|s) / d z_j = [j == a] - p_j, scaled by the token's coefficient
            double coef = 0.0;
            double base = lq[a];
            if (config.ratio_baseline == RatioBaseline::snapshot) {
                if (r.logp_old.size() != r.size()) throw InputError("snapshot ratio baseline needs logp_old");
                base = r.logp_old[k];
            }
            const double ratio = std::exp(lp[a] - base);
            if (ratio * adv <= clip_ratio(ratio, config.epsilon) * adv) coef -= adv * ratio / n;

            if (config.beta != 0.0 && config.kl_mode == KlMode::estimator) {
                coef += kl_weight * -std::expm1(lq[a] - lp[a]);
            }
            if (coef != 0.0) {
                for (std::size_t j = 0; j < vocab; ++j) g[j] -= coef * std::exp(lp[j]);
                g[a] += coef;
            }

            if (config.beta != 0.0 && config.kl_mode == KlMode::exact) {
                double kl = 0.0;
                for (std::size_t j = 0; j < vocab; ++j) {
                    const double p = std::exp(lp[j]);
                    if (p == 0.0) continue;
                    if (std::exp(lq[j]) == 0.0) throw DivergenceError("reference assigns zero probability");
                    kl += p * (lp[j] - lq[j]);
                }
                for (std::size_t j = 0; j < vocab; ++j) {
                    const double p = std::exp(lp[j]);
                    g[j] += kl_weight * p * (lp[j] - lq[j] - kl);
                }
            }
        }
    }
    return grad;
}

std::vector<double> total_variation(const ToyPolicy& a, const ToyPolicy& b) {
    if (a.vocab_size() != b.vocab_size() || a.num_states != b.num_states) {
        throw InputError("policies differ in shape");
    }
    std::vector<double> tv(a.num_states, 0.0);
    for (StateId s = 0; s < a.num_states; ++s) {
        const auto p = a.probabilities(s);
        const auto q = b.probabilities(s);
        double d = 0.0;
        for (std::size_t v = 0; v < p.size(); ++v) d += std::fabs(p[v] - q[v]);
        tv[s] = 0.5 * d;
    }
    return tv;
}

}  // namespace grpokit
