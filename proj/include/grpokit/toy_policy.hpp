#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grpokit/grpo.hpp"

namespace grpokit {

/// Maps (prompt, tokens emitted so far) to the context state whose logits row
/// drives the next token.
using StateFn = std::function<StateId(std::size_t prompt_id, std::span<const TokenId> prefix)>;

/// Tabular softmax policy: one logits row per context state. Small enough
/// that every distribution, KL term and gradient is computed exactly.
struct ToyPolicy {
    std::vector<std::string> vocabulary;
    std::size_t num_states = 0;
    std::size_t max_length = 0;
    std::optional<TokenId> eos;
    std::vector<double> logits;  // num_states x vocabulary.size(), row-major
    StateFn state_fn;

    std::size_t vocab_size() const { return vocabulary.size(); }
    std::span<const double> logits_row(StateId s) const;
    std::vector<double> probabilities(StateId s) const;
    std::vector<double> log_probabilities(StateId s) const;
    /// Every state's distribution, row-major.
    std::vector<double> distribution_table() const;
    std::string render(std::span<const TokenId> tokens) const;

    /// Throws ConfigError on shape mismatches or a missing state function.
    void validate() const;
};

/// All-zero logits: the uniform policy.
ToyPolicy make_uniform_policy(std::vector<std::string> vocabulary, std::size_t num_states, std::size_t max_length,
                              std::optional<TokenId> eos, StateFn state_fn);

StateDistributions make_distributions(const ToyPolicy& current, const ToyPolicy& reference);

/// G seeded rollouts. logp_new and logp_old come from `policy`, logp_ref from
/// `reference` (or `policy` when null). Rewards are left at zero.
Group sample_group(const ToyPolicy& policy, std::size_t prompt_id, int group_size, std::uint64_t seed,
                   const ToyPolicy* reference = nullptr);

/// grpo_loss evaluated at the policy's current logits: the rollouts' token
/// log-probabilities are recomputed from `policy` and `reference`.
LossStats toy_policy_loss(const ToyPolicy& policy, const ToyPolicy& reference, const Group& group,
                          const GrpoConfig& config);

/// Exact gradient of toy_policy_loss with respect to `policy.logits`.
/// At a clip boundary the unclipped branch's subgradient is used.
std::vector<double> toy_policy_grad(const ToyPolicy& policy, const ToyPolicy& reference, const Group& group,
                                    const GrpoConfig& config);

/// Total-variation distance between the two policies on each state.
std::vector<double> total_variation(const ToyPolicy& a, const ToyPolicy& b);

}  // namespace grpokit
