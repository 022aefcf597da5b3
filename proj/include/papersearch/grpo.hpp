#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "papersearch/rng.hpp"
#include "papersearch/types.hpp"

namespace ps {

struct GrpoConfig {
    int group_size = 8;      // G
    double clip_eps = 0.2;   // epsilon
    double kl_coeff = 1e-3;  // beta
    double adv_eps = 1e-6;   // std guard
};

// A_i = (r_i - mean) / max(std, adv_eps) with the population standard
// deviation; groups whose std falls below adv_eps get all-zero
// advantages. Throws std::invalid_argument for fewer than 2 rewards.
std::vector<double> compute_advantages(std::span<const double> rewards,
                                       double adv_eps = 1e-6);

// A policy over a finite token vocabulary that can report per-token
// log-probabilities and the gradient of a sampled token's log-probability
// with respect to its own parameters. Contexts are the preceding tokens
// of the sequence, newest last.
class TokenPolicy {
public:
    virtual ~TokenPolicy() = default;

    virtual std::size_t vocab_size() const = 0;
    virtual std::size_t param_count() const = 0;
    virtual std::vector<double> parameters() const = 0;
    virtual void set_parameters(std::span<const double> params) = 0;

    // log pi(. | context); the returned vector has vocab_size entries
    // whose exponentials sum to 1.
    virtual std::vector<double> log_probs(std::span<const int> context) const = 0;

    // grad += coeff * d log pi(token | context) / d theta
    virtual void accumulate_logp_grad(std::span<const int> context, int token,
                                      double coeff,
                                      std::span<double> grad) const = 0;

    double log_prob(std::span<const int> context, int token) const;
    int sample(std::span<const int> context, Rng& rng) const;
    int argmax(std::span<const int> context) const;
};

// Tabular softmax over contexts of the last `context_len` tokens
// (padded at the start). Parameters are one logit per (context, token)
// cell, so gradients are exact and finite-difference checks are cheap.
class ToySoftmaxPolicy final : public TokenPolicy {
public:
    ToySoftmaxPolicy(std::size_t vocab, std::size_t context_len);

    std::size_t vocab_size() const override { return vocab_; }
    std::size_t param_count() const override { return logits_.size(); }
    std::vector<double> parameters() const override { return logits_; }
    void set_parameters(std::span<const double> params) override;
    std::vector<double> log_probs(std::span<const int> context) const override;
    void accumulate_logp_grad(std::span<const int> context, int token,
                              double coeff,
                              std::span<double> grad) const override;

    std::size_t context_len() const { return context_len_; }

    void randomize(Rng& rng, double scale = 0.5);

    // Versioned training-state checkpoint.
    void save_checkpoint(const std::filesystem::path& path,
                         std::uint64_t step, std::uint64_t seed) const;
    struct Checkpoint;
    static Checkpoint load_checkpoint(const std::filesystem::path& path);

private:
    std::size_t context_index(std::span<const int> context) const;

    std::size_t vocab_;
    std::size_t context_len_;
    std::size_t n_contexts_;
    std::vector<double> logits_;  // [context * vocab + token]
};

struct ToySoftmaxPolicy::Checkpoint {
    ToySoftmaxPolicy policy;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
};

// A trajectory reduced to token ids with the loss-mask indicator:
// mask 1 on generated tokens, 0 on prompt/injected tokens.
struct TokenTrajectory {
    std::vector<int> tokens;
    std::vector<int> mask;
};

struct GroupBatch {
    std::string question;
    std::vector<TokenTrajectory> trajectories;  // length G
    std::vector<double> rewards;                // length G
    std::vector<double> advantages;             // length G
};

// Per-token ratio exp(logp_new - logp_old) at mask-1 positions only, in
// sequence order. Throws std::domain_error naming the position on a
// non-finite log-probability.
std::vector<double> token_ratios(const TokenPolicy& policy_new,
                                 const TokenPolicy& policy_old,
                                 const TokenTrajectory& trajectory);

// k3 KL estimator at sampled tokens, rho - ln(rho) - 1 with
// rho = pi_ref/pi_new, averaged over mask-1 positions. Nonnegative.
double kl_penalty(const TokenPolicy& policy_new,
                  const TokenPolicy& policy_ref,
                  const TokenTrajectory& trajectory);

// Score-level form of the objective: log-probabilities are supplied
// per token (full-length arrays, parallel to the mask) and the result
// carries d objective / d logp_new per token. Mask-0 entries of the
// inputs are never read and their output coefficients are exactly 0.
struct TrajectoryScores {
    std::vector<double> logp_new;
    std::vector<double> logp_old;
    std::vector<double> logp_ref;
    std::vector<int> mask;
};
struct ScoredGroup {
    std::vector<TrajectoryScores> trajectories;
    std::vector<double> advantages;
};
struct GrpoScoreResult {
    double objective = 0.0;  // surrogate - beta * kl, to maximize
    double surrogate = 0.0;
    double kl = 0.0;
    // [group][trajectory][token]
    std::vector<std::vector<std::vector<double>>> d_logp_new;
};
GrpoScoreResult grpo_loss_from_scores(const std::vector<ScoredGroup>& groups,
                                      const GrpoConfig& config);

// Policy-level objective and its analytic gradient with respect to
// policy_new's parameters.
struct GrpoEval {
    double objective = 0.0;
    double surrogate = 0.0;
    double kl = 0.0;
    std::vector<double> gradient;
};
GrpoEval grpo_loss(const std::vector<GroupBatch>& batches,
                   const TokenPolicy& policy_new,
                   const TokenPolicy& policy_old,
                   const TokenPolicy& policy_ref, const GrpoConfig& config);

// Monte Carlo estimate of E[reward]: `episode_reward` runs one episode
// for a sample and returns its reward.
double rlvr_objective(
    const std::function<double(const QASample&, Rng&)>& episode_reward,
    const std::vector<QASample>& dataset, int samples_per_question,
    std::uint64_t seed);

// Central finite differences against the analytic gradient of `loss_fn`,
// perturbing each parameter of `policy` in turn. Returns the max
// relative error over parameters (absolute error where the reference
// scale is tiny).
double finite_diff_check(
    TokenPolicy& policy,
    const std::function<GrpoEval(const TokenPolicy&)>& loss_fn,
    double perturbation = 1e-5);

}  // namespace ps
