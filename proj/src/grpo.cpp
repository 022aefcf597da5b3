#include "papersearch/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ps {
namespace {

using nlohmann::json;

constexpr int kCheckpointVersion = 1;

void check_finite(double logp, const char* which, std::size_t position) {
    if (!std::isfinite(logp))
        throw std::domain_error(std::string("non-finite ") + which +
                                " log-probability at position " +
                                std::to_string(position));
}

std::span<const int> prefix(const std::vector<int>& tokens, std::size_t t) {
    return std::span<const int>(tokens.data(), t);
}

}  // namespace

std::vector<double> compute_advantages(std::span<const double> rewards,
                                       double adv_eps) {
    if (rewards.size() < 2)
        throw std::invalid_argument("advantage groups need at least 2 rewards");

    const auto g = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= g;

    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double std_dev = std::sqrt(var / g);  // population std

    std::vector<double> advantages(rewards.size(), 0.0);
    if (std_dev < adv_eps) return advantages;  // uniform group
    for (std::size_t i = 0; i < rewards.size(); ++i)
        advantages[i] = (rewards[i] - mean) / std_dev;
    return advantages;
}

double TokenPolicy::log_prob(std::span<const int> context, int token) const {
    return log_probs(context)[static_cast<std::size_t>(token)];
}

int TokenPolicy::sample(std::span<const int> context, Rng& rng) const {
    const auto lp = log_probs(context);
    double u = rng.next_double();
    double acc = 0.0;
    for (std::size_t v = 0; v < lp.size(); ++v) {
        acc += std::exp(lp[v]);
        if (u < acc) return static_cast<int>(v);
    }
    return static_cast<int>(lp.size()) - 1;  // rounding tail
}

int TokenPolicy::argmax(std::span<const int> context) const {
    const auto lp = log_probs(context);
    return static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
}

ToySoftmaxPolicy::ToySoftmaxPolicy(std::size_t vocab, std::size_t context_len)
    : vocab_(vocab), context_len_(context_len) {
    if (vocab < 2) throw std::invalid_argument("vocab must be >= 2");
    n_contexts_ = 1;
    for (std::size_t i = 0; i < context_len; ++i) n_contexts_ *= vocab_ + 1;
    logits_.assign(n_contexts_ * vocab_, 0.0);
}

void ToySoftmaxPolicy::set_parameters(std::span<const double> params) {
    if (params.size() != logits_.size())
        throw std::invalid_argument("parameter vector has wrong size");
    logits_.assign(params.begin(), params.end());
}

std::size_t ToySoftmaxPolicy::context_index(std::span<const int> context) const {
    // Last context_len tokens, oldest first, padded with symbol `vocab_`.
    const std::size_t base = vocab_ + 1;
    std::size_t index = 0;
    for (std::size_t i = 0; i < context_len_; ++i) {
        const std::size_t offset = context_len_ - i;  // positions back
        std::size_t symbol;
        if (context.size() >= offset) {
            const int tok = context[context.size() - offset];
            if (tok < 0 || static_cast<std::size_t>(tok) >= vocab_)
                throw std::out_of_range("context token outside vocabulary");
            symbol = static_cast<std::size_t>(tok);
        } else {
            symbol = vocab_;  // pad
        }
        index = index * base + symbol;
    }
    return index;
}

std::vector<double> ToySoftmaxPolicy::log_probs(std::span<const int> context) const {
    const std::size_t row = context_index(context) * vocab_;
    double max_logit = logits_[row];
    for (std::size_t v = 1; v < vocab_; ++v)
        max_logit = std::max(max_logit, logits_[row + v]);
    double z = 0.0;
    for (std::size_t v = 0; v < vocab_; ++v)
        z += std::exp(logits_[row + v] - max_logit);
    const double log_z = std::log(z) + max_logit;
    std::vector<double> lp(vocab_);
    for (std::size_t v = 0; v < vocab_; ++v) lp[v] = logits_[row + v] - log_z;
    return lp;
}

void ToySoftmaxPolicy::accumulate_logp_grad(std::span<const int> context,
                                            int token, double coeff,
                                            std::span<double> grad) const {
    if (grad.size() != logits_.size())
        throw std::invalid_argument("gradient buffer has wrong size");
    const std::size_t row = context_index(context) * vocab_;
    const auto lp = log_probs(context);
    for (std::size_t v = 0; v < vocab_; ++v) {
        const double indicator = static_cast<int>(v) == token ? 1.0 : 0.0;
        grad[row + v] += coeff * (indicator - std::exp(lp[v]));
    }
}

void ToySoftmaxPolicy::randomize(Rng& rng, double scale) {
    for (auto& l : logits_) l = rng.next_gaussian() * scale;
}

void ToySoftmaxPolicy::save_checkpoint(const std::filesystem::path& path,
                                       std::uint64_t step,
                                       std::uint64_t seed) const {
    json out{{"version", kCheckpointVersion}, {"vocab", vocab_},
             {"context_len", context_len_},  {"logits", logits_},
             {"step", step},                 {"seed", seed}};
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write checkpoint: " + path.string());
    f << out.dump() << "\n";
}

ToySoftmaxPolicy::Checkpoint ToySoftmaxPolicy::load_checkpoint(
    const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path.string());
    json in = json::parse(f);
    if (in.value("version", 0) != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version: " + path.string());
    ToySoftmaxPolicy policy(in["vocab"].get<std::size_t>(),
                            in["context_len"].get<std::size_t>());
    auto logits = in["logits"].get<std::vector<double>>();
    policy.set_parameters(logits);
    return {std::move(policy), in["step"].get<std::uint64_t>(),
            in["seed"].get<std::uint64_t>()};
}

std::vector<double> token_ratios(const TokenPolicy& policy_new,
                                 const TokenPolicy& policy_old,
                                 const TokenTrajectory& trajectory) {
    std::vector<double> ratios;
    for (std::size_t t = 0; t < trajectory.tokens.size(); ++t) {
        if (!trajectory.mask[t]) continue;
        const auto ctx = prefix(trajectory.tokens, t);
        const double lp_new = policy_new.log_prob(ctx, trajectory.tokens[t]);
        const double lp_old = policy_old.log_prob(ctx, trajectory.tokens[t]);
        check_finite(lp_new, "new-policy", t);
        check_finite(lp_old, "old-policy", t);
        ratios.push_back(std::exp(lp_new - lp_old));
    }
    return ratios;
}

double kl_penalty(const TokenPolicy& policy_new, const TokenPolicy& policy_ref,
                  const TokenTrajectory& trajectory) {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < trajectory.tokens.size(); ++t) {
        if (!trajectory.mask[t]) continue;
        const auto ctx = prefix(trajectory.tokens, t);
        const double lp_new = policy_new.log_prob(ctx, trajectory.tokens[t]);
        const double lp_ref = policy_ref.log_prob(ctx, trajectory.tokens[t]);
        check_finite(lp_new, "new-policy", t);
        check_finite(lp_ref, "reference-policy", t);
        const double rho = std::exp(lp_ref - lp_new);
        total += rho - (lp_ref - lp_new) - 1.0;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("trajectory has no mask-1 tokens");
    return total / static_cast<double>(n);
}

GrpoScoreResult grpo_loss_from_scores(const std::vector<ScoredGroup>& groups,
                                      const GrpoConfig& config) {
    if (groups.empty()) throw std::invalid_argument("no groups");

    GrpoScoreResult result;
    result.d_logp_new.resize(groups.size());

    double n_trajectories = 0.0;
    for (const auto& g : groups)
        n_trajectories += static_cast<double>(g.trajectories.size());

    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& group = groups[gi];
        if (group.trajectories.size() != group.advantages.size())
            throw std::invalid_argument("advantages/trajectories length mismatch");
        result.d_logp_new[gi].resize(group.trajectories.size());

        for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
            const auto& traj = group.trajectories[i];
            const double adv = group.advantages[i];
            auto& coeffs = result.d_logp_new[gi][i];
            coeffs.assign(traj.mask.size(), 0.0);

            double mask_sum = 0.0;
            for (int m : traj.mask) mask_sum += m ? 1.0 : 0.0;
            if (mask_sum == 0.0)
                throw std::invalid_argument("trajectory has no mask-1 tokens");

            const double w = 1.0 / (n_trajectories * mask_sum);
            for (std::size_t t = 0; t < traj.mask.size(); ++t) {
                if (!traj.mask[t]) continue;
                const double lp_new = traj.logp_new[t];
                const double lp_old = traj.logp_old[t];
                const double lp_ref = traj.logp_ref[t];
                check_finite(lp_new, "new-policy", t);
                check_finite(lp_old, "old-policy", t);
                check_finite(lp_ref, "reference-policy", t);

                const double ratio = std::exp(lp_new - lp_old);
                const double clipped = std::clamp(ratio, 1.0 - config.clip_eps,
                                                  1.0 + config.clip_eps);
                result.surrogate += w * std::min(ratio * adv, clipped * adv);
                const bool active = adv >= 0.0 ? ratio <= 1.0 + config.clip_eps
                                               : ratio >= 1.0 - config.clip_eps;
                double coeff = active ? w * adv * ratio : 0.0;

                const double rho = std::exp(lp_ref - lp_new);
                result.kl += w * (rho - (lp_ref - lp_new) - 1.0);
                coeff -= config.kl_coeff * w * (1.0 - rho);

                coeffs[t] = coeff;
            }
        }
    }
    result.objective = result.surrogate - config.kl_coeff * result.kl;
    return result;
}

GrpoEval grpo_loss(const std::vector<GroupBatch>& batches,
                   const TokenPolicy& policy_new,
                   const TokenPolicy& policy_old,
                   const TokenPolicy& policy_ref, const GrpoConfig& config) {
    if (batches.empty()) throw std::invalid_argument("no batches");

    std::vector<ScoredGroup> groups(batches.size());
    for (std::size_t gi = 0; gi < batches.size(); ++gi) {
        const auto& batch = batches[gi];
        groups[gi].advantages = batch.advantages;
        groups[gi].trajectories.resize(batch.trajectories.size());
        for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
            const auto& traj = batch.trajectories[i];
            auto& scores = groups[gi].trajectories[i];
            scores.mask = traj.mask;
            scores.logp_new.assign(traj.tokens.size(), 0.0);
            scores.logp_old.assign(traj.tokens.size(), 0.0);
            scores.logp_ref.assign(traj.tokens.size(), 0.0);
            for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
                if (!traj.mask[t]) continue;
                const auto ctx = prefix(traj.tokens, t);
                scores.logp_new[t] = policy_new.log_prob(ctx, traj.tokens[t]);
                scores.logp_old[t] = policy_old.log_prob(ctx, traj.tokens[t]);
                scores.logp_ref[t] = policy_ref.log_prob(ctx, traj.tokens[t]);
            }
        }
    }

    const GrpoScoreResult scored = grpo_loss_from_scores(groups, config);

    GrpoEval eval;
    eval.objective = scored.objective;
    eval.surrogate = scored.surrogate;
    eval.kl = scored.kl;
    eval.gradient.assign(policy_new.param_count(), 0.0);
    for (std::size_t gi = 0; gi < batches.size(); ++gi) {
        const auto& batch = batches[gi];
        for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
            const auto& traj = batch.trajectories[i];
            const auto& coeffs = scored.d_logp_new[gi][i];
            for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
                if (!traj.mask[t] || coeffs[t] == 0.0) continue;
                policy_new.accumulate_logp_grad(prefix(traj.tokens, t),
                                                traj.tokens[t], coeffs[t],
                                                eval.gradient);
            }
        }
    }
    return eval;
}

double rlvr_objective(
    const std::function<double(const QASample&, Rng&)>& episode_reward,
    const std::vector<QASample>& dataset, int samples_per_question,
    std::uint64_t seed) {
    if (dataset.empty()) throw std::invalid_argument("dataset is empty");
    if (samples_per_question < 1)
        throw std::invalid_argument("samples_per_question must be >= 1");

    Rng rng(seed);
    double total = 0.0;
    for (const auto& sample : dataset) {
        for (int s = 0; s < samples_per_question; ++s)
            total += episode_reward(sample, rng);
    }
    return total /
           (static_cast<double>(dataset.size()) * samples_per_question);
}

double finite_diff_check(
    TokenPolicy& policy,
    const std::function<GrpoEval(const TokenPolicy&)>& loss_fn,
    double perturbation) {
    const GrpoEval analytic = loss_fn(policy);
    auto params = policy.parameters();

    double max_err = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + perturbation;
        policy.set_parameters(params);
        const double plus = loss_fn(policy).objective;
        params[i] = saved - perturbation;
        policy.set_parameters(params);
        const double minus = loss_fn(policy).objective;
        params[i] = saved;

        const double fd = (plus - minus) / (2.0 * perturbation);
        const double g = analytic.gradient[i];
        const double scale = std::max({std::abs(fd), std::abs(g), 1e-6});
        max_err = std::max(max_err, std::abs(fd - g) / scale);
    }
    policy.set_parameters(params);
    return max_err;
}

}  // namespace ps
