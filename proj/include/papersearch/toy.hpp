#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "papersearch/grpo.hpp"
#include "papersearch/rollout.hpp"
#include "papersearch/types.hpp"

namespace ps {

// Desk-scale RL environment: a synthetic corpus where each question's
// answer entity is planted in exactly one document, findable only by
// issuing a retrieving query and copying the entity out of the result.
struct ToyEnvironment {
    std::vector<Document> documents;
    std::vector<QASample> questions;
};
ToyEnvironment make_planted_environment(std::size_t n_docs,
                                        std::size_t n_questions,
                                        std::uint64_t seed);

// Macro-action vocabulary of the toy agent. Observation tokens are
// appended by the environment after a search and carry loss mask 0.
enum ToyToken : int {
    kActAnswerUnknown = 0,  // give up
    kActSearchQuestion = 1, // retrieving query template: the question text
    kActSearchNoise = 2,    // non-retrieving query
    kActAnswerExtract = 3,  // copy the entity out of the last info block
    kObsResults = 4,        // injected: search returned documents
    kObsEmpty = 5,          // injected: no results
    kToyVocab = 6,
};

// Drives episodes for a ToySoftmaxPolicy through the real tag protocol:
// each generate() call samples one macro-action, renders it as tagged
// text, and records the (context, token) pair so the trainer can rebuild
// the token trajectory with its loss mask.
class ToyPolicyClient final : public PolicyClient {
public:
    ToyPolicyClient(const TokenPolicy& policy, std::uint64_t seed)
        : policy_(policy), rng_(seed) {}

    void begin_episode(const QASample& sample) override;
    std::string generate(const GenerationRequest& request) override;

    // Token trajectory of the episode recorded so far (actions mask 1,
    // observations mask 0).
    TokenTrajectory episode_tokens() const { return episode_; }

private:
    const TokenPolicy& policy_;
    Rng rng_;
    TokenTrajectory episode_;
    std::string question_;
};

// Self-contained variant for checkpoint-loaded policies.
class OwningToyPolicyClient final : public PolicyClient {
public:
    OwningToyPolicyClient(ToySoftmaxPolicy policy, std::uint64_t seed)
        : policy_(std::move(policy)), inner_(policy_, seed) {}
    void begin_episode(const QASample& sample) override {
        inner_.begin_episode(sample);
    }
    std::string generate(const GenerationRequest& request) override {
        return inner_.generate(request);
    }

private:
    ToySoftmaxPolicy policy_;
    ToyPolicyClient inner_;
};

struct ToyTrainConfig {
    GrpoConfig grpo;
    int steps = 300;
    int questions_per_step = 8;
    int epochs_per_step = 2;
    double learning_rate = 0.5;
    EpisodeLimits limits;
    std::size_t topk = 3;
    std::uint64_t seed = 0;
};

struct ToyTrainReport {
    std::vector<double> mean_reward_per_step;
    double final_mean_reward = 0.0;  // mean over the last 10 steps
    int steps_run = 0;
    std::uint64_t seed = 0;
    bool diverged = false;
    std::string divergence_detail;
};

// GRPO ascent on the toy policy against a retriever over the planted
// corpus. Deterministic under seed. Non-finite losses abort with the
// diagnostic recorded in the report.
ToyTrainReport train_toy(ToySoftmaxPolicy& policy,
                         const std::vector<QASample>& dataset,
                         Retriever& retriever, const ToyTrainConfig& config);

// Mean reward of the current policy over `episodes` sampled episodes.
double evaluate_toy_policy(const TokenPolicy& policy,
                           const std::vector<QASample>& dataset,
                           Retriever& retriever, int episodes,
                           std::uint64_t seed,
                           const EpisodeLimits& limits = {},
                           std::size_t topk = 3);

}  // namespace ps
