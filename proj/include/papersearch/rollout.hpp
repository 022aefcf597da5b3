#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "papersearch/agent_protocol.hpp"
#include "papersearch/grpo.hpp"
#include "papersearch/reward.hpp"
#include "papersearch/types.hpp"

namespace ps {

// Retrieval backend used during rollouts: either the in-process index or
// the HTTP client, behind one interface so episodes don't care which.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<RetrievedDoc> retrieve(const std::string& query,
                                               std::size_t topk) = 0;
};

class Bm25Index;
class CorpusStore;

class LocalRetriever final : public Retriever {
public:
    LocalRetriever(const Bm25Index& index, const CorpusStore& corpus)
        : index_(index), corpus_(corpus) {}
    std::vector<RetrievedDoc> retrieve(const std::string& query,
                                       std::size_t topk) override;

private:
    const Bm25Index& index_;
    const CorpusStore& corpus_;
};

class HttpRetriever final : public Retriever {
public:
    explicit HttpRetriever(std::string endpoint, int timeout_seconds = 30)
        : endpoint_(std::move(endpoint)), timeout_(timeout_seconds) {}
    std::vector<RetrievedDoc> retrieve(const std::string& query,
                                       std::size_t topk) override;

private:
    std::string endpoint_;
    int timeout_;
};

// Counts calls; used to assert that direct-mode evaluation never touches
// retrieval.
class CountingRetriever final : public Retriever {
public:
    explicit CountingRetriever(Retriever* inner) : inner_(inner) {}
    std::vector<RetrievedDoc> retrieve(const std::string& query,
                                       std::size_t topk) override;
    std::size_t calls() const { return calls_; }

private:
    Retriever* inner_;
    std::size_t calls_ = 0;
};

struct GenerationRequest {
    std::string prompt;
    std::vector<std::string> stop;
    int max_tokens = 512;
};

// Fronts the policy for rollouts. The returned text ends at (and
// includes) the first stop sequence when one is hit; nothing beyond it
// is ever returned.
class PolicyClient {
public:
    virtual ~PolicyClient() = default;
    virtual std::string generate(const GenerationRequest& request) = 0;
    // Called once at the start of every episode, before any generation.
    virtual void begin_episode(const QASample& sample) { (void)sample; }
};

// Always answers with a fixed string.
class FixedAnswerPolicy final : public PolicyClient {
public:
    explicit FixedAnswerPolicy(std::string answer)
        : answer_(std::move(answer)) {}
    std::string generate(const GenerationRequest& request) override;

private:
    std::string answer_;
};

// Replays a recorded response list, one entry per generate() call,
// restarting from the top at each episode.
class ScriptedPolicy final : public PolicyClient {
public:
    explicit ScriptedPolicy(std::vector<std::string> responses)
        : responses_(std::move(responses)) {}
    std::string generate(const GenerationRequest& request) override;
    void begin_episode(const QASample& sample) override;

private:
    std::vector<std::string> responses_;
    std::size_t next_ = 0;
};

// Answers with the first "answer: <entity>" occurrence found in its own
// prompt (retrieved documents included), or "unknown" when none exists.
class ExtractivePolicy final : public PolicyClient {
public:
    std::string generate(const GenerationRequest& request) override;
};

// POSTs {prompt, stop, max_tokens} to a completion endpoint and returns
// the generated text.
class HttpPolicyClient final : public PolicyClient {
public:
    explicit HttpPolicyClient(std::string endpoint, int timeout_seconds = 120)
        : endpoint_(std::move(endpoint)), timeout_(timeout_seconds) {}
    std::string generate(const GenerationRequest& request) override;

private:
    std::string endpoint_;
    int timeout_;
};

// Builds a policy from a spec string: "http:<url>", "fixed:<answer>",
// "extractive", "script:<json file>", or "toy:<checkpoint>". Throws
// std::invalid_argument on unknown specs.
std::unique_ptr<PolicyClient> make_policy(const std::string& spec);

struct EpisodeLimits {
    int max_turns = 4;              // injected blocks per episode
    int max_tokens_per_turn = 512;  // whitespace tokens per generation
    int max_total_tokens = 4096;    // whitespace tokens per episode
};

struct EpisodeResult {
    Trajectory trajectory;
    RewardOutcome outcome;
    std::string error;  // transport failure detail, empty when clean
};

// One full episode: render prompt, generate with stop tags, scan, search
// and inject on request, stop on answer, enforce limits, grade.
// Transport failures terminate the episode as malformed with reward 0;
// they never propagate.
EpisodeResult run_episode(PolicyClient& policy, Retriever& retriever,
                          const QASample& sample, const EpisodeLimits& limits,
                          std::size_t topk,
                          const NormalizationConfig& norm = {},
                          const TagConfig& tags = {});

// G independent episodes for one question, with group-normalized
// advantages.
struct EpisodeGroup {
    QASample sample;
    std::vector<EpisodeResult> episodes;
    std::vector<double> rewards;
    std::vector<double> advantages;
};
EpisodeGroup run_group(PolicyClient& policy, Retriever& retriever,
                       const QASample& sample, int group_size,
                       const EpisodeLimits& limits, std::size_t topk,
                       double adv_eps = 1e-6,
                       const NormalizationConfig& norm = {},
                       const TagConfig& tags = {});

}  // namespace ps
