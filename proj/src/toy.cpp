#include "papersearch/toy.hpp"

#include <cctype>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ps {
namespace {

std::string pad3(std::size_t n) {
    std::string s = std::to_string(n);
    while (s.size() < 3) s.insert(s.begin(), '0');
    return s;
}

// Entity token following the first "answer:" inside the last
// <information> block, if any.
std::string extract_planted_entity(const std::string& prompt) {
    const auto info = prompt.rfind("<information>");
    if (info == std::string::npos) return "";
    const auto pos = prompt.find("answer:", info);
    if (pos == std::string::npos) return "";
    std::size_t b = pos + 7;
    while (b < prompt.size() &&
           std::isspace(static_cast<unsigned char>(prompt[b])))
        ++b;
    std::size_t e = b;
    while (e < prompt.size() &&
           !std::isspace(static_cast<unsigned char>(prompt[e])))
        ++e;
    std::string entity = prompt.substr(b, e - b);
    while (!entity.empty() &&
           !std::isalnum(static_cast<unsigned char>(entity.back())))
        entity.pop_back();
    return entity;
}

}  // namespace

ToyEnvironment make_planted_environment(std::size_t n_docs,
                                        std::size_t n_questions,
                                        std::uint64_t seed) {
    if (n_questions > n_docs)
        throw std::invalid_argument("cannot plant more questions than documents");

    // Each document carries a unique marker keyword (drives retrieval)
    // and a unique entity (the answer); seed only permutes entity ids so
    // answers cannot be inferred from document order.
    Rng rng(seed);
    std::vector<std::size_t> entity_ids(n_docs);
    std::iota(entity_ids.begin(), entity_ids.end(), 0);
    rng.shuffle(entity_ids);

    ToyEnvironment env;
    for (std::size_t i = 0; i < n_docs; ++i) {
        const std::string kw = "kw" + pad3(i);
        const std::string entity = "ent" + pad3(entity_ids[i]);
        Document doc;
        doc.id = "d" + pad3(i);
        doc.title = "record for marker " + kw;
        doc.body = "study of marker " + kw +
                   " in archived samples. the recorded entity is answer: " +
                   entity + " .";
        doc.contents = doc.title + "\n" + doc.body;
        env.documents.push_back(std::move(doc));

        if (i < n_questions) {
            QASample q;
            q.id = "q" + pad3(i);
            q.question = "Which entity does marker " + kw +
                         " resolve to in the archive?";
            q.golden_answers = {entity};
            q.category = std::string(
                category_label(static_cast<int>(i % 10) + 1));
            q.source_doc_id = "d" + pad3(i);
            env.questions.push_back(std::move(q));
        }
    }
    return env;
}

void ToyPolicyClient::begin_episode(const QASample& sample) {
    episode_ = TokenTrajectory{};
    question_ = sample.question;
}

std::string ToyPolicyClient::generate(const GenerationRequest& request) {
    // A prior search action means the engine has injected an information
    // block since our last token; record it as an observation token.
    if (!episode_.tokens.empty()) {
        const int last = episode_.tokens.back();
        if (last == kActSearchQuestion || last == kActSearchNoise) {
            const auto info = request.prompt.rfind("<information>");
            const bool empty =
                info != std::string::npos &&
                request.prompt.find("No results found.", info) != std::string::npos;
            episode_.tokens.push_back(empty ? kObsEmpty : kObsResults);
            episode_.mask.push_back(0);
        }
    }

    const int token = policy_.sample(episode_.tokens, rng_);
    episode_.tokens.push_back(token);
    episode_.mask.push_back(1);

    switch (token) {
        case kActSearchQuestion:
            return "<think> searching with the question </think>\n<search> " +
                   question_ + " </search>";
        case kActSearchNoise:
            return "<search> zz nothing matches zz </search>";
        case kActAnswerExtract: {
            const std::string entity = extract_planted_entity(request.prompt);
            if (entity.empty()) return "<answer> unknown </answer>";
            return "<answer> " + entity + " </answer>";
        }
        default:
            // kActAnswerUnknown, plus any sampled observation token: the
            // policy's distribution covers the full vocabulary, so
            // off-role tokens act as a give-up answer and training
            // learns to avoid them.
            return "<think> no further information needed </think>\n"
                   "<answer> unknown </answer>";
    }
}

ToyTrainReport train_toy(ToySoftmaxPolicy& policy,
                         const std::vector<QASample>& dataset,
                         Retriever& retriever, const ToyTrainConfig& config) {
    if (dataset.empty()) throw std::invalid_argument("dataset is empty");

    const ToySoftmaxPolicy reference = policy;  // initial state
    Rng rng(config.seed);

    ToyTrainReport report;
    report.seed = config.seed;

    for (int step = 0; step < config.steps; ++step) {
        const ToySoftmaxPolicy old_policy = policy;

        std::vector<GroupBatch> batches;
        double reward_sum = 0.0;
        std::size_t episode_count = 0;
        for (int q = 0; q < config.questions_per_step; ++q) {
            const QASample& sample =
                dataset[rng.next_below(dataset.size())];
            ToyPolicyClient client(old_policy, rng.next_u64());

            GroupBatch batch;
            batch.question = sample.question;
            for (int i = 0; i < config.grpo.group_size; ++i) {
                const EpisodeResult episode = run_episode(
                    client, retriever, sample, config.limits, config.topk);
                batch.trajectories.push_back(client.episode_tokens());
                batch.rewards.push_back(
                    static_cast<double>(episode.outcome.reward));
            }
            batch.advantages =
                compute_advantages(batch.rewards, config.grpo.adv_eps);
            reward_sum +=
                std::accumulate(batch.rewards.begin(), batch.rewards.end(), 0.0);
            episode_count += batch.rewards.size();
            batches.push_back(std::move(batch));
        }

        for (int epoch = 0; epoch < config.epochs_per_step; ++epoch) {
            const GrpoEval eval =
                grpo_loss(batches, policy, old_policy, reference, config.grpo);
            if (!std::isfinite(eval.objective)) {
                report.diverged = true;
                report.divergence_detail =
                    "non-finite objective at step " + std::to_string(step);
                report.steps_run = step;
                return report;
            }
            auto params = policy.parameters();
            for (std::size_t i = 0; i < params.size(); ++i)
                params[i] += config.learning_rate * eval.gradient[i];
            policy.set_parameters(params);
        }

        report.mean_reward_per_step.push_back(
            reward_sum / static_cast<double>(episode_count));
        report.steps_run = step + 1;
    }

    const std::size_t window =
        std::min<std::size_t>(10, report.mean_reward_per_step.size());
    if (window > 0) {
        double tail = 0.0;
        for (std::size_t i = report.mean_reward_per_step.size() - window;
             i < report.mean_reward_per_step.size(); ++i)
            tail += report.mean_reward_per_step[i];
        report.final_mean_reward = tail / static_cast<double>(window);
    }
    return report;
}

double evaluate_toy_policy(const TokenPolicy& policy,
                           const std::vector<QASample>& dataset,
                           Retriever& retriever, int episodes,
                           std::uint64_t seed, const EpisodeLimits& limits,
                           std::size_t topk) {
    if (dataset.empty() || episodes < 1)
        throw std::invalid_argument("need a dataset and at least one episode");

    Rng rng(seed);
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        const QASample& sample = dataset[rng.next_below(dataset.size())];
        ToyPolicyClient client(policy, rng.next_u64());
        total += run_episode(client, retriever, sample, limits, topk)
                     .outcome.reward;
    }
    return total / episodes;
}

}  // namespace ps
