#include "papersearch/rollout.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "papersearch/bm25.hpp"
#include "papersearch/corpus.hpp"
#include "papersearch/retrieval_service.hpp"
#include "papersearch/toy.hpp"

namespace ps {
namespace {

using nlohmann::json;

// Cut at (and including) the first stop sequence, wherever it appears.
std::string enforce_stop(std::string text, const std::vector<std::string>& stop) {
    std::size_t cut = std::string::npos;
    for (const auto& s : stop) {
        const auto pos = text.find(s);
        if (pos != std::string::npos)
            cut = std::min(cut, pos + s.size());
    }
    if (cut != std::string::npos) text.resize(cut);
    return text;
}

// Truncate to at most `limit` whitespace tokens.
std::string truncate_tokens(const std::string& text, int limit,
                            int* token_count) {
    int count = 0;
    bool in_token = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const bool space = std::isspace(static_cast<unsigned char>(text[i]));
        if (!space && !in_token) {
            ++count;
            if (count > limit) {
                *token_count = limit;
                return text.substr(0, i);
            }
        }
        in_token = !space;
    }
    *token_count = count;
    return text;
}

}  // namespace

std::vector<RetrievedDoc> LocalRetriever::retrieve(const std::string& query,
                                                   std::size_t topk) {
    std::vector<RetrievedDoc> docs;
    for (const auto& hit : index_.search(query, topk)) {
        docs.push_back({hit.doc_id, corpus_.at(hit.doc_id).contents});
    }
    return docs;
}

std::vector<RetrievedDoc> HttpRetriever::retrieve(const std::string& query,
                                                  std::size_t topk) {
    const auto response = client_retrieve(endpoint_, {query}, topk, false, timeout_);
    std::vector<RetrievedDoc> docs;
    for (const auto& r : response.result.at(0)) docs.push_back({r.id, r.contents});
    return docs;
}

std::vector<RetrievedDoc> CountingRetriever::retrieve(const std::string& query,
                                                      std::size_t topk) {
    ++calls_;
    return inner_->retrieve(query, topk);
}

std::string FixedAnswerPolicy::generate(const GenerationRequest&) {
    return "<answer> " + answer_ + " </answer>";
}

std::string ScriptedPolicy::generate(const GenerationRequest&) {
    if (next_ >= responses_.size()) return "";
    return responses_[next_++];
}

void ScriptedPolicy::begin_episode(const QASample&) { next_ = 0; }

std::string ExtractivePolicy::generate(const GenerationRequest& request) {
    const auto pos = request.prompt.find("answer:");
    if (pos == std::string::npos) return "<answer> unknown </answer>";
    std::size_t b = pos + 7;
    while (b < request.prompt.size() &&
           std::isspace(static_cast<unsigned char>(request.prompt[b])))
        ++b;
    std::size_t e = b;
    while (e < request.prompt.size() &&
           !std::isspace(static_cast<unsigned char>(request.prompt[e])))
        ++e;
    std::string entity = request.prompt.substr(b, e - b);
    while (!entity.empty() &&
           !std::isalnum(static_cast<unsigned char>(entity.back())))
        entity.pop_back();
    if (entity.empty()) return "<answer> unknown </answer>";
    return "<answer> " + entity + " </answer>";
}

std::string HttpPolicyClient::generate(const GenerationRequest& request) {
    json body{{"prompt", request.prompt},
              {"stop", request.stop},
              {"max_tokens", request.max_tokens}};
    // Reuses the retrieval client's HTTP plumbing and error classes.
    const std::string text = http_post_json(endpoint_, "/generate", body.dump(),
                                            timeout_);
    json parsed;
    try {
        parsed = json::parse(text);
    } catch (const json::exception& e) {
        throw DecodeError(std::string("malformed generation response: ") + e.what());
    }
    if (!parsed.contains("text") || !parsed["text"].is_string())
        throw DecodeError("generation response is missing field 'text'");
    return parsed["text"].get<std::string>();
}

std::unique_ptr<PolicyClient> make_policy(const std::string& spec) {
    if (spec.rfind("http:", 0) == 0 || spec.rfind("https:", 0) == 0)
        return std::make_unique<HttpPolicyClient>(spec);
    if (spec.rfind("fixed:", 0) == 0)
        return std::make_unique<FixedAnswerPolicy>(spec.substr(6));
    if (spec == "extractive") return std::make_unique<ExtractivePolicy>();
    if (spec.rfind("script:", 0) == 0) {
        std::ifstream f(spec.substr(7));
        if (!f)
            throw std::invalid_argument("cannot open script file: " + spec.substr(7));
        json arr = json::parse(f);
        return std::make_unique<ScriptedPolicy>(
            arr.get<std::vector<std::string>>());
    }
    if (spec.rfind("toy:", 0) == 0) {
        auto ckpt = ToySoftmaxPolicy::load_checkpoint(spec.substr(4));
        return std::make_unique<OwningToyPolicyClient>(std::move(ckpt.policy),
                                                       ckpt.seed);
    }
    throw std::invalid_argument("unknown policy spec: " + spec);
}

EpisodeResult run_episode(PolicyClient& policy, Retriever& retriever,
                          const QASample& sample, const EpisodeLimits& limits,
                          std::size_t topk, const NormalizationConfig& norm,
                          const TagConfig& tags) {
    EpisodeResult result;
    Trajectory& traj = result.trajectory;
    traj.question = sample.question;
    traj.segments.push_back(
        {render_prompt(sample.question, tags), SegmentOrigin::prompt, 0});

    policy.begin_episode(sample);
    const std::vector<std::string> stop = {"</" + tags.search + ">",
                                           "</" + tags.answer + ">"};
    int turns = 0;
    int total_tokens = 0;

    while (true) {
        GenerationRequest request{traj.full_text(), stop,
                                  limits.max_tokens_per_turn};
        std::string generated;
        try {
            generated = enforce_stop(policy.generate(request), stop);
        } catch (const std::exception& e) {
            traj.terminal = Terminal::malformed;
            result.error = e.what();
            break;
        }
        int turn_tokens = 0;
        generated = truncate_tokens(generated, limits.max_tokens_per_turn,
                                    &turn_tokens);
        total_tokens += turn_tokens;
        traj.segments.push_back({generated, SegmentOrigin::generated, turns});

        const ProtocolEvent event = scan_generated(generated, tags);
        if (event.kind == ProtocolEvent::Kind::answer_produced) {
            traj.terminal = Terminal::answered;
            break;
        }
        if (event.kind == ProtocolEvent::Kind::incomplete) {
            // Unclosed or missing tags at the end of the budget.
            traj.terminal = total_tokens >= limits.max_total_tokens
                                ? Terminal::length_limit
                                : Terminal::malformed;
            break;
        }
        // SearchRequested
        if (turns >= limits.max_turns) {
            traj.terminal = Terminal::turn_limit;
            break;
        }
        std::vector<RetrievedDoc> docs;
        try {
            docs = retriever.retrieve(event.text, topk);
        } catch (const std::exception& e) {
            traj.terminal = Terminal::malformed;
            result.error = e.what();
            break;
        }
        inject_information(traj, docs, tags);
        ++turns;
        if (total_tokens >= limits.max_total_tokens) {
            traj.terminal = Terminal::length_limit;
            break;
        }
    }

    result.outcome = compute_reward(traj, sample, norm, tags);
    if (traj.terminal == Terminal::malformed && !result.error.empty()) {
        result.outcome = RewardOutcome{};  // transport failure: reward 0
        result.outcome.failure = RewardFailure::no_answer_block;
    }
    return result;
}

EpisodeGroup run_group(PolicyClient& policy, Retriever& retriever,
                       const QASample& sample, int group_size,
                       const EpisodeLimits& limits, std::size_t topk,
                       double adv_eps, const NormalizationConfig& norm,
                       const TagConfig& tags) {
    if (group_size < 2) throw std::invalid_argument("group size must be >= 2");

    EpisodeGroup group;
    group.sample = sample;
    for (int i = 0; i < group_size; ++i) {
        group.episodes.push_back(
            run_episode(policy, retriever, sample, limits, topk, norm, tags));
        group.rewards.push_back(
            static_cast<double>(group.episodes.back().outcome.reward));
    }
    group.advantages = compute_advantages(group.rewards, adv_eps);
    return group;
}

}  // namespace ps
