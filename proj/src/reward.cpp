#include "papersearch/reward.hpp"

#include <cctype>

namespace ps {
namespace {

bool is_article(std::string_view word) {
    return word == "a" || word == "an" || word == "the";
}

}  // namespace

std::string normalize_answer(std::string_view text,
                             const NormalizationConfig& config) {
    std::string work(text);
    if (config.lowercase) {
        for (char& c : work)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (config.remove_punctuation) {
        std::string kept;
        kept.reserve(work.size());
        for (char c : work) {
            if (!std::ispunct(static_cast<unsigned char>(c))) kept.push_back(c);
        }
        work = std::move(kept);
    }
    if (config.remove_articles) {
        // Whole-word removal; each article becomes a space, which the
        // collapse pass absorbs.
        std::string kept;
        std::size_t i = 0;
        while (i < work.size()) {
            if (std::isspace(static_cast<unsigned char>(work[i]))) {
                kept.push_back(work[i++]);
                continue;
            }
            std::size_t j = i;
            while (j < work.size() &&
                   !std::isspace(static_cast<unsigned char>(work[j])))
                ++j;
            std::string_view word(work.data() + i, j - i);
            if (is_article(word)) {
                kept.push_back(' ');
            } else {
                kept.append(word);
            }
            i = j;
        }
        work = std::move(kept);
    }
    if (config.collapse_whitespace) {
        std::string kept;
        bool in_space = false;
        for (char c : work) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                in_space = true;
            } else {
                if (in_space && !kept.empty()) kept.push_back(' ');
                in_space = false;
                kept.push_back(c);
            }
        }
        work = std::move(kept);
    }
    if (config.strip) {
        std::size_t b = 0, e = work.size();
        while (b < e && std::isspace(static_cast<unsigned char>(work[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(work[e - 1]))) --e;
        work = work.substr(b, e - b);
    }
    return work;
}

std::pair<bool, std::optional<std::size_t>> exact_match(
    std::string_view prediction, const std::vector<std::string>& golden_answers,
    const NormalizationConfig& config) {
    const std::string pred = normalize_answer(prediction, config);
    for (std::size_t i = 0; i < golden_answers.size(); ++i) {
        if (pred == normalize_answer(golden_answers[i], config)) return {true, i};
    }
    return {false, std::nullopt};
}

RewardOutcome compute_reward(const Trajectory& trajectory,
                             const QASample& sample,
                             const NormalizationConfig& config,
                             const TagConfig& tags) {
    RewardOutcome outcome;
    auto answer = extract_answer(trajectory, tags);
    if (!answer) {
        outcome.failure = RewardFailure::no_answer_block;
        return outcome;
    }
    outcome.extracted = *answer;
    auto [hit, index] = exact_match(*answer, sample.golden_answers, config);
    if (hit) {
        outcome.reward = 1;
        outcome.matched_golden = index;
    } else {
        outcome.failure = RewardFailure::no_match;
    }
    return outcome;
}

}  // namespace ps
