#pragma once

#include <optional>
#include <string>
#include <vector>

#include "papersearch/agent_protocol.hpp"
#include "papersearch/types.hpp"

namespace ps {

// Defaults reproduce lowercasing, whitespace stripping, and whole-word
// article removal, plus the whitespace collapse the article removal
// needs. Punctuation removal is off by default: biomedical answers like
// "H3K27ac" or "5p15.3" are punctuation-sensitive.
struct NormalizationConfig {
    bool lowercase = true;
    bool strip = true;
    bool remove_articles = true;
    bool collapse_whitespace = true;
    bool remove_punctuation = false;
};

// Applies lowercase, punctuation removal (if enabled), whole-word
// article removal ("a", "an", "the"), then whitespace collapse and trim.
// Idempotent.
std::string normalize_answer(std::string_view text,
                             const NormalizationConfig& config = {});

// True iff normalize(prediction) equals normalize(g) for some golden g;
// the index of the first match is returned alongside.
std::pair<bool, std::optional<std::size_t>> exact_match(
    std::string_view prediction, const std::vector<std::string>& golden_answers,
    const NormalizationConfig& config = {});

enum class RewardFailure { no_answer_block, no_match };

struct RewardOutcome {
    int reward = 0;  // 0 or 1
    std::optional<std::size_t> matched_golden;
    std::optional<std::string> extracted;
    std::optional<RewardFailure> failure;
};

// Binary verifiable reward: extract the answer from the trajectory and
// exact-match it against the golden list. All failures are encoded in the
// outcome, never thrown.
RewardOutcome compute_reward(const Trajectory& trajectory,
                             const QASample& sample,
                             const NormalizationConfig& config = {},
                             const TagConfig& tags = {});

}  // namespace ps
