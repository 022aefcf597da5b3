#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "papersearch/corpus.hpp"
#include "papersearch/reward.hpp"
#include "papersearch/types.hpp"

namespace ps {

// Single completion interface fronting the generation LLM. Tests inject
// recorded fixtures; live runs go through HTTP.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::string complete(const std::string& prompt) = 0;
};

// Plays back recorded completions from a JSON file: an array of
// {"match": substring, "completion": text}; the first entry whose match
// occurs in the prompt wins. Deterministic by construction.
class FixtureLlmClient final : public LlmClient {
public:
    explicit FixtureLlmClient(const std::filesystem::path& fixture_file);
    std::string complete(const std::string& prompt) override;

private:
    struct Entry {
        std::string match;
        std::string completion;
    };
    std::vector<Entry> entries_;
};

class HttpLlmClient final : public LlmClient {
public:
    explicit HttpLlmClient(std::string endpoint, int timeout_seconds = 120)
        : endpoint_(std::move(endpoint)), timeout_(timeout_seconds) {}
    std::string complete(const std::string& prompt) override;

private:
    std::string endpoint_;
    int timeout_;
};

// "fixture:<file>" or "http:<url>".
std::unique_ptr<LlmClient> make_llm_client(const std::string& spec);

struct CandidateQA {
    std::string question;
    std::string answer;
    int cat_num = 0;  // 1..10
    std::string cat;
    std::string source_doc_id;
};

// Renders the generation prompt for one document and parses the <qas>
// completion. Malformed <qa> entries are dropped with a reason appended
// to `diagnostics`; a wholly unparseable completion yields an empty list.
std::vector<CandidateQA> generate_qas(const Document& document,
                                      LlmClient& llm,
                                      std::vector<std::string>* diagnostics = nullptr);

// Canonical answer first, then parsed synonyms deduplicated under
// normalization. Parse failure falls back to the canonical answer alone.
std::vector<std::string> generate_synonyms(const std::string& answer,
                                           LlmClient& llm,
                                           std::vector<std::string>* diagnostics = nullptr);

// True when the two texts share a contiguous phrase of `n` or more
// tokens (lowercased).
bool shares_ngram(std::string_view a, std::string_view b, std::size_t n);

struct ParaphraseResult {
    std::string question;
    bool paraphrased = false;  // false means fallback to the original
};

// Rewrites the question; outputs repeating any 3-word contiguous phrase
// of the original (or identical outputs) are rejected in favor of the
// original.
ParaphraseResult paraphrase_question(const std::string& question,
                                     const std::string& answer,
                                     LlmClient& llm,
                                     std::vector<std::string>* diagnostics = nullptr);

struct FilterConfig {
    std::vector<std::string> referential_phrases = {
        "this study", "this paper", "this article", "the present study"};
    std::vector<std::string> binary_answers = {"yes", "no", "true", "false"};
};

struct Rejection {
    std::string question;
    std::string rule;
};

struct FilterResult {
    std::vector<CandidateQA> accepted;
    std::vector<Rejection> rejected;
};
FilterResult filter_qas(const std::vector<CandidateQA>& candidates,
                        const FilterConfig& config = {});

struct PipelineStats {
    std::size_t abstracts_sampled = 0;
    std::size_t abstracts_skipped = 0;
    std::size_t candidates_prefilter = 0;
    std::size_t emitted = 0;
    std::size_t paraphrased = 0;
    std::map<std::string, std::size_t> per_category;
    std::map<std::string, std::size_t> rejections_by_rule;
    std::vector<std::string> diagnostics;
};

struct PipelineResult {
    std::vector<QASample> samples;
    PipelineStats stats;
};

// Full pipeline: sample abstracts, generate QAs, expand synonyms,
// paraphrase a Bernoulli(paraphrase_fraction) subset, filter, emit.
// Per-document LLM failures are skipped with a diagnostic.
PipelineResult run_pipeline(const CorpusStore& corpus,
                            std::size_t n_abstracts, LlmClient& llm,
                            double paraphrase_fraction, std::uint64_t seed,
                            const FilterConfig& filter = {});

}  // namespace ps
