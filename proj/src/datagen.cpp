#include "papersearch/datagen.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "papersearch/bm25.hpp"
#include "papersearch/prompts.hpp"
#include "papersearch/retrieval_service.hpp"
#include "papersearch/rng.hpp"

namespace ps {
namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// Inner text of the first <tag>...</tag> at or after `from`; advances
// `from` past the block.
std::optional<std::string> next_block(std::string_view text,
                                      std::string_view tag, std::size_t& from) {
    const std::string open = "<" + std::string(tag) + ">";
    const std::string close = "</" + std::string(tag) + ">";
    const auto o = text.find(open, from);
    if (o == std::string_view::npos) return std::nullopt;
    const auto c = text.find(close, o + open.size());
    if (c == std::string_view::npos) return std::nullopt;
    from = c + close.size();
    return trim(text.substr(o + open.size(), c - o - open.size()));
}

std::optional<std::string> first_block(std::string_view text,
                                       std::string_view tag) {
    std::size_t from = 0;
    return next_block(text, tag, from);
}

void log_diag(std::vector<std::string>* diagnostics, std::string message) {
    if (diagnostics) diagnostics->push_back(std::move(message));
}

}  // namespace

FixtureLlmClient::FixtureLlmClient(const std::filesystem::path& fixture_file) {
    std::ifstream f(fixture_file);
    if (!f)
        throw std::runtime_error("cannot open LLM fixture file: " +
                                 fixture_file.string());
    json arr = json::parse(f);
    for (const auto& entry : arr) {
        entries_.push_back({entry.at("match").get<std::string>(),
                            entry.at("completion").get<std::string>()});
    }
}

std::string FixtureLlmClient::complete(const std::string& prompt) {
    for (const auto& entry : entries_) {
        if (prompt.find(entry.match) != std::string::npos)
            return entry.completion;
    }
    throw std::runtime_error("no fixture completion matches the prompt");
}

std::string HttpLlmClient::complete(const std::string& prompt) {
    const std::string raw = http_post_json(
        endpoint_, "/complete", json{{"prompt", prompt}}.dump(), timeout_);
    try {
        return json::parse(raw).at("text").get<std::string>();
    } catch (const json::exception& e) {
        throw DecodeError(std::string("malformed completion response: ") +
                          e.what());
    }
}

std::unique_ptr<LlmClient> make_llm_client(const std::string& spec) {
    if (spec.rfind("fixture:", 0) == 0)
        return std::make_unique<FixtureLlmClient>(spec.substr(8));
    if (spec.rfind("http:", 0) == 0 || spec.rfind("https:", 0) == 0)
        return std::make_unique<HttpLlmClient>(spec);
    throw std::invalid_argument("unknown LLM client spec: " + spec);
}

std::vector<CandidateQA> generate_qas(const Document& document, LlmClient& llm,
                                      std::vector<std::string>* diagnostics) {
    const std::string prompt = prompts::render(
        prompts::kQaGenerationPrompt, "{title_abstract}", document.contents);
    const std::string completion = llm.complete(prompt);

    // Prefer the <qas> envelope, but tolerate bare <qa> entries.
    std::string_view scope = completion;
    std::string envelope;
    if (auto qas = first_block(completion, "qas")) {
        envelope = std::move(*qas);
        scope = envelope;
    }

    std::vector<CandidateQA> out;
    std::size_t from = 0;
    while (auto qa = next_block(scope, "qa", from)) {
        if (out.size() == 3) break;  // three questions per abstract

        const auto question = first_block(*qa, "question");
        const auto answer = first_block(*qa, "answer");
        const auto cat_num_text = first_block(*qa, "cat_num");
        const auto cat_text = first_block(*qa, "cat");
        if (!question || question->empty() || !answer || answer->empty()) {
            log_diag(diagnostics, "dropped <qa> entry for " + document.id +
                                      ": missing question or answer");
            continue;
        }
        int cat_num = 0;
        if (cat_num_text) {
            try {
                cat_num = std::stoi(*cat_num_text);
            } catch (const std::exception&) {
                cat_num = 0;
            }
        }
        if (cat_num < 1 || cat_num > 10) {
            log_diag(diagnostics, "dropped <qa> entry for " + document.id +
                                      ": bad cat_num");
            continue;
        }
        CandidateQA cand;
        cand.question = *question;
        cand.answer = *answer;
        cand.cat_num = cat_num;
        cand.source_doc_id = document.id;
        // The number is authoritative; a mismatched label is overwritten.
        cand.cat = std::string(category_label(cat_num));
        if (cat_text && category_number(*cat_text) &&
            *category_number(*cat_text) != cat_num) {
            log_diag(diagnostics, "label/number mismatch for " + document.id +
                                      ": kept cat_num " + std::to_string(cat_num));
        }
        out.push_back(std::move(cand));
    }
    if (out.empty())
        log_diag(diagnostics,
                 "no parseable <qa> entries in completion for " + document.id);
    return out;
}

std::vector<std::string> generate_synonyms(const std::string& answer,
                                           LlmClient& llm,
                                           std::vector<std::string>* diagnostics) {
    if (answer.empty()) throw std::invalid_argument("answer must be nonempty");

    std::vector<std::string> golden = {answer};
    std::unordered_set<std::string> seen = {normalize_answer(answer)};

    const std::string prompt =
        prompts::render(prompts::kSynonymPrompt, "{answer}", answer);
    std::string completion;
    try {
        completion = llm.complete(prompt);
    } catch (const std::exception& e) {
        log_diag(diagnostics, "synonym call failed for '" + answer +
                                  "': " + e.what());
        return golden;
    }

    const auto block = first_block(completion, "synonyms");
    if (!block) {
        log_diag(diagnostics,
                 "no <synonyms> block in completion for '" + answer + "'");
        return golden;
    }
    std::size_t start = 0;
    while (start <= block->size()) {
        const auto nl = block->find('\n', start);
        const std::string line =
            trim(block->substr(start, nl == std::string::npos
                                          ? std::string::npos
                                          : nl - start));
        if (!line.empty() && seen.insert(normalize_answer(line)).second)
            golden.push_back(line);
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    return golden;
}

bool shares_ngram(std::string_view a, std::string_view b, std::size_t n) {
    const auto ta = tokenize(a);
    const auto tb = tokenize(b);
    if (ta.size() < n || tb.size() < n) return false;

    std::unordered_set<std::string> grams;
    for (std::size_t i = 0; i + n <= ta.size(); ++i) {
        std::string g = ta[i];
        for (std::size_t j = 1; j < n; ++j) g += " " + ta[i + j];
        grams.insert(std::move(g));
    }
    for (std::size_t i = 0; i + n <= tb.size(); ++i) {
        std::string g = tb[i];
        for (std::size_t j = 1; j < n; ++j) g += " " + tb[i + j];
        if (grams.count(g)) return true;
    }
    return false;
}

ParaphraseResult paraphrase_question(const std::string& question,
                                     const std::string& answer, LlmClient& llm,
                                     std::vector<std::string>* diagnostics) {
    if (question.empty())
        throw std::invalid_argument("question must be nonempty");

    std::string prompt =
        prompts::render(prompts::kParaphrasePrompt, "{question}", question);
    prompt = prompts::render(prompt, "{answer}", answer);

    std::string completion;
    try {
        completion = llm.complete(prompt);
    } catch (const std::exception& e) {
        log_diag(diagnostics, "paraphrase call failed: " + std::string(e.what()));
        return {question, false};
    }

    const auto block = first_block(completion, "question");
    if (!block || block->empty()) {
        log_diag(diagnostics, "no <question> block in paraphrase completion");
        return {question, false};
    }
    if (*block == question) {
        log_diag(diagnostics, "paraphrase identical to original; kept original");
        return {question, false};
    }
    // The prompt forbids reusing any three-or-more-word phrase; enforce it
    // mechanically rather than trusting the model.
    if (shares_ngram(question, *block, 3)) {
        log_diag(diagnostics,
                 "paraphrase shares a 3-word phrase with the original; kept original");
        return {question, false};
    }
    return {*block, true};
}

FilterResult filter_qas(const std::vector<CandidateQA>& candidates,
                        const FilterConfig& config) {
    FilterResult result;
    for (const auto& cand : candidates) {
        const std::string question_lower = lowercase(cand.question);
        std::string rule;
        for (const auto& phrase : config.referential_phrases) {
            if (question_lower.find(lowercase(phrase)) != std::string::npos) {
                rule = "document-referential phrase: '" + phrase + "'";
                break;
            }
        }
        if (rule.empty()) {
            const std::string norm = normalize_answer(cand.answer);
            for (const auto& binary : config.binary_answers) {
                if (norm == normalize_answer(binary)) {
                    rule = "binary answer";
                    break;
                }
            }
        }
        if (rule.empty()) {
            result.accepted.push_back(cand);
        } else {
            result.rejected.push_back({cand.question, rule});
        }
    }
    return result;
}

PipelineResult run_pipeline(const CorpusStore& corpus,
                            std::size_t n_abstracts, LlmClient& llm,
                            double paraphrase_fraction, std::uint64_t seed,
                            const FilterConfig& filter) {
    if (n_abstracts > corpus.size())
        throw std::invalid_argument("n_abstracts exceeds the corpus size");

    // Uniform sample without replacement, fixed by the seed.
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    order.resize(n_abstracts);

    PipelineResult result;
    auto& stats = result.stats;
    stats.abstracts_sampled = n_abstracts;

    for (std::size_t doc_pos : order) {
        const Document& doc = corpus.documents()[doc_pos];

        std::vector<CandidateQA> candidates;
        try {
            candidates = generate_qas(doc, llm, &stats.diagnostics);
        } catch (const std::exception& e) {
            ++stats.abstracts_skipped;
            stats.diagnostics.push_back("skipped " + doc.id + ": " + e.what());
            continue;
        }
        stats.candidates_prefilter += candidates.size();

        std::size_t qa_index = 0;
        for (auto& cand : candidates) {
            auto golden = generate_synonyms(cand.answer, llm, &stats.diagnostics);

            bool paraphrased = false;
            if (rng.next_double() < paraphrase_fraction) {
                const ParaphraseResult para = paraphrase_question(
                    cand.question, cand.answer, llm, &stats.diagnostics);
                cand.question = para.question;
                paraphrased = para.paraphrased;
            }

            const FilterResult filtered = filter_qas({cand}, filter);
            if (!filtered.accepted.empty()) {
                QASample sample;
                sample.id = doc.id + "-q" + std::to_string(qa_index);
                sample.question = cand.question;
                sample.golden_answers = std::move(golden);
                sample.category = cand.cat;
                sample.source_doc_id = doc.id;
                sample.paraphrased = paraphrased;
                ++stats.per_category[sample.category];
                if (paraphrased) ++stats.paraphrased;
                ++stats.emitted;
                result.samples.push_back(std::move(sample));
            } else {
                for (const auto& rejection : filtered.rejected)
                    ++stats.rejections_by_rule[rejection.rule];
            }
            ++qa_index;
        }
    }
    return result;
}

}  // namespace ps
