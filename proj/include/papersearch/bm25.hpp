#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "papersearch/corpus.hpp"

namespace ps {

// Classic Okapi defaults; the paper names BM25 without parameters.
struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Hit {
    std::string doc_id;
    double score = 0.0;
    int rank = 0;  // 1-based
};

// Lowercase tokens split on non-alphanumeric boundaries. No stemming,
// no stopword removal.
std::vector<std::string> tokenize(std::string_view text);

// Immutable inverted index with Lucene-style smoothed IDF:
//   idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))
// which is nonnegative for every term.
class Bm25Index {
public:
    struct Posting {
        std::uint32_t doc = 0;  // position in doc_ids()
        std::uint32_t tf = 0;
    };

    static Bm25Index build(const CorpusStore& corpus, Bm25Params params = {});

    static Bm25Index load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    // BM25 score of one document for a token multiset; duplicate query
    // tokens contribute once per occurrence. Throws on unknown doc id.
    double score(const std::vector<std::string>& query_tokens,
                 const std::string& doc_id) const;

    // Top-k by score descending, ties broken by ascending doc id. An
    // empty query (after tokenization) returns no hits. Documents with
    // score 0 are not returned.
    std::vector<Hit> search(std::string_view query_text, std::size_t k) const;

    std::size_t doc_count() const { return doc_ids_.size(); }
    double avgdl() const { return avgdl_; }
    const Bm25Params& params() const { return params_; }
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }

private:
    double score_one(const std::string& term, std::uint32_t tf,
                     std::uint32_t doc) const;

    Bm25Params params_;
    double avgdl_ = 0.0;
    std::vector<std::string> doc_ids_;               // sorted ascending
    std::vector<std::uint32_t> doc_lengths_;         // parallel to doc_ids_
    std::unordered_map<std::string, std::vector<Posting>> postings_;
};

}  // namespace ps
