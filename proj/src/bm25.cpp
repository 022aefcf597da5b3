#include "papersearch/bm25.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ps {
namespace {

using nlohmann::json;

constexpr int kIndexVersion = 1;

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

Bm25Index Bm25Index::build(const CorpusStore& corpus, Bm25Params params) {
    if (corpus.size() == 0)
        throw std::invalid_argument("cannot build an index over an empty corpus");
    if (params.k1 < 0.0 || params.b < 0.0 || params.b > 1.0)
        throw std::invalid_argument("invalid BM25 params: k1 >= 0 and 0 <= b <= 1");

    Bm25Index index;
    index.params_ = params;

    // Documents are indexed in ascending id order so identical corpora
    // always serialize identically.
    std::vector<const Document*> docs;
    docs.reserve(corpus.size());
    for (const auto& d : corpus.documents()) docs.push_back(&d);
    std::sort(docs.begin(), docs.end(),
              [](const Document* a, const Document* b) { return a->id < b->id; });

    double total_len = 0.0;
    for (std::uint32_t pos = 0; pos < docs.size(); ++pos) {
        const Document& d = *docs[pos];
        index.doc_ids_.push_back(d.id);
        auto tokens = tokenize(d.contents);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
        total_len += static_cast<double>(tokens.size());

        std::sort(tokens.begin(), tokens.end());
        for (std::size_t i = 0; i < tokens.size();) {
            std::size_t j = i;
            while (j < tokens.size() && tokens[j] == tokens[i]) ++j;
            index.postings_[tokens[i]].push_back(
                {pos, static_cast<std::uint32_t>(j - i)});
            i = j;
        }
    }
    index.avgdl_ = total_len / static_cast<double>(docs.size());
    return index;
}

double Bm25Index::score_one(const std::string& term, std::uint32_t tf,
                            std::uint32_t doc) const {
    const double n = static_cast<double>(doc_ids_.size());
    const double df = static_cast<double>(postings_.at(term).size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    const double dl = static_cast<double>(doc_lengths_[doc]);
    const double denom =
        static_cast<double>(tf) +
        params_.k1 * (1.0 - params_.b + params_.b * dl / avgdl_);
    return idf * static_cast<double>(tf) * (params_.k1 + 1.0) / denom;
}

double Bm25Index::score(const std::vector<std::string>& query_tokens,
                        const std::string& doc_id) const {
    auto it = std::lower_bound(doc_ids_.begin(), doc_ids_.end(), doc_id);
    if (it == doc_ids_.end() || *it != doc_id)
        throw std::out_of_range("unknown document id: " + doc_id);
    const auto doc = static_cast<std::uint32_t>(it - doc_ids_.begin());

    double total = 0.0;
    for (const auto& term : query_tokens) {
        auto pit = postings_.find(term);
        if (pit == postings_.end()) continue;
        const auto& plist = pit->second;
        auto p = std::lower_bound(
            plist.begin(), plist.end(), doc,
            [](const Posting& a, std::uint32_t d) { return a.doc < d; });
        if (p == plist.end() || p->doc != doc) continue;
        total += score_one(term, p->tf, doc);
    }
    return total;
}

std::vector<Hit> Bm25Index::search(std::string_view query_text,
                                   std::size_t k) const {
    if (k == 0) throw std::invalid_argument("k must be >= 1");
    const auto query = tokenize(query_text);
    if (query.empty()) return {};

    std::vector<double> scores(doc_ids_.size(), 0.0);
    std::vector<std::uint32_t> touched;
    for (const auto& term : query) {
        auto pit = postings_.find(term);
        if (pit == postings_.end()) continue;
        for (const auto& posting : pit->second) {
            if (scores[posting.doc] == 0.0) touched.push_back(posting.doc);
            scores[posting.doc] += score_one(term, posting.tf, posting.doc);
        }
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());

    // Descending score; ties by ascending id. doc positions are already
    // in ascending id order, so a stable sort on score suffices.
    std::stable_sort(touched.begin(), touched.end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                         return scores[a] > scores[b];
                     });

    std::vector<Hit> hits;
    const std::size_t limit = std::min(k, touched.size());
    hits.reserve(limit);
    for (std::size_t i = 0; i < limit; ++i) {
        hits.push_back({doc_ids_[touched[i]], scores[touched[i]],
                        static_cast<int>(i) + 1});
    }
    return hits;
}

void Bm25Index::save(const std::filesystem::path& path) const {
    json postings = json::object();
    for (const auto& [term, plist] : postings_) {
        json arr = json::array();
        for (const auto& p : plist) arr.push_back({p.doc, p.tf});
        postings[term] = std::move(arr);
    }
    json out{{"version", kIndexVersion},
             {"params", {{"k1", params_.k1}, {"b", params_.b}}},
             {"n", doc_ids_.size()},
             {"avgdl", avgdl_},
             {"doc_ids", doc_ids_},
             {"doc_lengths", doc_lengths_},
             {"postings", std::move(postings)}};
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write index file: " + path.string());
    f << out.dump() << "\n";
}

Bm25Index Bm25Index::load(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open index file: " + path.string());
    json in = json::parse(f);
    if (in.value("version", 0) != kIndexVersion)
        throw std::runtime_error("unsupported index version in " + path.string());

    Bm25Index index;
    index.params_.k1 = in["params"]["k1"].get<double>();
    index.params_.b = in["params"]["b"].get<double>();
    index.avgdl_ = in["avgdl"].get<double>();
    index.doc_ids_ = in["doc_ids"].get<std::vector<std::string>>();
    index.doc_lengths_ = in["doc_lengths"].get<std::vector<std::uint32_t>>();
    for (const auto& [term, arr] : in["postings"].items()) {
        auto& plist = index.postings_[term];
        for (const auto& p : arr)
            plist.push_back({p[0].get<std::uint32_t>(), p[1].get<std::uint32_t>()});
    }
    if (index.doc_ids_.size() != in["n"].get<std::size_t>())
        throw std::runtime_error("index file is inconsistent: " + path.string());
    return index;
}

}  // namespace ps
