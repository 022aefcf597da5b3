#include "papersearch/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "papersearch/bm25.hpp"
#include "papersearch/reward.hpp"
#include "papersearch/rng.hpp"

namespace ps {
namespace {

using nlohmann::json;

constexpr int kStoreVersion = 1;

Document canonicalize(const json& rec, std::size_t line_no) {
    Document doc;
    if (!rec.contains("id") || !rec["id"].is_string())
        throw IngestError("line " + std::to_string(line_no) +
                          ": missing string field 'id'");
    doc.id = rec["id"].get<std::string>();
    if (rec.contains("contents")) {
        if (!rec["contents"].is_string())
            throw IngestError("line " + std::to_string(line_no) +
                              ": field 'contents' must be a string");
        doc.contents = rec["contents"].get<std::string>();
        auto nl = doc.contents.find('\n');
        doc.title = doc.contents.substr(0, nl);
        doc.body = nl == std::string::npos ? "" : doc.contents.substr(nl + 1);
    } else if (rec.contains("title") && rec.contains("text")) {
        if (!rec["title"].is_string() || !rec["text"].is_string())
            throw IngestError("line " + std::to_string(line_no) +
                              ": 'title' and 'text' must be strings");
        doc.title = rec["title"].get<std::string>();
        doc.body = rec["text"].get<std::string>();
        doc.contents = doc.title + "\n" + doc.body;
    } else {
        throw IngestError("line " + std::to_string(line_no) +
                          ": record needs 'contents' or 'title'+'text'");
    }
    return doc;
}

double mean_token_length(const std::vector<Document>& docs) {
    if (docs.empty()) return 0.0;
    double total = 0.0;
    for (const auto& d : docs) total += static_cast<double>(tokenize(d.contents).size());
    return total / static_cast<double>(docs.size());
}

}  // namespace

CorpusStore CorpusStore::ingest(const std::filesystem::path& corpus_file,
                                const std::filesystem::path& storage_dir) {
    std::ifstream in(corpus_file);
    if (!in) throw IngestError("cannot open corpus file: " + corpus_file.string());

    CorpusStore store;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw IngestError("line " + std::to_string(line_no) +
                              ": malformed record: " + e.what());
        }
        Document doc = canonicalize(rec, line_no);
        if (!seen.insert(doc.id).second)
            throw IngestError("duplicate document id: " + doc.id);
        store.docs_.push_back(std::move(doc));
    }
    store.avgdl_ = mean_token_length(store.docs_);
    store.storage_dir_ = storage_dir;
    store.index_ids();

    std::filesystem::create_directories(storage_dir);
    {
        std::ofstream out(storage_dir / "documents.jsonl");
        if (!out) throw IngestError("cannot write to " + storage_dir.string());
        for (const auto& d : store.docs_) {
            out << json{{"id", d.id}, {"contents", d.contents}}.dump() << "\n";
        }
    }
    {
        std::ofstream out(storage_dir / "manifest.json");
        out << json{{"version", kStoreVersion},
                    {"doc_count", store.docs_.size()},
                    {"avgdl", store.avgdl_}}
                   .dump(2)
            << "\n";
    }
    return store;
}

CorpusStore CorpusStore::open(const std::filesystem::path& storage_dir) {
    std::ifstream manifest(storage_dir / "manifest.json");
    if (!manifest)
        throw IngestError("not a corpus store (no manifest): " +
                          storage_dir.string());
    json m = json::parse(manifest);
    if (m.value("version", 0) != kStoreVersion)
        throw IngestError("unsupported store version in " + storage_dir.string());

    CorpusStore store;
    std::ifstream in(storage_dir / "documents.jsonl");
    if (!in) throw IngestError("missing documents.jsonl in " + storage_dir.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        store.docs_.push_back(canonicalize(json::parse(line), line_no));
    }
    store.avgdl_ = m.value("avgdl", 0.0);
    store.storage_dir_ = storage_dir;
    store.index_ids();
    if (store.docs_.size() != m.value("doc_count", std::size_t{0}))
        throw IngestError("manifest doc_count does not match documents.jsonl");
    return store;
}

CorpusStore CorpusStore::from_documents(std::vector<Document> docs) {
    CorpusStore store;
    std::unordered_set<std::string> seen;
    for (const auto& d : docs) {
        if (!seen.insert(d.id).second)
            throw IngestError("duplicate document id: " + d.id);
    }
    store.docs_ = std::move(docs);
    store.avgdl_ = mean_token_length(store.docs_);
    store.index_ids();
    return store;
}

void CorpusStore::index_ids() {
    order_by_id_.resize(docs_.size());
    for (std::size_t i = 0; i < docs_.size(); ++i) order_by_id_[i] = i;
    std::sort(order_by_id_.begin(), order_by_id_.end(),
              [&](std::size_t a, std::size_t b) { return docs_[a].id < docs_[b].id; });
}

std::optional<Document> CorpusStore::get(const std::string& id) const {
    auto it = std::lower_bound(
        order_by_id_.begin(), order_by_id_.end(), id,
        [&](std::size_t i, const std::string& key) { return docs_[i].id < key; });
    if (it == order_by_id_.end() || docs_[*it].id != id) return std::nullopt;
    return docs_[*it];
}

const Document& CorpusStore::at(const std::string& id) const {
    auto it = std::lower_bound(
        order_by_id_.begin(), order_by_id_.end(), id,
        [&](std::size_t i, const std::string& key) { return docs_[i].id < key; });
    if (it == order_by_id_.end() || docs_[*it].id != id)
        throw IngestError("unknown document id: " + id);
    return docs_[*it];
}

std::vector<QASample> load_qa_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open QA file: " + path.string());

    std::vector<QASample> samples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw IngestError("line " + std::to_string(line_no) +
                              ": malformed QA record: " + e.what());
        }
        QASample s;
        s.id = rec.value("id", "");
        s.question = rec.value("question", "");
        s.category = rec.value("category", "");
        s.source_doc_id = rec.value("source_doc_id", "");
        s.paraphrased = rec.value("paraphrased", false);
        if (!rec.contains("golden_answers") || !rec["golden_answers"].is_array())
            throw IngestError("line " + std::to_string(line_no) +
                              ": missing golden_answers list");
        for (const auto& g : rec["golden_answers"])
            s.golden_answers.push_back(g.get<std::string>());

        if (s.golden_answers.empty())
            throw IngestError("line " + std::to_string(line_no) +
                              ": golden_answers must be nonempty");
        std::unordered_set<std::string> normed;
        for (const auto& g : s.golden_answers) {
            if (!normed.insert(normalize_answer(g)).second)
                throw IngestError("line " + std::to_string(line_no) +
                                  ": duplicate golden answer after normalization: " + g);
        }
        if (!category_number(s.category))
            throw IngestError("line " + std::to_string(line_no) +
                              ": unknown category: " + s.category);
        samples.push_back(std::move(s));
    }
    return samples;
}

void save_qa_dataset(const std::vector<QASample>& samples,
                     const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IngestError("cannot write QA file: " + path.string());
    for (const auto& s : samples) {
        out << json{{"id", s.id},
                    {"question", s.question},
                    {"golden_answers", s.golden_answers},
                    {"category", s.category},
                    {"source_doc_id", s.source_doc_id},
                    {"paraphrased", s.paraphrased}}
                   .dump()
            << "\n";
    }
}

DatasetSplit split_dataset(const std::vector<QASample>& samples,
                           double test_fraction, std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction > 1.0)
        throw std::invalid_argument("test_fraction must be in [0,1]");

    const std::size_t n = samples.size();
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(n)));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<bool> is_test(n, false);
    for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;

    DatasetSplit split;
    for (std::size_t i = 0; i < n; ++i) {
        (is_test[i] ? split.test : split.train).push_back(samples[i]);
    }
    return split;
}

}  // namespace ps
