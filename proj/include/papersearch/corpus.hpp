#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "papersearch/types.hpp"

namespace ps {

// Raised for malformed or invalid input files; the message names the
// offending line or field.
struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An ingested corpus: documents persisted to a storage directory plus the
// aggregate stats BM25 needs. Read access is const and thread-safe after
// ingestion; ingestion itself is single-writer.
class CorpusStore {
public:
    // Parse a line-delimited record file (fields: id + contents, or
    // id + title + text), canonicalize each record to a Document, and
    // persist everything under `storage_dir`. Duplicate ids and
    // malformed lines raise IngestError naming the problem.
    static CorpusStore ingest(const std::filesystem::path& corpus_file,
                              const std::filesystem::path& storage_dir);

    // Reopen a previously ingested store.
    static CorpusStore open(const std::filesystem::path& storage_dir);

    // In-memory store (no storage dir) over already-canonical documents.
    // Duplicate ids raise IngestError.
    static CorpusStore from_documents(std::vector<Document> docs);

    std::optional<Document> get(const std::string& id) const;
    const Document& at(const std::string& id) const;  // throws on unknown id

    const std::vector<Document>& documents() const { return docs_; }
    std::size_t size() const { return docs_.size(); }
    double avgdl() const { return avgdl_; }
    const std::filesystem::path& storage_path() const { return storage_dir_; }

private:
    CorpusStore() = default;
    void index_ids();

    std::vector<Document> docs_;
    std::vector<std::size_t> order_by_id_;  // doc indices sorted by id
    double avgdl_ = 0.0;
    std::filesystem::path storage_dir_;
};

// QA dataset I/O in the line-delimited record format. Every record is
// validated against the QASample invariants (nonempty golden answers,
// category in the closed ten-label set).
std::vector<QASample> load_qa_dataset(const std::filesystem::path& path);
void save_qa_dataset(const std::vector<QASample>& samples,
                     const std::filesystem::path& path);

// Random unstratified split. |test| = round(test_fraction * N);
// deterministic under a fixed seed.
struct DatasetSplit {
    std::vector<QASample> train;
    std::vector<QASample> test;
};
DatasetSplit split_dataset(const std::vector<QASample>& samples,
                           double test_fraction, std::uint64_t seed);

}  // namespace ps
