#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "papersearch/bm25.hpp"
#include "papersearch/corpus.hpp"

namespace ps {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8000;
    std::size_t default_topk = 3;
    std::size_t max_topk = 100;
    std::size_t max_batch = 512;
};

struct RetrieveResult {
    std::string id;
    std::string contents;
    std::optional<double> score;
};

struct RetrieveResponse {
    std::vector<std::vector<RetrieveResult>> result;  // one list per query
};

// Serves POST /retrieve and GET /health over a shared immutable index.
// Requests never mutate state, so any number may run concurrently.
class RetrievalServer {
public:
    RetrievalServer(const Bm25Index& index, const CorpusStore& corpus,
                    ServiceConfig config);
    ~RetrievalServer();
    RetrievalServer(const RetrievalServer&) = delete;
    RetrievalServer& operator=(const RetrievalServer&) = delete;

    // Binds and starts serving on a background thread. Returns false on
    // bind failure (e.g. occupied port).
    bool start();
    void stop();
    int port() const;
    std::string endpoint() const;  // http://host:port

    // Request handling, exposed directly so in-process callers and tests
    // reach the exact code path the HTTP route uses.
    RetrieveResponse handle_retrieve(const std::vector<std::string>& queries,
                                     std::size_t topk,
                                     bool return_scores) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Client-side error classes, kept distinct so callers can tell an
// unreachable server from a server-side rejection from a garbled body.
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DecodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct HealthInfo {
    std::size_t doc_count = 0;
    double avgdl = 0.0;
    Bm25Params params;
};

// Shared HTTP plumbing: POST a JSON body to endpoint+path and return the
// response body. Connection failures raise TransportError; non-2xx
// statuses raise ProtocolError with the server's message.
std::string http_post_json(const std::string& endpoint, const std::string& path,
                           const std::string& body, int timeout_seconds = 30);

RetrieveResponse client_retrieve(const std::string& endpoint,
                                 const std::vector<std::string>& queries,
                                 std::size_t topk, bool return_scores = true,
                                 int timeout_seconds = 30);
HealthInfo client_health(const std::string& endpoint,
                         int timeout_seconds = 30);

}  // namespace ps
