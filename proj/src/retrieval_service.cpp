#include "papersearch/retrieval_service.hpp"

#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace ps {
namespace {

using nlohmann::json;

struct ParsedEndpoint {
    std::string host;
    int port = 80;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
    std::string rest = endpoint;
    const auto scheme = rest.find("://");
    if (scheme != std::string::npos) rest = rest.substr(scheme + 3);
    while (!rest.empty() && rest.back() == '/') rest.pop_back();
    ParsedEndpoint out;
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) {
        out.host = rest;
    } else {
        out.host = rest.substr(0, colon);
        out.port = std::stoi(rest.substr(colon + 1));
    }
    if (out.host.empty())
        throw TransportError("invalid endpoint: " + endpoint);
    return out;
}

}  // namespace

struct RetrievalServer::Impl {
    const Bm25Index& index;
    const CorpusStore& corpus;
    ServiceConfig config;
    httplib::Server server;
    std::thread thread;
    int bound_port = 0;

    Impl(const Bm25Index& idx, const CorpusStore& corp, ServiceConfig cfg)
        : index(idx), corpus(corp), config(std::move(cfg)) {}
};

RetrievalServer::RetrievalServer(const Bm25Index& index,
                                 const CorpusStore& corpus,
                                 ServiceConfig config)
    : impl_(std::make_unique<Impl>(index, corpus, std::move(config))) {
    // SO_REUSEADDR only: binding an occupied port must fail so start()
    // can report it, which SO_REUSEPORT (httplib's default) would mask.
    impl_->server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR,
                   reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    impl_->server.Get("/health", [this](const httplib::Request&,
                                        httplib::Response& res) {
        json body{{"doc_count", impl_->index.doc_count()},
                  {"avgdl", impl_->index.avgdl()},
                  {"params",
                   {{"k1", impl_->index.params().k1},
                    {"b", impl_->index.params().b}}}};
        res.set_content(body.dump(), "application/json");
    });

    impl_->server.Post("/retrieve", [this](const httplib::Request& req,
                                           httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            res.status = 400;
            res.set_content(
                json{{"error", std::string("malformed body: ") + e.what()}}.dump(),
                "application/json");
            return;
        }
        try {
            if (!body.contains("queries") || !body["queries"].is_array() ||
                body["queries"].empty())
                throw std::invalid_argument("'queries' must be a nonempty list");
            const auto queries = body["queries"].get<std::vector<std::string>>();
            if (queries.size() > impl_->config.max_batch)
                throw std::invalid_argument(
                    "batch exceeds maximum of " +
                    std::to_string(impl_->config.max_batch));
            std::size_t topk = impl_->config.default_topk;
            if (body.contains("topk")) {
                if (!body["topk"].is_number_integer() ||
                    body["topk"].get<long long>() < 1)
                    throw std::invalid_argument("'topk' must be a positive integer");
                topk = body["topk"].get<std::size_t>();
            }
            if (topk > impl_->config.max_topk)
                throw std::invalid_argument(
                    "topk exceeds maximum of " +
                    std::to_string(impl_->config.max_topk));
            const bool return_scores = body.value("return_scores", false);

            const RetrieveResponse out =
                handle_retrieve(queries, topk, return_scores);
            json result = json::array();
            for (const auto& per_query : out.result) {
                json list = json::array();
                for (const auto& r : per_query) {
                    json entry{{"document",
                                {{"id", r.id}, {"contents", r.contents}}}};
                    if (r.score) entry["score"] = *r.score;
                    list.push_back(std::move(entry));
                }
                result.push_back(std::move(list));
            }
            res.set_content(json{{"result", std::move(result)}}.dump(),
                            "application/json");
        } catch (const std::invalid_argument& e) {
            res.status = 400;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(json{{"error", e.what()}}.dump(), "application/json");
        }
    });
}

RetrievalServer::~RetrievalServer() { stop(); }

RetrieveResponse RetrievalServer::handle_retrieve(
    const std::vector<std::string>& queries, std::size_t topk,
    bool return_scores) const {
    RetrieveResponse out;
    out.result.reserve(queries.size());
    for (const auto& query : queries) {
        std::vector<RetrieveResult> list;
        for (const auto& hit : impl_->index.search(query, topk)) {
            RetrieveResult r;
            r.id = hit.doc_id;
            r.contents = impl_->corpus.at(hit.doc_id).contents;
            if (return_scores) r.score = hit.score;
            list.push_back(std::move(r));
        }
        out.result.push_back(std::move(list));
    }
    return out;
}

bool RetrievalServer::start() {
    int port = impl_->config.port;
    if (port == 0) {
        port = impl_->server.bind_to_any_port(impl_->config.host);
        if (port < 0) return false;
    } else if (!impl_->server.bind_to_port(impl_->config.host, port)) {
        return false;
    }
    impl_->bound_port = port;
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return true;
}

void RetrievalServer::stop() {
    if (impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

int RetrievalServer::port() const { return impl_->bound_port; }

std::string RetrievalServer::endpoint() const {
    return "http://" + impl_->config.host + ":" + std::to_string(port());
}

std::string http_post_json(const std::string& endpoint, const std::string& path,
                           const std::string& body, int timeout_seconds) {
    const ParsedEndpoint ep = parse_endpoint(endpoint);
    httplib::Client client(ep.host, ep.port);
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);

    auto res = client.Post(path, body, "application/json");
    if (!res) {
        throw TransportError("cannot reach " + endpoint + path + ": " +
                             httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        std::string detail = res->body;
        try {
            detail = json::parse(res->body).value("error", res->body);
        } catch (const json::exception&) {
        }
        throw ProtocolError("server rejected " + path + " (status " +
                            std::to_string(res->status) + "): " + detail);
    }
    return res->body;
}

RetrieveResponse client_retrieve(const std::string& endpoint,
                                 const std::vector<std::string>& queries,
                                 std::size_t topk, bool return_scores,
                                 int timeout_seconds) {
    const json body{{"queries", queries},
                    {"topk", topk},
                    {"return_scores", return_scores}};
    const std::string raw =
        http_post_json(endpoint, "/retrieve", body.dump(), timeout_seconds);

    json parsed;
    try {
        parsed = json::parse(raw);
    } catch (const json::exception& e) {
        throw DecodeError(std::string("malformed response body: ") + e.what());
    }
    if (!parsed.contains("result") || !parsed["result"].is_array())
        throw DecodeError("response is missing field 'result'");

    RetrieveResponse out;
    for (const auto& per_query : parsed["result"]) {
        if (!per_query.is_array())
            throw DecodeError("field 'result' entries must be lists");
        std::vector<RetrieveResult> list;
        for (const auto& entry : per_query) {
            if (!entry.contains("document") ||
                !entry["document"].contains("id") ||
                !entry["document"].contains("contents"))
                throw DecodeError("result entry is missing field 'document'");
            RetrieveResult r;
            r.id = entry["document"]["id"].get<std::string>();
            r.contents = entry["document"]["contents"].get<std::string>();
            if (entry.contains("score")) r.score = entry["score"].get<double>();
            list.push_back(std::move(r));
        }
        out.result.push_back(std::move(list));
    }
    if (out.result.size() != queries.size())
        throw DecodeError("field 'result' length does not match query count");
    return out;
}

HealthInfo client_health(const std::string& endpoint, int timeout_seconds) {
    const ParsedEndpoint ep = parse_endpoint(endpoint);
    httplib::Client client(ep.host, ep.port);
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);

    auto res = client.Get("/health");
    if (!res)
        throw TransportError("cannot reach " + endpoint + "/health: " +
                             httplib::to_string(res.error()));
    if (res->status != 200)
        throw ProtocolError("health check failed with status " +
                            std::to_string(res->status));
    try {
        json parsed = json::parse(res->body);
        HealthInfo info;
        info.doc_count = parsed.at("doc_count").get<std::size_t>();
        info.avgdl = parsed.at("avgdl").get<double>();
        info.params.k1 = parsed.at("params").at("k1").get<double>();
        info.params.b = parsed.at("params").at("b").get<double>();
        return info;
    } catch (const json::exception& e) {
        throw DecodeError(std::string("malformed health body: ") + e.what());
    }
}

}  // namespace ps
