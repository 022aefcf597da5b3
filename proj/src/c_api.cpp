#include "papersearch/papersearch.h"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "papersearch/bm25.hpp"
#include "papersearch/corpus.hpp"
#include "papersearch/datagen.hpp"
#include "papersearch/eval.hpp"
#include "papersearch/retrieval_service.hpp"
#include "papersearch/rollout.hpp"
#include "papersearch/toy.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename Fn>
ps_status wrap(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return PS_OK;
    } catch (const ps::IngestError& e) {
        g_last_error = e.what();
        return PS_ERR_INGEST;
    } catch (const ps::TransportError& e) {
        g_last_error = e.what();
        return PS_ERR_TRANSPORT;
    } catch (const ps::ProtocolError& e) {
        g_last_error = e.what();
        return PS_ERR_PROTOCOL;
    } catch (const ps::DecodeError& e) {
        g_last_error = e.what();
        return PS_ERR_DECODE;
    } catch (const json::exception& e) {
        g_last_error = e.what();
        return PS_ERR_INVALID_ARGUMENT;
    } catch (const std::filesystem::filesystem_error& e) {
        g_last_error = e.what();
        return PS_ERR_IO;
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return PS_ERR_INVALID_ARGUMENT;
    } catch (const std::logic_error& e) {
        g_last_error = e.what();
        return PS_ERR_INVALID_ARGUMENT;
    } catch (const std::runtime_error& e) {
        g_last_error = e.what();
        return PS_ERR_IO;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return PS_ERR_INTERNAL;
    }
}

void require(bool cond, const std::string& message) {
    if (!cond) throw std::invalid_argument(message);
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const char* where) {
    require(obj.is_object(), std::string(where) + " config must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        require(known, std::string("unknown ") + where + " config field: " + key);
    }
}

ps::EpisodeLimits parse_limits(const json& config) {
    ps::EpisodeLimits limits;
    if (!config.contains("limits")) return limits;
    const json& l = config["limits"];
    check_keys(l, {"max_turns", "max_tokens_per_turn", "max_total_tokens"},
               "limits");
    limits.max_turns = l.value("max_turns", limits.max_turns);
    limits.max_tokens_per_turn =
        l.value("max_tokens_per_turn", limits.max_tokens_per_turn);
    limits.max_total_tokens =
        l.value("max_total_tokens", limits.max_total_tokens);
    return limits;
}

// Retriever spec: {"corpus_dir":..., "index_path":...} for in-process
// BM25, {"endpoint":...} for the HTTP client.
struct RetrieverBundle {
    std::unique_ptr<ps::CorpusStore> corpus;
    std::unique_ptr<ps::Bm25Index> index;
    std::unique_ptr<ps::Retriever> retriever;
};

RetrieverBundle make_retriever(const json& spec) {
    check_keys(spec, {"corpus_dir", "index_path", "endpoint"}, "retriever");
    RetrieverBundle bundle;
    if (spec.contains("endpoint")) {
        bundle.retriever = std::make_unique<ps::HttpRetriever>(
            spec["endpoint"].get<std::string>());
        return bundle;
    }
    require(spec.contains("corpus_dir") && spec.contains("index_path"),
            "retriever needs either 'endpoint' or 'corpus_dir'+'index_path'");
    bundle.corpus = std::make_unique<ps::CorpusStore>(
        ps::CorpusStore::open(spec["corpus_dir"].get<std::string>()));
    bundle.index = std::make_unique<ps::Bm25Index>(
        ps::Bm25Index::load(spec["index_path"].get<std::string>()));
    bundle.retriever =
        std::make_unique<ps::LocalRetriever>(*bundle.index, *bundle.corpus);
    return bundle;
}

const char* terminal_name(ps::Terminal t) {
    switch (t) {
        case ps::Terminal::running: return "running";
        case ps::Terminal::answered: return "answered";
        case ps::Terminal::turn_limit: return "turn_limit";
        case ps::Terminal::length_limit: return "length_limit";
        case ps::Terminal::malformed: return "malformed";
    }
    return "running";
}

std::atomic<bool> g_stop_requested{false};
void on_stop_signal(int) { g_stop_requested.store(true); }

}  // namespace

struct ps_corpus {
    ps::CorpusStore store;
};
struct ps_index {
    ps::Bm25Index index;
};
struct ps_server {
    std::unique_ptr<ps::RetrievalServer> server;
};

extern "C" {

const char* ps_last_error(void) { return g_last_error.c_str(); }

void ps_string_free(char* s) { std::free(s); }

ps_status ps_corpus_ingest(const char* corpus_file, const char* storage_dir,
                           ps_corpus** out) {
    return wrap([&] {
        require(corpus_file && storage_dir && out, "null argument");
        *out = new ps_corpus{ps::CorpusStore::ingest(corpus_file, storage_dir)};
    });
}

ps_status ps_corpus_open(const char* storage_dir, ps_corpus** out) {
    return wrap([&] {
        require(storage_dir && out, "null argument");
        *out = new ps_corpus{ps::CorpusStore::open(storage_dir)};
    });
}

void ps_corpus_free(ps_corpus* corpus) { delete corpus; }

size_t ps_corpus_size(const ps_corpus* corpus) {
    return corpus ? corpus->store.size() : 0;
}

double ps_corpus_avgdl(const ps_corpus* corpus) {
    return corpus ? corpus->store.avgdl() : 0.0;
}

ps_status ps_index_build(const ps_corpus* corpus, double k1, double b,
                         ps_index** out) {
    return wrap([&] {
        require(corpus && out, "null argument");
        *out = new ps_index{ps::Bm25Index::build(corpus->store, {k1, b})};
    });
}

ps_status ps_index_save(const ps_index* index, const char* path) {
    return wrap([&] {
        require(index && path, "null argument");
        index->index.save(path);
    });
}

ps_status ps_index_load(const char* path, ps_index** out) {
    return wrap([&] {
        require(path && out, "null argument");
        *out = new ps_index{ps::Bm25Index::load(path)};
    });
}

void ps_index_free(ps_index* index) { delete index; }

size_t ps_index_doc_count(const ps_index* index) {
    return index ? index->index.doc_count() : 0;
}

ps_status ps_index_search(const ps_index* index, const char* query,
                          size_t topk, char** out_json) {
    return wrap([&] {
        require(index && query && out_json, "null argument");
        json hits = json::array();
        for (const auto& hit : index->index.search(query, topk)) {
            hits.push_back({{"id", hit.doc_id},
                            {"score", hit.score},
                            {"rank", hit.rank}});
        }
        *out_json = dup_string(hits.dump(2));
    });
}

ps_status ps_server_start(const ps_index* index, const ps_corpus* corpus,
                          const char* host, int port, size_t default_topk,
                          size_t max_topk, size_t max_batch, ps_server** out) {
    return wrap([&] {
        require(index && corpus && out, "null argument");
        ps::ServiceConfig config;
        if (host) config.host = host;
        config.port = port;
        if (default_topk) config.default_topk = default_topk;
        if (max_topk) config.max_topk = max_topk;
        if (max_batch) config.max_batch = max_batch;
        auto server = std::make_unique<ps::RetrievalServer>(
            index->index, corpus->store, config);
        if (!server->start())
            throw ps::TransportError("cannot bind " + config.host + ":" +
                                     std::to_string(config.port));
        *out = new ps_server{std::move(server)};
    });
}

int ps_server_port(const ps_server* server) {
    return server ? server->server->port() : 0;
}

ps_status ps_server_wait(ps_server* server) {
    return wrap([&] {
        require(server, "null argument");
        g_stop_requested.store(false);
        std::signal(SIGINT, on_stop_signal);
        std::signal(SIGTERM, on_stop_signal);
        while (!g_stop_requested.load())
            std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server->server->stop();
    });
}

void ps_server_free(ps_server* server) { delete server; }

ps_status ps_datagen_run(const char* config_json, char** out_report_json) {
    return wrap([&] {
        require(config_json && out_report_json, "null argument");
        const json config = json::parse(config_json);
        check_keys(config,
                   {"corpus_dir", "llm", "n_abstracts", "paraphrase_fraction",
                    "seed", "out_dataset"},
                   "datagen");
        require(config.contains("corpus_dir") && config.contains("llm") &&
                    config.contains("n_abstracts"),
                "datagen config needs 'corpus_dir', 'llm', 'n_abstracts'");

        const ps::CorpusStore corpus =
            ps::CorpusStore::open(config["corpus_dir"].get<std::string>());
        const auto llm =
            ps::make_llm_client(config["llm"].get<std::string>());
        const ps::PipelineResult result = ps::run_pipeline(
            corpus, config["n_abstracts"].get<std::size_t>(), *llm,
            config.value("paraphrase_fraction", 0.5),
            config.value("seed", std::uint64_t{0}));

        if (config.contains("out_dataset"))
            ps::save_qa_dataset(result.samples,
                                config["out_dataset"].get<std::string>());

        json per_category = json::object();
        for (const auto& [cat, n] : result.stats.per_category)
            per_category[cat] = n;
        json rejections = json::object();
        for (const auto& [rule, n] : result.stats.rejections_by_rule)
            rejections[rule] = n;
        *out_report_json = dup_string(
            json{{"abstracts_sampled", result.stats.abstracts_sampled},
                 {"abstracts_skipped", result.stats.abstracts_skipped},
                 {"candidates_prefilter", result.stats.candidates_prefilter},
                 {"emitted", result.stats.emitted},
                 {"paraphrased", result.stats.paraphrased},
                 {"per_category", std::move(per_category)},
                 {"rejections_by_rule", std::move(rejections)},
                 {"diagnostics", result.stats.diagnostics}}
                .dump(2));
    });
}

ps_status ps_rollout_run(const char* config_json, char** out_report_json) {
    return wrap([&] {
        require(config_json && out_report_json, "null argument");
        const json config = json::parse(config_json);
        check_keys(config,
                   {"dataset", "policy", "topk", "group_size", "seed",
                    "limits", "retriever", "out_traces"},
                   "rollout");
        require(config.contains("dataset") && config.contains("policy") &&
                    config.contains("topk") && config.contains("retriever"),
                "rollout config needs 'dataset', 'policy', 'topk', 'retriever'");

        const auto dataset =
            ps::load_qa_dataset(config["dataset"].get<std::string>());
        const auto policy =
            ps::make_policy(config["policy"].get<std::string>());
        RetrieverBundle retriever = make_retriever(config["retriever"]);
        const auto topk = config["topk"].get<std::size_t>();
        const int group_size = config.value("group_size", 1);
        const ps::EpisodeLimits limits = parse_limits(config);

        std::filesystem::path traces_dir;
        if (config.contains("out_traces")) {
            traces_dir = config["out_traces"].get<std::string>();
            std::filesystem::create_directories(traces_dir);
        }
        auto dump = [&](const std::string& name,
                        const ps::Trajectory& trajectory) {
            if (traces_dir.empty()) return;
            std::ofstream out(traces_dir / (name + ".trace"));
            out << ps::serialize_trajectory(trajectory);
        };

        json episodes = json::array();
        double total = 0.0;
        std::size_t count = 0;
        for (const auto& sample : dataset) {
            if (group_size >= 2) {
                const ps::EpisodeGroup group =
                    ps::run_group(*policy, *retriever.retriever, sample,
                                  group_size, limits, topk);
                for (std::size_t i = 0; i < group.episodes.size(); ++i) {
                    const auto& ep = group.episodes[i];
                    episodes.push_back(
                        {{"id", sample.id},
                         {"reward", ep.outcome.reward},
                         {"terminal", terminal_name(ep.trajectory.terminal)},
                         {"advantage", group.advantages[i]},
                         {"error", ep.error}});
                    dump(sample.id + "-g" + std::to_string(i), ep.trajectory);
                    total += ep.outcome.reward;
                    ++count;
                }
            } else {
                const ps::EpisodeResult ep = ps::run_episode(
                    *policy, *retriever.retriever, sample, limits, topk);
                episodes.push_back(
                    {{"id", sample.id},
                     {"reward", ep.outcome.reward},
                     {"terminal", terminal_name(ep.trajectory.terminal)},
                     {"error", ep.error}});
                dump(sample.id, ep.trajectory);
                total += ep.outcome.reward;
                ++count;
            }
        }
        *out_report_json = dup_string(
            json{{"episodes", std::move(episodes)},
                 {"group_size", group_size},
                 {"mean_reward", count ? total / static_cast<double>(count) : 0.0}}
                .dump(2));
    });
}

ps_status ps_train_toy(const char* config_json, char** out_report_json) {
    return wrap([&] {
        require(config_json && out_report_json, "null argument");
        const json config = json::parse(config_json);
        check_keys(config,
                   {"n_docs", "n_questions", "env_seed", "seed", "steps",
                    "questions_per_step", "epochs_per_step", "learning_rate",
                    "group_size", "clip_eps", "kl_coeff", "adv_eps", "topk",
                    "eval_episodes", "checkpoint_out"},
                   "train-toy");

        const ps::ToyEnvironment env = ps::make_planted_environment(
            config.value("n_docs", std::size_t{200}),
            config.value("n_questions", std::size_t{50}),
            config.value("env_seed", std::uint64_t{1}));
        const ps::CorpusStore corpus =
            ps::CorpusStore::from_documents(env.documents);
        const ps::Bm25Index index = ps::Bm25Index::build(corpus);
        ps::LocalRetriever retriever(index, corpus);

        ps::ToyTrainConfig train;
        train.seed = config.value("seed", std::uint64_t{0});
        train.steps = config.value("steps", train.steps);
        train.questions_per_step =
            config.value("questions_per_step", train.questions_per_step);
        train.epochs_per_step =
            config.value("epochs_per_step", train.epochs_per_step);
        train.learning_rate = config.value("learning_rate", train.learning_rate);
        train.grpo.group_size = config.value("group_size", train.grpo.group_size);
        train.grpo.clip_eps = config.value("clip_eps", train.grpo.clip_eps);
        train.grpo.kl_coeff = config.value("kl_coeff", train.grpo.kl_coeff);
        train.grpo.adv_eps = config.value("adv_eps", train.grpo.adv_eps);
        train.topk = config.value("topk", train.topk);
        const int eval_episodes = config.value("eval_episodes", 200);

        ps::ToySoftmaxPolicy policy(ps::kToyVocab, 1);
        const double baseline = ps::evaluate_toy_policy(
            policy, env.questions, retriever, eval_episodes, train.seed + 1,
            train.limits, train.topk);
        const ps::ToyTrainReport report =
            ps::train_toy(policy, env.questions, retriever, train);
        const double final_eval = ps::evaluate_toy_policy(
            policy, env.questions, retriever, eval_episodes, train.seed + 2,
            train.limits, train.topk);

        if (config.contains("checkpoint_out"))
            policy.save_checkpoint(config["checkpoint_out"].get<std::string>(),
                                   static_cast<std::uint64_t>(report.steps_run),
                                   train.seed);

        *out_report_json = dup_string(
            json{{"seed", report.seed},
                 {"steps_run", report.steps_run},
                 {"mean_reward_per_step", report.mean_reward_per_step},
                 {"final_mean_reward", report.final_mean_reward},
                 {"baseline_eval_reward", baseline},
                 {"final_eval_reward", final_eval},
                 {"diverged", report.diverged},
                 {"divergence_detail", report.divergence_detail}}
                .dump(2));
    });
}

ps_status ps_eval_run(const char* config_json, char** out_report_json) {
    return wrap([&] {
        require(config_json && out_report_json, "null argument");
        const json config = json::parse(config_json);
        check_keys(config,
                   {"mode", "dataset", "policy", "topk", "seed", "limits",
                    "retriever", "traces_dir"},
                   "eval");
        require(config.contains("mode") && config.contains("dataset") &&
                    config.contains("policy"),
                "eval config needs 'mode', 'dataset', 'policy'");

        ps::EvalConfig eval;
        const auto mode =
            ps::parse_eval_mode(config["mode"].get<std::string>());
        require(mode.has_value(),
                "mode must be one of direct, cot, rag, agent");
        eval.mode = *mode;
        eval.topk = config.value("topk", std::size_t{0});
        eval.seed = config.value("seed", std::uint64_t{0});
        eval.limits = parse_limits(config);

        const auto dataset =
            ps::load_qa_dataset(config["dataset"].get<std::string>());
        const auto policy =
            ps::make_policy(config["policy"].get<std::string>());
        RetrieverBundle retriever;
        if (config.contains("retriever"))
            retriever = make_retriever(config["retriever"]);

        const ps::EvalReport report =
            ps::run_eval(eval, dataset, *policy, retriever.retriever.get());
        if (config.contains("traces_dir"))
            ps::dump_traces(report, config["traces_dir"].get<std::string>());
        *out_report_json = dup_string(ps::report_to_json(report));
    });
}

ps_status ps_report_format(const char* report_json, char** out_text) {
    return wrap([&] {
        require(report_json && out_text, "null argument");
        *out_text = dup_string(
            ps::format_report(ps::report_from_json(report_json)));
    });
}

}  // extern "C"
