// ps: command-line front end. All functionality lives behind the C API;
// this file only resolves configuration and forwards it.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "papersearch/papersearch.h"

using nlohmann::json;

namespace {

[[noreturn]] void die(const char* stage, ps_status status) {
    std::cerr << "error [" << stage << "]: " << ps_last_error()
              << " (status " << static_cast<int>(status) << ")\n";
    std::exit(1);
}

void check(const char* stage, ps_status status) {
    if (status != PS_OK) die(stage, status);
}

std::string take(char* s) {
    std::string out = s ? s : "";
    ps_string_free(s);
    return out;
}

void log_config(const std::string& subcommand, const json& resolved) {
    std::cerr << "[" << subcommand << "] config: " << resolved.dump() << "\n";
}

void write_or_print(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text << "\n";
        return;
    }
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "error: cannot write " << out_path << "\n";
        std::exit(1);
    }
    out << text << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"papersearch: BM25 retrieval, search-agent rollouts, and "
                 "exact-match QA evaluation"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Config file (TOML/INI); flags override it");

    // corpus ingest
    auto* corpus_cmd = app.add_subcommand("corpus", "Corpus management");
    corpus_cmd->require_subcommand(1);
    auto* ingest = corpus_cmd->add_subcommand("ingest", "Ingest a JSONL corpus");
    std::string ingest_input, ingest_out;
    ingest->add_option("--input", ingest_input, "JSONL corpus file")->required();
    ingest->add_option("--out", ingest_out, "Storage directory")->required();

    // index build
    auto* index_cmd = app.add_subcommand("index", "BM25 index management");
    index_cmd->require_subcommand(1);
    auto* build = index_cmd->add_subcommand("build", "Build a BM25 index");
    std::string build_corpus, build_out;
    double build_k1 = 1.2, build_b = 0.75;
    build->add_option("--corpus", build_corpus,
                      "Corpus store directory or raw JSONL file")->required();
    build->add_option("--out", build_out, "Index output path or directory")
        ->required();
    build->add_option("--k1", build_k1, "BM25 k1");
    build->add_option("--b", build_b, "BM25 b");

    // serve
    auto* serve = app.add_subcommand("serve", "Serve batched top-k retrieval");
    std::string serve_corpus, serve_index, serve_host = "127.0.0.1";
    int serve_port = 8000;
    std::size_t serve_topk = 0, serve_max_topk = 0, serve_max_batch = 0;
    serve->add_option("--corpus", serve_corpus, "Corpus store directory")
        ->required();
    serve->add_option("--index", serve_index, "Index file")->required();
    serve->add_option("--host", serve_host, "Bind host");
    serve->add_option("--port", serve_port, "Bind port (0 picks a free one)");
    serve->add_option("--topk", serve_topk, "Default topk");
    serve->add_option("--max-topk", serve_max_topk, "Maximum topk");
    serve->add_option("--max-batch", serve_max_batch, "Maximum batch size");

    // datagen run
    auto* datagen_cmd = app.add_subcommand("datagen", "QA dataset generation");
    datagen_cmd->require_subcommand(1);
    auto* datagen = datagen_cmd->add_subcommand("run", "Run the QA pipeline");
    std::string dg_corpus, dg_llm, dg_out, dg_report;
    std::size_t dg_n = 0;
    double dg_fraction = 0.5;
    std::uint64_t dg_seed = 0;
    datagen->add_option("--corpus", dg_corpus, "Corpus store directory")
        ->required();
    datagen->add_option("--llm", dg_llm, "LLM spec: fixture:<file> or http:<url>")
        ->envname("PS_LLM_ENDPOINT")->required();
    datagen->add_option("--n", dg_n, "Number of abstracts to sample")
        ->required();
    datagen->add_option("--paraphrase-fraction", dg_fraction,
                        "Fraction of questions to paraphrase");
    datagen->add_option("--seed", dg_seed, "RNG seed");
    datagen->add_option("--out", dg_out, "Dataset output (JSONL)");
    datagen->add_option("--report", dg_report, "Stats report output (JSON)");

    // shared retriever/limits flags for rollout and eval
    struct RetrieverFlags {
        std::string corpus, index, endpoint;
        json spec(const char* stage, bool required) const {
            if (!endpoint.empty()) return {{"endpoint", endpoint}};
            if (!corpus.empty() && !index.empty())
                return {{"corpus_dir", corpus}, {"index_path", index}};
            if (required) {
                std::cerr << "error [" << stage
                          << "]: need --endpoint or --corpus with --index\n";
                std::exit(1);
            }
            return nullptr;
        }
    };
    struct LimitFlags {
        int max_turns = 4, max_tokens_per_turn = 512, max_total_tokens = 4096;
        json to_json() const {
            return {{"max_turns", max_turns},
                    {"max_tokens_per_turn", max_tokens_per_turn},
                    {"max_total_tokens", max_total_tokens}};
        }
    };
    auto add_retriever_flags = [](CLI::App* cmd, RetrieverFlags& f) {
        cmd->add_option("--corpus", f.corpus, "Corpus store directory");
        cmd->add_option("--index", f.index, "Index file");
        cmd->add_option("--endpoint", f.endpoint, "Retrieval service endpoint")
            ->envname("PS_RETRIEVAL_ENDPOINT");
    };
    auto add_limit_flags = [](CLI::App* cmd, LimitFlags& f) {
        cmd->add_option("--max-turns", f.max_turns, "Injected blocks per episode");
        cmd->add_option("--max-tokens-per-turn", f.max_tokens_per_turn,
                        "Token budget per generation");
        cmd->add_option("--max-total-tokens", f.max_total_tokens,
                        "Token budget per episode");
    };

    // rollout
    auto* rollout = app.add_subcommand("rollout", "Run search-agent episodes");
    std::string ro_dataset, ro_policy, ro_traces, ro_report;
    std::size_t ro_topk = 0;
    int ro_group = 1;
    std::uint64_t ro_seed = 0;
    RetrieverFlags ro_retriever;
    LimitFlags ro_limits;
    rollout->add_option("--dataset", ro_dataset, "QA dataset (JSONL)")
        ->required();
    rollout->add_option("--policy", ro_policy,
                        "Policy spec: http:<url>, fixed:<answer>, extractive, "
                        "script:<file>, toy:<checkpoint>")->required();
    rollout->add_option("--topk", ro_topk, "Documents per search")->required();
    rollout->add_option("--group-size", ro_group, "Episodes per question");
    rollout->add_option("--seed", ro_seed, "RNG seed");
    rollout->add_option("--traces", ro_traces, "Trace output directory");
    rollout->add_option("--report", ro_report, "Report output (JSON)");
    add_retriever_flags(rollout, ro_retriever);
    add_limit_flags(rollout, ro_limits);

    // train-toy
    auto* train = app.add_subcommand(
        "train-toy", "GRPO training in the planted-answer environment");
    std::uint64_t tt_seed = 0, tt_env_seed = 1;
    int tt_steps = 300, tt_qps = 8, tt_epochs = 2, tt_group = 8;
    std::size_t tt_docs = 200, tt_questions = 50, tt_topk = 3;
    double tt_lr = 0.5, tt_clip = 0.2, tt_beta = 1e-3;
    std::string tt_checkpoint, tt_report;
    train->add_option("--seed", tt_seed, "Training RNG seed");
    train->add_option("--env-seed", tt_env_seed, "Environment seed");
    train->add_option("--steps", tt_steps, "Training steps");
    train->add_option("--questions-per-step", tt_qps, "Questions per step");
    train->add_option("--epochs-per-step", tt_epochs, "Update epochs per step");
    train->add_option("--group-size", tt_group, "Rollouts per question");
    train->add_option("--learning-rate", tt_lr, "Ascent step size");
    train->add_option("--clip-eps", tt_clip, "Ratio clip range");
    train->add_option("--kl-coeff", tt_beta, "KL penalty coefficient");
    train->add_option("--n-docs", tt_docs, "Planted corpus size");
    train->add_option("--n-questions", tt_questions, "Planted question count");
    train->add_option("--topk", tt_topk, "Documents per search");
    train->add_option("--checkpoint-out", tt_checkpoint, "Checkpoint output");
    train->add_option("--report", tt_report, "Report output (JSON)");

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a policy on a dataset");
    std::string ev_mode, ev_dataset, ev_policy, ev_traces, ev_out;
    std::size_t ev_topk = 0;
    std::uint64_t ev_seed = 0;
    RetrieverFlags ev_retriever;
    LimitFlags ev_limits;
    eval->add_option("--mode", ev_mode, "direct | cot | rag | agent")
        ->required()
        ->check(CLI::IsMember({"direct", "cot", "rag", "agent"}));
    eval->add_option("--dataset", ev_dataset, "QA dataset (JSONL)")->required();
    eval->add_option("--policy", ev_policy, "Policy spec")->required();
    auto* ev_topk_opt = eval->add_option("--topk", ev_topk,
                                         "Documents per retrieval (rag/agent)");
    eval->add_option("--seed", ev_seed, "RNG seed");
    eval->add_option("--traces", ev_traces, "Trace output directory");
    eval->add_option("--out", ev_out, "Report output (JSON); stdout otherwise");
    add_retriever_flags(eval, ev_retriever);
    add_limit_flags(eval, ev_limits);

    // report
    auto* report = app.add_subcommand("report", "Render an eval report");
    std::string rp_in;
    report->add_option("--in", rp_in, "Eval report (JSON)")->required();

    CLI11_PARSE(app, argc, argv);

    if (ingest->parsed()) {
        log_config("corpus ingest",
                   {{"input", ingest_input}, {"out", ingest_out}});
        ps_corpus* corpus = nullptr;
        check("corpus ingest",
              ps_corpus_ingest(ingest_input.c_str(), ingest_out.c_str(),
                               &corpus));
        std::cout << "ingested " << ps_corpus_size(corpus) << " documents into "
                  << ingest_out << " (avgdl " << ps_corpus_avgdl(corpus)
                  << ")\n";
        ps_corpus_free(corpus);
        return 0;
    }

    if (build->parsed()) {
        // A raw JSONL --corpus is ingested into <out dir>/store first.
        namespace fs = std::filesystem;
        std::string out_file = build_out;
        if (fs::is_directory(build_out) || build_out.back() == '/') {
            fs::create_directories(build_out);
            out_file = (fs::path(build_out) / "bm25.json").string();
        }
        log_config("index build", {{"corpus", build_corpus},
                                   {"out", out_file},
                                   {"k1", build_k1},
                                   {"b", build_b}});
        ps_corpus* corpus = nullptr;
        if (fs::is_regular_file(build_corpus)) {
            const std::string store =
                (fs::path(out_file).parent_path() / "store").string();
            check("corpus ingest",
                  ps_corpus_ingest(build_corpus.c_str(), store.c_str(),
                                   &corpus));
        } else {
            check("corpus open",
                  ps_corpus_open(build_corpus.c_str(), &corpus));
        }
        ps_index* index = nullptr;
        check("index build",
              ps_index_build(corpus, build_k1, build_b, &index));
        check("index save", ps_index_save(index, out_file.c_str()));
        std::cout << "indexed " << ps_index_doc_count(index)
                  << " documents -> " << out_file << "\n";
        ps_index_free(index);
        ps_corpus_free(corpus);
        return 0;
    }

    if (serve->parsed()) {
        log_config("serve", {{"corpus", serve_corpus},
                             {"index", serve_index},
                             {"host", serve_host},
                             {"port", serve_port}});
        ps_corpus* corpus = nullptr;
        ps_index* index = nullptr;
        check("corpus open", ps_corpus_open(serve_corpus.c_str(), &corpus));
        check("index load", ps_index_load(serve_index.c_str(), &index));
        ps_server* server = nullptr;
        check("serve",
              ps_server_start(index, corpus, serve_host.c_str(), serve_port,
                              serve_topk, serve_max_topk, serve_max_batch,
                              &server));
        std::cout << "serving http://" << serve_host << ":"
                  << ps_server_port(server) << " (Ctrl-C to stop)\n";
        check("serve", ps_server_wait(server));
        ps_server_free(server);
        ps_index_free(index);
        ps_corpus_free(corpus);
        return 0;
    }

    if (datagen->parsed()) {
        json config{{"corpus_dir", dg_corpus},
                    {"llm", dg_llm},
                    {"n_abstracts", dg_n},
                    {"paraphrase_fraction", dg_fraction},
                    {"seed", dg_seed}};
        if (!dg_out.empty()) config["out_dataset"] = dg_out;
        log_config("datagen run", config);
        char* out = nullptr;
        check("datagen run", ps_datagen_run(config.dump().c_str(), &out));
        write_or_print(take(out), dg_report);
        return 0;
    }

    if (rollout->parsed()) {
        json config{{"dataset", ro_dataset},
                    {"policy", ro_policy},
                    {"topk", ro_topk},
                    {"group_size", ro_group},
                    {"seed", ro_seed},
                    {"limits", ro_limits.to_json()},
                    {"retriever", ro_retriever.spec("rollout", true)}};
        if (!ro_traces.empty()) config["out_traces"] = ro_traces;
        log_config("rollout", config);
        char* out = nullptr;
        check("rollout", ps_rollout_run(config.dump().c_str(), &out));
        write_or_print(take(out), ro_report);
        return 0;
    }

    if (train->parsed()) {
        json config{{"seed", tt_seed},
                    {"env_seed", tt_env_seed},
                    {"steps", tt_steps},
                    {"questions_per_step", tt_qps},
                    {"epochs_per_step", tt_epochs},
                    {"group_size", tt_group},
                    {"learning_rate", tt_lr},
                    {"clip_eps", tt_clip},
                    {"kl_coeff", tt_beta},
                    {"n_docs", tt_docs},
                    {"n_questions", tt_questions},
                    {"topk", tt_topk}};
        if (!tt_checkpoint.empty()) config["checkpoint_out"] = tt_checkpoint;
        log_config("train-toy", config);
        char* out = nullptr;
        check("train-toy", ps_train_toy(config.dump().c_str(), &out));
        write_or_print(take(out), tt_report);
        return 0;
    }

    if (eval->parsed()) {
        const bool needs_topk = ev_mode == "rag" || ev_mode == "agent";
        if (needs_topk && ev_topk_opt->count() == 0) {
            std::cerr << "error [eval]: --topk is required for --mode "
                      << ev_mode << "\n"
                      << eval->help();
            return 1;
        }
        json config{{"mode", ev_mode},
                    {"dataset", ev_dataset},
                    {"policy", ev_policy},
                    {"topk", ev_topk},
                    {"seed", ev_seed},
                    {"limits", ev_limits.to_json()}};
        const json retriever = ev_retriever.spec("eval", needs_topk);
        if (!retriever.is_null()) config["retriever"] = retriever;
        if (!ev_traces.empty()) config["traces_dir"] = ev_traces;
        log_config("eval", config);
        char* out = nullptr;
        check("eval", ps_eval_run(config.dump().c_str(), &out));
        write_or_print(take(out), ev_out);
        return 0;
    }

    if (report->parsed()) {
        std::ifstream in(rp_in);
        if (!in) {
            std::cerr << "error [report]: cannot open " << rp_in << "\n";
            return 1;
        }
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        char* out = nullptr;
        check("report", ps_report_format(text.c_str(), &out));
        std::cout << take(out);
        return 0;
    }

    std::cerr << app.help();
    return 1;
}
