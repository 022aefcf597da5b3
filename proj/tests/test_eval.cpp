#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "papersearch/bm25.hpp"
#include "papersearch/corpus.hpp"
#include "papersearch/eval.hpp"
#include "papersearch/rng.hpp"

using namespace ps;

namespace {

// One document per question; the answer entity appears after "answer:"
// so the extractive policy can lift it out of retrieved text.
struct PlantedSet {
    CorpusStore corpus;
    std::vector<QASample> dataset;
};

PlantedSet make_planted_set(std::size_t n) {
    std::vector<Document> docs;
    std::vector<QASample> dataset;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string key = "fact" + std::to_string(i);
        const std::string entity = "ent" + std::to_string(i);
        docs.push_back({"d" + std::to_string(i), "", "",
                        "Topic " + key + "\nthe key answer: " + entity +
                            " appears here"});
        QASample s;
        s.id = "q" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        s.question = "Which entity relates to " + key + "?";
        s.golden_answers = {entity};
        s.category = std::string(category_label(static_cast<int>(i % 4) + 1));
        s.paraphrased = i % 3 == 0;
        dataset.push_back(std::move(s));
    }
    return {CorpusStore::from_documents(std::move(docs)), std::move(dataset)};
}

struct RecordingPolicy final : PolicyClient {
    std::vector<std::string> prompts;
    std::string reply = "<answer> unknown </answer>";
    std::string generate(const GenerationRequest& request) override {
        prompts.push_back(request.prompt);
        return reply;
    }
};

}  // namespace

TEST_CASE("mode names round trip") {
    for (const auto mode : {EvalMode::direct, EvalMode::cot, EvalMode::rag,
                            EvalMode::agent})
        CHECK(parse_eval_mode(eval_mode_name(mode)) == mode);
    CHECK_FALSE(parse_eval_mode("oracle").has_value());
}

TEST_CASE("overall accuracy is the plain mean of per-sample rewards") {
    PlantedSet set = make_planted_set(8);
    // Fixed answer matches exactly the two samples whose entity is ent3.
    for (auto& s : set.dataset) s.golden_answers = {"ent3"};
    set.dataset[0].golden_answers = {"other"};
    set.dataset[1].golden_answers = {"other"};
    set.dataset[5].golden_answers = {"other"};

    FixedAnswerPolicy policy("ent3");
    EvalConfig config;
    const EvalReport report = run_eval(config, set.dataset, policy, nullptr);
    CHECK(report.overall == 5.0 / 8.0);  // exact: small integer arithmetic
    CHECK(report.records.size() == 8);
}

TEST_CASE("split rows re-aggregate to the overall accuracy") {
    PlantedSet set = make_planted_set(12);
    for (std::size_t i = 0; i < set.dataset.size(); ++i)
        if (i % 5 != 0) set.dataset[i].golden_answers = {"miss"};
    FixedAnswerPolicy policy(set.dataset[0].golden_answers[0]);
    // All planted entities differ, so only index 0 can ever match; give
    // indices divisible by 5 the same golden answer.
    for (std::size_t i = 0; i < set.dataset.size(); i += 5)
        set.dataset[i].golden_answers = set.dataset[0].golden_answers;

    const EvalReport report = run_eval({}, set.dataset, policy, nullptr);
    for (const auto key : {SplitKey::category, SplitKey::paraphrased}) {
        const auto rows = split_report(report, key);
        std::size_t count = 0;
        double weighted = 0;
        for (const auto& row : rows) {
            count += row.count;
            weighted += row.accuracy * static_cast<double>(row.count);
        }
        CHECK(count == report.records.size());
        CHECK(std::abs(weighted / static_cast<double>(count) -
                       report.overall) < 1e-12);
    }
}

TEST_CASE("direct and cot modes never touch retrieval") {
    PlantedSet set = make_planted_set(4);
    const Bm25Index index = Bm25Index::build(set.corpus);
    LocalRetriever local(index, set.corpus);
    CountingRetriever counting(&local);
    RecordingPolicy policy;

    EvalConfig config;
    config.mode = EvalMode::direct;
    run_eval(config, set.dataset, policy, &counting);
    CHECK(counting.calls() == 0);
    CHECK(policy.prompts[0].find("Question: ") != std::string::npos);
    CHECK(policy.prompts[0].find("Think step by step") == std::string::npos);
    CHECK(policy.prompts[0].find("Doc 1") == std::string::npos);

    policy.prompts.clear();
    config.mode = EvalMode::cot;
    run_eval(config, set.dataset, policy, &counting);
    CHECK(counting.calls() == 0);
    CHECK(policy.prompts[0].find("Think step by step") != std::string::npos);
}

TEST_CASE("rag mode prepends retrieved docs and requires topk + retriever") {
    PlantedSet set = make_planted_set(4);
    const Bm25Index index = Bm25Index::build(set.corpus);
    LocalRetriever local(index, set.corpus);
    RecordingPolicy policy;

    EvalConfig config;
    config.mode = EvalMode::rag;
    CHECK_THROWS_AS(run_eval(config, set.dataset, policy, &local),
                    std::invalid_argument);  // topk missing
    config.topk = 2;
    CHECK_THROWS_AS(run_eval(config, set.dataset, policy, nullptr),
                    std::invalid_argument);  // retriever missing

    run_eval(config, set.dataset, policy, &local);
    CHECK(policy.prompts[0].find("Doc 1 (Title: Topic fact0)") !=
          std::string::npos);
    CHECK(policy.prompts[0].find("Question: Which entity relates to fact0?") !=
          std::string::npos);
}

TEST_CASE("planted set: extractive rag scores 1.0, direct scores 0") {
    PlantedSet set = make_planted_set(10);
    const Bm25Index index = Bm25Index::build(set.corpus);
    LocalRetriever local(index, set.corpus);
    ExtractivePolicy policy;

    EvalConfig rag;
    rag.mode = EvalMode::rag;
    rag.topk = 3;
    const EvalReport with_docs = run_eval(rag, set.dataset, policy, &local);
    CHECK(with_docs.overall == 1.0);

    const EvalReport without = run_eval({}, set.dataset, policy, nullptr);
    CHECK(without.overall == 0.0);
    CHECK(with_docs.overall >= without.overall);
}

TEST_CASE("agent mode runs full episodes through the retriever") {
    PlantedSet set = make_planted_set(3);
    const Bm25Index index = Bm25Index::build(set.corpus);
    LocalRetriever local(index, set.corpus);
    CountingRetriever counting(&local);
    FixedAnswerPolicy policy("ent1");

    EvalConfig config;
    config.mode = EvalMode::agent;
    config.topk = 2;
    const EvalReport report = run_eval(config, set.dataset, policy, &counting);
    CHECK(report.overall == doctest::Approx(1.0 / 3.0));
    CHECK(counting.calls() == 0);  // this policy answers immediately
    CHECK(report.records[1].trace.terminal == Terminal::answered);
}

TEST_CASE("per-sample failures score zero and record the error") {
    PlantedSet set = make_planted_set(3);
    struct FailingPolicy final : PolicyClient {
        int n = 0;
        std::string generate(const GenerationRequest&) override {
            if (++n == 2) throw std::runtime_error("backend hiccup");
            return "<answer> ent0 </answer>";
        }
    } policy;

    const EvalReport report = run_eval({}, set.dataset, policy, nullptr);
    CHECK(report.records[0].reward == 1);
    CHECK(report.records[1].reward == 0);
    CHECK(report.records[1].error.find("backend hiccup") != std::string::npos);
    CHECK(report.overall == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("report is invariant under dataset permutation") {
    PlantedSet set = make_planted_set(9);
    ExtractivePolicy policy;
    const Bm25Index index = Bm25Index::build(set.corpus);
    LocalRetriever local(index, set.corpus);

    EvalConfig config;
    config.mode = EvalMode::rag;
    config.topk = 2;
    const EvalReport a = run_eval(config, set.dataset, policy, &local);

    Rng rng(3);
    auto shuffled = set.dataset;
    rng.shuffle(shuffled);
    const EvalReport b = run_eval(config, shuffled, policy, &local);
    CHECK(report_to_json(a) == report_to_json(b));
}

TEST_CASE("report JSON round trip") {
    PlantedSet set = make_planted_set(5);
    ExtractivePolicy policy;
    const Bm25Index index = Bm25Index::build(set.corpus);
    LocalRetriever local(index, set.corpus);
    EvalConfig config;
    config.mode = EvalMode::rag;
    config.topk = 2;
    config.seed = 11;
    const EvalReport report = run_eval(config, set.dataset, policy, &local);

    const EvalReport loaded = report_from_json(report_to_json(report));
    CHECK(loaded.mode == "rag");
    CHECK(loaded.topk == 2);
    CHECK(loaded.seed == 11);
    CHECK(loaded.overall == report.overall);
    REQUIRE(loaded.records.size() == report.records.size());
    for (std::size_t i = 0; i < loaded.records.size(); ++i) {
        CHECK(loaded.records[i].id == report.records[i].id);
        CHECK(loaded.records[i].reward == report.records[i].reward);
        CHECK(loaded.records[i].extracted == report.records[i].extracted);
        CHECK(loaded.records[i].trace.segments.size() ==
              report.records[i].trace.segments.size());
        for (std::size_t s = 0; s < loaded.records[i].trace.segments.size(); ++s)
            CHECK(loaded.records[i].trace.segments[s].text ==
                  report.records[i].trace.segments[s].text);
    }
    // Serialization is stable.
    CHECK(report_to_json(loaded) == report_to_json(report));
}

TEST_CASE("dump_traces writes one annotated file per sample") {
    PlantedSet set = make_planted_set(3);
    FixedAnswerPolicy policy("ent0");
    const EvalReport report = run_eval({}, set.dataset, policy, nullptr);

    const auto dir = std::filesystem::temp_directory_path() / "ps_test_eval";
    std::filesystem::remove_all(dir);
    dump_traces(report, dir);
    for (const auto& record : report.records) {
        std::ifstream in(dir / (record.id + ".trace"));
        REQUIRE(in.good());
        const std::string text((std::istreambuf_iterator<char>(in)), {});
        CHECK(text.find("id: " + record.id) != std::string::npos);
        CHECK(text.find("reward: ") != std::string::npos);
        CHECK(text.find("question: ") != std::string::npos);
    }
}

TEST_CASE("format_report shows the header and both split tables") {
    PlantedSet set = make_planted_set(6);
    FixedAnswerPolicy policy("ent2");
    const EvalReport report = run_eval({}, set.dataset, policy, nullptr);
    const std::string text = format_report(report);
    CHECK(text.find("mode: direct") != std::string::npos);
    CHECK(text.find("overall accuracy:") != std::string::npos);
    CHECK(text.find("category") != std::string::npos);
    CHECK(text.find("paraphrase") != std::string::npos);
    CHECK(text.find("original") != std::string::npos);
}
