#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "papersearch/bm25.hpp"
#include "papersearch/corpus.hpp"
#include "papersearch/retrieval_service.hpp"
#include "papersearch/rollout.hpp"

using namespace ps;

namespace {

CorpusStore fixture_corpus() {
    return CorpusStore::from_documents(
        {{"d1", "", "", "Gene Therapy Review\nanswer: HBB is discussed"},
         {"d2", "", "", "Protein Folding\nunrelated body"},
         {"d3", "", "", "Therapy Outcomes\ngene therapy outcomes"}});
}

QASample hbb_sample() {
    QASample s;
    s.id = "q1";
    s.question = "What gene is mutated in sickle cell anemia?";
    s.golden_answers = {"HBB"};
    return s;
}

struct ThrowingRetriever final : Retriever {
    std::vector<RetrievedDoc> retrieve(const std::string&, std::size_t) override {
        throw TransportError("connection refused");
    }
};

// Correct answer on selected episode indices, wrong elsewhere.
struct AlternatingPolicy final : PolicyClient {
    std::vector<bool> correct;
    int episode = -1;
    void begin_episode(const QASample&) override { ++episode; }
    std::string generate(const GenerationRequest&) override {
        return correct[static_cast<std::size_t>(episode) % correct.size()]
                   ? "<answer> HBB </answer>"
                   : "<answer> TP53 </answer>";
    }
};

}  // namespace

TEST_CASE("immediate answer: graded without touching retrieval") {
    const CorpusStore corpus = fixture_corpus();
    const Bm25Index index = Bm25Index::build(corpus);
    LocalRetriever local(index, corpus);
    CountingRetriever counting(&local);
    FixedAnswerPolicy policy("HBB");

    const EpisodeResult result =
        run_episode(policy, counting, hbb_sample(), {}, 3);
    CHECK(result.trajectory.terminal == Terminal::answered);
    CHECK(result.outcome.reward == 1);
    CHECK(counting.calls() == 0);
    CHECK(result.error.empty());
    REQUIRE(result.trajectory.segments.size() == 2);
    CHECK(result.trajectory.segments[0].origin == SegmentOrigin::prompt);
    CHECK(result.trajectory.segments[1].origin == SegmentOrigin::generated);
}

TEST_CASE("search then answer: one injected block, reward 1") {
    const CorpusStore corpus = fixture_corpus();
    const Bm25Index index = Bm25Index::build(corpus);
    LocalRetriever local(index, corpus);
    CountingRetriever counting(&local);
    ScriptedPolicy policy({"<think>look</think><search>gene therapy</search>",
                           "<answer> HBB </answer>"});

    const EpisodeResult result =
        run_episode(policy, counting, hbb_sample(), {}, 2);
    CHECK(result.trajectory.terminal == Terminal::answered);
    CHECK(result.outcome.reward == 1);
    CHECK(counting.calls() == 1);

    REQUIRE(result.trajectory.segments.size() == 4);
    const Segment& injected = result.trajectory.segments[2];
    CHECK(injected.origin == SegmentOrigin::injected);
    CHECK(injected.text.find("<information>") != std::string::npos);
    CHECK(injected.text.find("(Title: Gene Therapy Review)") !=
          std::string::npos);
}

TEST_CASE("generation past a stop sequence is cut at the stop") {
    const CorpusStore corpus = fixture_corpus();
    const Bm25Index index = Bm25Index::build(corpus);
    LocalRetriever local(index, corpus);
    ScriptedPolicy policy(
        {"<search>gene</search><answer>leak</answer> trailing",
         "<answer> HBB </answer>"});

    const EpisodeResult result =
        run_episode(policy, local, hbb_sample(), {}, 2);
    // The first generation ends at </search>; the leaked answer never
    // reaches the trajectory.
    CHECK(result.trajectory.segments[1].text == "<search>gene</search>");
    CHECK(result.trajectory.terminal == Terminal::answered);
    CHECK(result.outcome.reward == 1);
    CHECK(result.outcome.extracted == "HBB");
}

TEST_CASE("never answering hits the turn limit; retrievals never exceed it") {
    const CorpusStore corpus = fixture_corpus();
    const Bm25Index index = Bm25Index::build(corpus);
    LocalRetriever local(index, corpus);
    CountingRetriever counting(&local);
    ScriptedPolicy policy({"<search>gene</search>", "<search>therapy</search>",
                           "<search>protein</search>", "<search>gene</search>",
                           "<search>gene</search>", "<search>gene</search>"});
    EpisodeLimits limits;
    limits.max_turns = 2;

    const EpisodeResult result =
        run_episode(policy, counting, hbb_sample(), limits, 2);
    CHECK(result.trajectory.terminal == Terminal::turn_limit);
    CHECK(result.outcome.reward == 0);
    CHECK(counting.calls() == 2);
}

TEST_CASE("token budgets end the episode as a length limit") {
    const CorpusStore corpus = fixture_corpus();
    const Bm25Index index = Bm25Index::build(corpus);
    LocalRetriever local(index, corpus);
    ScriptedPolicy policy({"w1 w2 w3 w4 w5 w6 w7 w8"});
    EpisodeLimits limits;
    limits.max_tokens_per_turn = 4;
    limits.max_total_tokens = 4;

    const EpisodeResult result =
        run_episode(policy, local, hbb_sample(), limits, 2);
    CHECK(result.trajectory.terminal == Terminal::length_limit);
    CHECK(result.outcome.reward == 0);
    // The over-budget generation was truncated to the per-turn cap.
    CHECK(whitespace_tokenize(result.trajectory.segments[1].text).size() == 4);
}

TEST_CASE("tagless output is malformed with reward 0") {
    const CorpusStore corpus = fixture_corpus();
    const Bm25Index index = Bm25Index::build(corpus);
    LocalRetriever local(index, corpus);
    ScriptedPolicy policy({"no tags at all"});

    const EpisodeResult result =
        run_episode(policy, local, hbb_sample(), {}, 2);
    CHECK(result.trajectory.terminal == Terminal::malformed);
    CHECK(result.outcome.reward == 0);
}

TEST_CASE("transport failures end the episode, never propagate") {
    ThrowingRetriever retriever;
    ScriptedPolicy policy({"<search>gene</search>", "<answer>HBB</answer>"});

    const EpisodeResult result =
        run_episode(policy, retriever, hbb_sample(), {}, 2);
    CHECK(result.trajectory.terminal == Terminal::malformed);
    CHECK(result.outcome.reward == 0);
    CHECK(result.error.find("connection refused") != std::string::npos);
}

TEST_CASE("episodes replay byte-identically") {
    const CorpusStore corpus = fixture_corpus();
    const Bm25Index index = Bm25Index::build(corpus);
    LocalRetriever local(index, corpus);
    ScriptedPolicy policy({"<search>gene therapy</search>",
                           "<answer> HBB </answer>"});

    const EpisodeResult a = run_episode(policy, local, hbb_sample(), {}, 2);
    const EpisodeResult b = run_episode(policy, local, hbb_sample(), {}, 2);
    CHECK(serialize_trajectory(a.trajectory) ==
          serialize_trajectory(b.trajectory));
    CHECK(a.outcome.reward == b.outcome.reward);
}

TEST_CASE("run_group normalizes rewards into advantages") {
    const CorpusStore corpus = fixture_corpus();
    const Bm25Index index = Bm25Index::build(corpus);
    LocalRetriever local(index, corpus);
    AlternatingPolicy policy;
    policy.correct = {true, false, false, true};

    const EpisodeGroup group =
        run_group(policy, local, hbb_sample(), 4, {}, 2);
    CHECK(group.rewards == std::vector<double>{1, 0, 0, 1});
    CHECK(group.advantages == std::vector<double>{1, -1, -1, 1});
    CHECK(group.episodes.size() == 4);

    CHECK_THROWS_AS(run_group(policy, local, hbb_sample(), 1, {}, 2),
                    std::invalid_argument);
}

TEST_CASE("extractive policy copies the first answer entity in its prompt") {
    ExtractivePolicy policy;
    GenerationRequest req;
    req.prompt = "Doc 1 (Title: T) body with answer: HBB, more text";
    CHECK(policy.generate(req) == "<answer> HBB </answer>");
    req.prompt = "nothing useful here";
    CHECK(policy.generate(req) == "<answer> unknown </answer>");
}

TEST_CASE("make_policy resolves every documented spec") {
    CHECK(make_policy("fixed:HBB")->generate({}) == "<answer> HBB </answer>");
    CHECK(make_policy("extractive")->generate({"no answers", {}, 8}) ==
          "<answer> unknown </answer>");
    CHECK_THROWS_AS(make_policy("bogus:x"), std::invalid_argument);
    CHECK_THROWS_AS(make_policy("script:/nonexistent/file.json"),
                    std::invalid_argument);

    const auto dir = std::filesystem::temp_directory_path() / "ps_test_rollout";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "script.json")
        << R"(["<answer> HBB </answer>"])";
    auto scripted = make_policy("script:" + (dir / "script.json").string());
    scripted->begin_episode(hbb_sample());
    CHECK(scripted->generate({}) == "<answer> HBB </answer>");
}
