#include "papersearch/eval.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "papersearch/prompts.hpp"

namespace ps {
namespace {

using nlohmann::json;

std::string render_docs(const std::vector<RetrievedDoc>& docs) {
    std::string out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        const auto nl = docs[i].contents.find('\n');
        const std::string title = docs[i].contents.substr(0, nl);
        const std::string body =
            nl == std::string::npos ? "" : docs[i].contents.substr(nl + 1);
        out += "Doc " + std::to_string(i + 1) + " (Title: " + title + ") " +
               body + "\n";
    }
    return out;
}

const char* kOriginNames[] = {"prompt", "generated", "injected"};
const char* kTerminalNames[] = {"running", "answered", "turn_limit",
                                "length_limit", "malformed"};

json trajectory_to_json(const Trajectory& traj) {
    json segments = json::array();
    for (const auto& seg : traj.segments) {
        segments.push_back({{"origin", kOriginNames[static_cast<int>(seg.origin)]},
                            {"turn", seg.turn},
                            {"text", seg.text}});
    }
    return {{"question", traj.question},
            {"terminal", kTerminalNames[static_cast<int>(traj.terminal)]},
            {"segments", std::move(segments)}};
}

Trajectory trajectory_from_json(const json& j) {
    Trajectory traj;
    traj.question = j.value("question", "");
    const std::string terminal = j.value("terminal", "running");
    for (int i = 0; i < 5; ++i)
        if (terminal == kTerminalNames[i]) traj.terminal = static_cast<Terminal>(i);
    for (const auto& s : j.value("segments", json::array())) {
        Segment seg;
        seg.text = s.value("text", "");
        seg.turn = s.value("turn", 0);
        const std::string origin = s.value("origin", "generated");
        for (int i = 0; i < 3; ++i)
            if (origin == kOriginNames[i]) seg.origin = static_cast<SegmentOrigin>(i);
        traj.segments.push_back(std::move(seg));
    }
    return traj;
}

}  // namespace

std::string eval_mode_name(EvalMode mode) {
    switch (mode) {
        case EvalMode::direct: return "direct";
        case EvalMode::cot: return "cot";
        case EvalMode::rag: return "rag";
        case EvalMode::agent: return "agent";
    }
    return "direct";
}

std::optional<EvalMode> parse_eval_mode(std::string_view name) {
    if (name == "direct") return EvalMode::direct;
    if (name == "cot") return EvalMode::cot;
    if (name == "rag") return EvalMode::rag;
    if (name == "agent") return EvalMode::agent;
    return std::nullopt;
}

EvalReport run_eval(const EvalConfig& config,
                    const std::vector<QASample>& dataset,
                    PolicyClient& policy, Retriever* retriever) {
    if (dataset.empty()) throw std::invalid_argument("dataset is empty");
    const bool needs_retrieval =
        config.mode == EvalMode::rag || config.mode == EvalMode::agent;
    if (needs_retrieval && config.topk == 0)
        throw std::invalid_argument("topk is required for rag and agent modes");
    if (needs_retrieval && retriever == nullptr)
        throw std::invalid_argument("rag and agent modes require a retriever");

    EvalReport report;
    report.mode = eval_mode_name(config.mode);
    report.topk = config.topk;
    report.seed = config.seed;

    double total_reward = 0.0;
    for (const auto& sample : dataset) {
        SampleRecord record;
        record.id = sample.id;
        record.category = sample.category;
        record.paraphrased = sample.paraphrased;

        try {
            if (config.mode == EvalMode::agent) {
                const EpisodeResult episode =
                    run_episode(policy, *retriever, sample, config.limits,
                                config.topk, config.norm, config.tags);
                record.trace = episode.trajectory;
                record.error = episode.error;
                record.reward = episode.outcome.reward;
                record.extracted = episode.outcome.extracted;
            } else {
                std::string prompt;
                if (config.mode == EvalMode::rag) {
                    prompt += render_docs(
                        retriever->retrieve(sample.question, config.topk));
                    prompt += "\n";
                }
                prompt += "Question: " + sample.question + "\n";
                if (config.mode == EvalMode::cot)
                    prompt += std::string(prompts::kCotInstruction) + " ";
                prompt += std::string(prompts::kAnswerFormatInstruction);

                Trajectory traj;
                traj.question = sample.question;
                traj.segments.push_back({prompt, SegmentOrigin::prompt, 0});

                policy.begin_episode(sample);
                const std::string generated = policy.generate(
                    {prompt, {"</" + config.tags.answer + ">"},
                     config.limits.max_tokens_per_turn});
                traj.segments.push_back({generated, SegmentOrigin::generated, 0});
                traj.terminal = Terminal::answered;

                const RewardOutcome outcome =
                    compute_reward(traj, sample, config.norm, config.tags);
                record.trace = std::move(traj);
                record.reward = outcome.reward;
                record.extracted = outcome.extracted;
            }
        } catch (const std::exception& e) {
            record.reward = 0;
            record.error = e.what();
        }

        total_reward += record.reward;
        report.records.push_back(std::move(record));
    }

    std::stable_sort(report.records.begin(), report.records.end(),
                     [](const SampleRecord& a, const SampleRecord& b) {
                         return a.id < b.id;
                     });
    report.overall = total_reward / static_cast<double>(dataset.size());
    return report;
}

std::vector<SplitRow> split_report(const EvalReport& report, SplitKey key) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> agg;  // count, hits
    for (const auto& r : report.records) {
        const std::string k = key == SplitKey::category
                                  ? r.category
                                  : (r.paraphrased ? "paraphrased" : "original");
        agg[k].first += 1;
        agg[k].second += static_cast<std::size_t>(r.reward);
    }
    std::vector<SplitRow> rows;
    for (const auto& [k, v] : agg) {
        rows.push_back({k, v.first,
                        static_cast<double>(v.second) /
                            static_cast<double>(v.first)});
    }
    return rows;
}

void dump_traces(const EvalReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& record : report.records) {
        std::ofstream out(dir / (record.id + ".trace"));
        if (!out)
            throw std::runtime_error("cannot write trace for " + record.id);
        out << "id: " << record.id << "\n"
            << "reward: " << record.reward << "\n"
            << serialize_trajectory(record.trace);
    }
}

std::string report_to_json(const EvalReport& report) {
    json records = json::array();
    for (const auto& r : report.records) {
        json rec{{"id", r.id},
                 {"category", r.category},
                 {"paraphrased", r.paraphrased},
                 {"reward", r.reward},
                 {"error", r.error},
                 {"trace", trajectory_to_json(r.trace)}};
        if (r.extracted) rec["extracted"] = *r.extracted;
        records.push_back(std::move(rec));
    }
    return json{{"mode", report.mode},
                {"topk", report.topk},
                {"seed", report.seed},
                {"overall", report.overall},
                {"records", std::move(records)}}
        .dump(2);
}

EvalReport report_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    EvalReport report;
    report.mode = j.value("mode", "");
    report.topk = j.value("topk", std::size_t{0});
    report.seed = j.value("seed", std::uint64_t{0});
    report.overall = j.value("overall", 0.0);
    for (const auto& rec : j.value("records", json::array())) {
        SampleRecord r;
        r.id = rec.value("id", "");
        r.category = rec.value("category", "");
        r.paraphrased = rec.value("paraphrased", false);
        r.reward = rec.value("reward", 0);
        r.error = rec.value("error", "");
        if (rec.contains("extracted"))
            r.extracted = rec["extracted"].get<std::string>();
        if (rec.contains("trace")) r.trace = trajectory_from_json(rec["trace"]);
        report.records.push_back(std::move(r));
    }
    return report;
}

std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    out << "mode: " << report.mode << "  topk: " << report.topk
        << "  seed: " << report.seed << "  samples: " << report.records.size()
        << "\n";
    out << std::fixed << std::setprecision(4);
    out << "overall accuracy: " << report.overall << "\n\n";

    auto table = [&out](const char* heading, const std::vector<SplitRow>& rows) {
        std::size_t width = std::strlen(heading);
        for (const auto& r : rows) width = std::max(width, r.key.size());
        out << std::left << std::setw(static_cast<int>(width) + 2) << heading
            << std::right << std::setw(8) << "count" << std::setw(12)
            << "accuracy" << "\n";
        for (const auto& r : rows) {
            out << std::left << std::setw(static_cast<int>(width) + 2) << r.key
                << std::right << std::setw(8) << r.count << std::setw(12)
                << r.accuracy << "\n";
        }
        out << "\n";
    };
    table("category", split_report(report, SplitKey::category));
    table("paraphrase", split_report(report, SplitKey::paraphrased));
    return out.str();
}

}  // namespace ps
