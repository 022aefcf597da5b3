#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "papersearch/reward.hpp"
#include "papersearch/rollout.hpp"
#include "papersearch/types.hpp"

namespace ps {

enum class EvalMode { direct, cot, rag, agent };

std::string eval_mode_name(EvalMode mode);
std::optional<EvalMode> parse_eval_mode(std::string_view name);

struct EvalConfig {
    EvalMode mode = EvalMode::direct;
    std::size_t topk = 0;  // required for rag and agent modes
    EpisodeLimits limits;
    NormalizationConfig norm;
    TagConfig tags;
    std::uint64_t seed = 0;
};

struct SampleRecord {
    std::string id;
    std::string category;
    bool paraphrased = false;
    std::optional<std::string> extracted;
    int reward = 0;
    std::string error;  // per-sample failure detail, empty when clean
    Trajectory trace;
};

struct EvalReport {
    std::string mode;
    std::size_t topk = 0;
    std::uint64_t seed = 0;
    double overall = 0.0;
    std::vector<SampleRecord> records;
};

// Runs every sample through the requested mode and grades with the
// single reward path. Per-sample failures score 0 and the run continues.
// rag and agent modes require a retriever; direct and cot never call it.
EvalReport run_eval(const EvalConfig& config,
                    const std::vector<QASample>& dataset,
                    PolicyClient& policy, Retriever* retriever);

struct SplitRow {
    std::string key;
    std::size_t count = 0;
    double accuracy = 0.0;
};
enum class SplitKey { category, paraphrased };
std::vector<SplitRow> split_report(const EvalReport& report, SplitKey key);

// One serialized trajectory per sample, reward-annotated, under `dir`.
void dump_traces(const EvalReport& report, const std::filesystem::path& dir);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& json_text);

// Aligned-text table: header (mode, topk, seed, overall) plus the
// category and paraphrase splits.
std::string format_report(const EvalReport& report);

}  // namespace ps
