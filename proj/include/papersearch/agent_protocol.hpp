#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "papersearch/bm25.hpp"

namespace ps {

// Tag names are configurable to tolerate checkpoint drift; <search> is
// canonical.
struct TagConfig {
    std::string search = "search";
    std::string answer = "answer";
    std::string information = "information";
};

enum class SegmentOrigin { prompt, generated, injected };

struct Segment {
    std::string text;
    SegmentOrigin origin = SegmentOrigin::generated;
    int turn = 0;
};

enum class Terminal { running, answered, turn_limit, length_limit, malformed };

struct Trajectory {
    std::string question;
    std::vector<Segment> segments;
    Terminal terminal = Terminal::running;

    std::string full_text() const;  // concatenation of all segment texts
};

struct ProtocolEvent {
    enum class Kind { search_requested, answer_produced, incomplete };
    Kind kind = Kind::incomplete;
    std::string text;  // query or answer, trimmed
};

// The system prompt template with {question} substituted.
std::string render_prompt(const std::string& question,
                          const TagConfig& tags = {});

// First complete <search>...</search> or <answer>...</answer> block in
// generation order (whichever closes first) wins; neither complete means
// Incomplete. Scanning a prefix never yields a different first event than
// scanning the whole text.
ProtocolEvent scan_generated(std::string_view text, const TagConfig& tags = {});

// Renders hits as "Doc i (Title: ...) body" lines inside an
// <information> block and appends it as an injected segment. Empty hit
// lists inject a "No results found." sentinel. Throws std::logic_error
// if the trajectory is already terminal.
struct RetrievedDoc {
    std::string id;
    std::string contents;  // title on the first line
};
void inject_information(Trajectory& trajectory,
                        const std::vector<RetrievedDoc>& docs,
                        const TagConfig& tags = {});

// Per-token loss mask under a caller-supplied tokenizer: 1 on generated
// segments, 0 on prompt and injected segments. Throws std::invalid_argument
// when no generated token exists (the mask would be all zero).
using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;
std::vector<std::string> whitespace_tokenize(std::string_view text);
std::vector<int> loss_mask(const Trajectory& trajectory,
                           const Tokenizer& tokenizer = whitespace_tokenize);

// Inner text of the last <answer> block across generated segments,
// trimmed. Injected content is never consulted.
std::optional<std::string> extract_answer(const Trajectory& trajectory,
                                          const TagConfig& tags = {});

// Human-readable trace record (one segment per block, with origin and
// turn) used by the eval harness trace dumps.
std::string serialize_trajectory(const Trajectory& trajectory);

}  // namespace ps
