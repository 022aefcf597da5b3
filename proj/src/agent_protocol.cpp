#include "papersearch/agent_protocol.hpp"

#include <cctype>
#include <sstream>
#include <stdexcept>

#include "papersearch/prompts.hpp"

namespace ps {
namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

struct TagBlock {
    std::size_t open_pos = std::string_view::npos;
    std::size_t close_end = std::string_view::npos;  // one past "</tag>"
    std::string inner;
};

// Earliest complete <tag>...</tag> block at or after `from`.
std::optional<TagBlock> find_block(std::string_view text, std::string_view tag,
                                   std::size_t from = 0) {
    const std::string open = "<" + std::string(tag) + ">";
    const std::string close = "</" + std::string(tag) + ">";
    const std::size_t o = text.find(open, from);
    if (o == std::string_view::npos) return std::nullopt;
    const std::size_t c = text.find(close, o + open.size());
    if (c == std::string_view::npos) return std::nullopt;
    TagBlock block;
    block.open_pos = o;
    block.close_end = c + close.size();
    block.inner = trim(text.substr(o + open.size(), c - o - open.size()));
    return block;
}

std::string_view title_of(std::string_view contents) {
    const auto nl = contents.find('\n');
    return nl == std::string_view::npos ? contents : contents.substr(0, nl);
}

std::string_view body_of(std::string_view contents) {
    const auto nl = contents.find('\n');
    return nl == std::string_view::npos ? std::string_view{}
                                        : contents.substr(nl + 1);
}

int injected_count(const Trajectory& t) {
    int n = 0;
    for (const auto& s : t.segments)
        if (s.origin == SegmentOrigin::injected) ++n;
    return n;
}

}  // namespace

std::string Trajectory::full_text() const {
    std::string out;
    for (const auto& s : segments) out += s.text;
    return out;
}

std::string render_prompt(const std::string& question, const TagConfig& tags) {
    if (question.empty()) throw std::invalid_argument("question must be nonempty");
    std::string text = prompts::render(prompts::kSystemPromptTemplate,
                                       "{question}", question);
    const TagConfig defaults;
    auto rename = [&text](const std::string& from, const std::string& to) {
        if (from == to) return;
        for (const std::string& form : {"<" + from + ">", "</" + from + ">"}) {
            const std::string repl =
                form[1] == '/' ? "</" + to + ">" : "<" + to + ">";
            std::size_t pos = 0;
            while ((pos = text.find(form, pos)) != std::string::npos) {
                text.replace(pos, form.size(), repl);
                pos += repl.size();
            }
        }
    };
    rename(defaults.search, tags.search);
    rename(defaults.answer, tags.answer);
    rename(defaults.information, tags.information);
    return text;
}

ProtocolEvent scan_generated(std::string_view text, const TagConfig& tags) {
    const auto search = find_block(text, tags.search);
    const auto answer = find_block(text, tags.answer);

    // Whichever complete block closes first is the event; this keeps the
    // scan prefix-stable under chunked feeding.
    if (search && (!answer || search->close_end < answer->close_end))
        return {ProtocolEvent::Kind::search_requested, search->inner};
    if (answer)
        return {ProtocolEvent::Kind::answer_produced, answer->inner};
    return {ProtocolEvent::Kind::incomplete, ""};
}

void inject_information(Trajectory& trajectory,
                        const std::vector<RetrievedDoc>& docs,
                        const TagConfig& tags) {
    if (trajectory.terminal != Terminal::running)
        throw std::logic_error("inject_information on a terminal trajectory");

    std::string text = "\n<" + tags.information + ">\n";
    if (docs.empty()) {
        text += "No results found.\n";
    } else {
        for (std::size_t i = 0; i < docs.size(); ++i) {
            text += "Doc " + std::to_string(i + 1) + " (Title: " +
                    std::string(title_of(docs[i].contents)) + ") " +
                    std::string(body_of(docs[i].contents)) + "\n";
        }
    }
    text += "</" + tags.information + ">\n";

    Segment seg;
    seg.text = std::move(text);
    seg.origin = SegmentOrigin::injected;
    seg.turn = injected_count(trajectory) + 1;
    trajectory.segments.push_back(std::move(seg));
}

std::vector<std::string> whitespace_tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) {
                tokens.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::vector<int> loss_mask(const Trajectory& trajectory,
                           const Tokenizer& tokenizer) {
    if (trajectory.segments.empty())
        throw std::invalid_argument("loss_mask of an empty trajectory");

    std::vector<int> mask;
    int generated = 0;
    for (const auto& seg : trajectory.segments) {
        const int bit = seg.origin == SegmentOrigin::generated ? 1 : 0;
        const auto n = tokenizer(seg.text).size();
        mask.insert(mask.end(), n, bit);
        if (bit) generated += static_cast<int>(n);
    }
    if (generated == 0)
        throw std::invalid_argument(
            "trajectory has no generated tokens; loss mask would be all zero");
    return mask;
}

std::optional<std::string> extract_answer(const Trajectory& trajectory,
                                          const TagConfig& tags) {
    std::optional<std::string> answer;
    for (const auto& seg : trajectory.segments) {
        if (seg.origin != SegmentOrigin::generated) continue;
        std::size_t from = 0;
        while (auto block = find_block(seg.text, tags.answer, from)) {
            answer = block->inner;
            from = block->close_end;
        }
    }
    return answer;
}

std::string serialize_trajectory(const Trajectory& trajectory) {
    static const char* kOrigin[] = {"prompt", "generated", "injected"};
    static const char* kTerminal[] = {"running", "answered", "turn_limit",
                                      "length_limit", "malformed"};
    std::ostringstream out;
    out << "question: " << trajectory.question << "\n";
    out << "terminal: " << kTerminal[static_cast<int>(trajectory.terminal)]
        << "\n";
    for (std::size_t i = 0; i < trajectory.segments.size(); ++i) {
        const auto& seg = trajectory.segments[i];
        out << "--- segment " << (i + 1) << " ["
            << kOrigin[static_cast<int>(seg.origin)] << "] turn " << seg.turn
            << "\n"
            << seg.text << "\n";
    }
    return out.str();
}

}  // namespace ps
