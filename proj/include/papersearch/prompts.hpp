#pragma once

#include <string>
#include <string_view>

// Versioned prompt assets. These are contract text: downstream parsers
// and fixtures depend on the exact wording, so edits require a version
// bump.
namespace ps::prompts {

inline constexpr int kPromptVersion = 1;

// Agent system prompt; "{question}" is the substitution point.
extern const std::string_view kSystemPromptTemplate;

// QA generation prompt for the datagen pipeline; "{title_abstract}" is
// the substitution point.
extern const std::string_view kQaGenerationPrompt;

// Question paraphrase prompt; "{question}" and "{answer}" substitution
// points.
extern const std::string_view kParaphrasePrompt;

// Golden-answer synonym prompt; "{answer}" substitution point. Output is
// a <synonyms> block with one synonym per line.
extern const std::string_view kSynonymPrompt;

// Appended to every baseline prompt so all modes share the answer
// format.
extern const std::string_view kAnswerFormatInstruction;

// Extra sentence for chain-of-thought mode.
extern const std::string_view kCotInstruction;

std::string render(std::string_view tmpl, std::string_view placeholder,
                   std::string_view value);

}  // namespace ps::prompts
