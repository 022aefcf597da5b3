#include "papersearch/types.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <utility>

namespace ps {
namespace {

std::string fold(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool prev_space = true;
    for (char c : s) {
        unsigned char u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '&') {
            out.push_back(static_cast<char>(std::tolower(u)));
            prev_space = false;
        } else if (!prev_space) {
            out.push_back(' ');
            prev_space = true;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

// Longer label variants used by the generation prompt, mapped onto the
// same numbering as the canonical short labels.
constexpr std::array<std::string_view, 10> kLongLabels = {
    "Genetic inheritance & disease-linked mutations",
    "Therapeutics, indications & clinical evidence",
    "Protein function, localization & signalling/enzymatic interactions",
    "Experimental & computational methods, resources & acronyms",
    "Disease causation & pathogens",
    "Biomarkers & diagnostic tests",
    "Bioinformatics databases & curated resources",
    "Clinical grading & diagnostic scales / classification systems",
    "Anatomical / cellular structures & localisation",
    "Psychology and behavioral health",
};

}  // namespace

std::optional<int> category_number(std::string_view label) {
    const std::string key = fold(label);
    for (std::size_t i = 0; i < kCategoryLabels.size(); ++i) {
        if (key == fold(kCategoryLabels[i])) return static_cast<int>(i) + 1;
    }
    for (std::size_t i = 0; i < kLongLabels.size(); ++i) {
        if (key == fold(kLongLabels[i])) return static_cast<int>(i) + 1;
    }
    return std::nullopt;
}

std::string_view category_label(int number) {
    if (number < 1 || number > 10)
        throw std::out_of_range("category number out of range: " +
                                std::to_string(number));
    return kCategoryLabels[static_cast<std::size_t>(number - 1)];
}

}  // namespace ps
