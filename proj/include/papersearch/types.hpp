#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ps {

// One corpus record. `contents` is always title + "\n" + body when the
// record was supplied as a title/body pair; records supplied with
// pre-joined contents keep them verbatim.
struct Document {
    std::string id;
    std::string title;
    std::string body;
    std::string contents;
};

// The ten question categories, in their canonical numbering (1..10).
inline constexpr std::array<std::string_view, 10> kCategoryLabels = {
    "Genetic mutations",
    "Therapeutics & clinical evidence",
    "Protein function & signalling",
    "Methods & resources",
    "Disease causation & pathogens",
    "Biomarkers & diagnostics",
    "Bioinformatics databases",
    "Clinical scales & classifications",
    "Anatomy & cellular localisation",
    "Psychology & behavioural health",
};

// Returns the 1-based category number for a label, or nullopt for labels
// outside the closed set. Longer pipeline-facing label variants (e.g.
// "Genetic inheritance & disease-linked mutations") are accepted as
// aliases of the canonical short labels.
std::optional<int> category_number(std::string_view label);

// Canonical label for a 1-based category number. Throws std::out_of_range
// outside 1..10.
std::string_view category_label(int number);

struct QASample {
    std::string id;
    std::string question;
    std::vector<std::string> golden_answers;  // canonical answer first
    std::string category;
    std::string source_doc_id;
    bool paraphrased = false;
};

}  // namespace ps
