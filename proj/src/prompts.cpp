#include "papersearch/prompts.hpp"

namespace ps::prompts {

const std::string_view kSystemPromptTemplate =
    R"(Answer the given question. You must conduct reasoning inside <think> and </think> first every time you get new information. After reasoning, if you find you lack some knowledge, you can call a search engine by <search> query </search> and it will return the top searched results between <information> and </information>. You can search as many times as your want. If you find no further external knowledge needed, you can directly provide the answer inside <answer> and </answer>, without detailed illustrations. For example, <answer> Beijing </answer>. Question: {question}
)";

const std::string_view kQaGenerationPrompt =
    R"(BACKGROUND
You are a domain-expert biomedical NLP assistant.
You are helping me to create an open-domain QA dataset.
The downstream task will read a query and require an agent to search over Pubmed abstracts

--------
YOUR TASK
I will provide you with title and abstract of a Pubmed article.
Your task is to create 3 new question-answer pairs.

--------
TYPES OF QUESTIONS
The questions should be 'factoid based'.
The answer should be a simple entity.
It should not be ambiguous.
Don't be pretentious.

--------
IMPORTANT NOTES
The question-answer pair will be used to evaluation question-answering systems with retrieval. Ths means the target system does not know which paper the question was sourced from. So an inappropriate question would be "What technology is used in this study to ...". or "what type of treatment is assessed in this study?" (where the study name is not specifified).
If the question contains acronyms that are not well known, then explain the acronym.

--------
EXAMPLE CATEGORIES
Below are sample categories with sample questions.

Category: 1 - Genetic inheritance & disease-linked mutations
question: What gene is mutated in Sickle Cell Anemia?
answer: HBB
question: Which ultraconserved element is associated with Embryonic Stem Cells (ESC) self-renewal?
answer: T-UCstem1
question: Is Huntington's disease caused by a dominate or recessive gene?
answer: dominant

Category: 2 - Therapeutics, indications & clinical evidence
question: What is the most effective drug for oxaliplatin-induced neuropathy?
answer: Duloxetine
question: Which cancer is the BCG vaccine used for?
answer: Non-muscle Invasive Bladder Cancer
question: How many injections of CLS-TA did the patients participating in the PEACHTREE trial receive?
answer: two

Category: 3 - Protein function, localization & signalling/enzymatic interactions
question: Which histone mark distinguishes active from inactive enhancers?
answer: H3K27ac
question: Which component of the Influenza A Virus affects mRNA transcription termination?
answer: NS1
question: Which is the main calcium binding protein of the sarcoplasmic reticulum?
answer: Calsequestrin

Category: 4 - Experimental & computational methods, resources & acronyms
question: Which algorithm has been proposed for efficient storage of WGS variant calls?
answer: SeqArray
question: What is an acceptable sequence coverage(depth) required for human whole-exome sequencing?
answer: 30x-60x

Category: 5 - Disease causation & pathogens
question: Which is the most common disease attributed to malfunction or absence of primary cilia?
answer: ['Polycystic kidney disease', 'PKD']
question: What organism causes scarlet fever also known as scarletina?
answer: ['Group A Streptococcus', 'Streptococcus pyogenes']
question: The pathogen Fusarium graminearum affects what type of plant species?
answer: cereal crops

Category: 6 - Biomarkers & diagnostic tests
question: Salivary Cortisol is a biomarker for what disease/syndrome/condition?
answer: stress
question: What is the gold standard for a diagnosis of narcolepsy?
answer: ['Sleep study', 'overnight polysomnography']

Category: 7 - Bioinformatics databases & curated resources
question: Which R/bioconductor package has been developed to aid in epigenomic analysis?
answer: DeepBlueR
question: Which database associates human noncoding SNPs with their three-dimensional interacting genes?
answer: 3DSNP
question: What is the RESID database?
question: Which is the literature-based database of phenotypes?
answer: PheneBank

Category: 8 - Clinical grading & diagnostic scales / classification systems
question: What can be predicted with the Wells criteria?
answer: pulmonary embolism
question: Symptoms of which disorder are evaluated with the Davidson Trauma Scale?
answer: ['post-traumatic stress disorder', 'PTSD']
question: Which value of nuchal translucency thickness is set as the threshold for high-risk for Down Syndrome?
answer: 3mm

Category: 9 - Anatomical / cellular structures & localisation
question: Where is corticosterone synthesized?
answer: Adrenal glands
question: Which is the chromosome area that the human gene coding for the dopamine transporter (DAT1) is located to?
answer: 5p15.3
question: Where is the respirasome located?
answer: inner mitochondrial membrane

Category: 10 - Psychology and behavioral health
Question: Which psychomotor domain showed a significant difference between institutionalized and non-institutionalized sheltered children and adolescents?
Answer: Body awareness
Question: What ethical principle justifies actions that have both good and harmful effects, as long as the harm is not intended but only foreseen?
Answer: Rule of Double Effect
Questions: What psychological process during an incubation period is associated with enhanced creative problem solving?
Answer: Mind-wandering

--------

OUTPUT FORMAT
A single QA has tags `<question>...</question>`, answer inside `<answer>...</answer>`.
If the QA corresponds to one of the above categories put its number in <cat_num>...</cat_num> and category description in <cat>...</cat>.
Each QA should exist in its own tag <qa>...</qa>

Therefore the first 2 questions would be:
<qas>
   <qa> <question> ... </question>
      <answer> ... </answer>
      <cat_num> ... </cat_num>
      <cat> ... </cat>
   </qa>
   <qa>
       .....
   </qa>
   ...
</qas>

--------
TITLE AND ABSTRACT
{title_abstract}
)";

const std::string_view kParaphrasePrompt =
    R"(You are given a question that was written using a particular document as its main source. Your task is to rewrite the question so that it retains the original meaning and would result in the same correct answer, but uses different wording and phrasing. Important constraints:
Do not broaden or narrow the scope of the question.
Do not introduce ambiguity or alter clinical/technical context.
Make sure the correct answer remains exactly the same.
Your goal is to change the surface wording so that simple bag-of-words search (like BM25) may not easily match the original document, while an expert human or strong language model could still answer correctly.
Avoid copying any significant phrase (three or more words in sequence) from the original question.

Example:
- Original: What congenital abnormality can cause unilateral hydrocephalus in the perinatal period?
- Edited: Which birth defect present during the perinatal stage may result in hydrocephalus affecting only one side of the brain?

Output should be in tags like <question> ... </question>

Question: {question}
Answer: {answer}
)";

const std::string_view kSynonymPrompt =
    R"(You are a domain-expert biomedical NLP assistant. You are given the ground-truth answer to a factoid question. List the synonyms, common abbreviations, and alternative names that an expert would accept as exactly the same answer. Do not broaden or narrow the meaning; only include names that refer to exactly the same entity. If there are no widely accepted synonyms, output an empty block.

Output the synonyms inside a single <synonyms>...</synonyms> block, one synonym per line.

Answer: {answer}
)";

const std::string_view kAnswerFormatInstruction =
    R"(Provide the final answer as a single entity inside <answer> and </answer>, without detailed illustrations. For example, <answer> Beijing </answer>.)";

const std::string_view kCotInstruction =
    R"(Think step by step inside <think> and </think> before answering.)";

std::string render(std::string_view tmpl, std::string_view placeholder,
                   std::string_view value) {
    std::string out(tmpl);
    std::size_t pos = 0;
    while ((pos = out.find(placeholder, pos)) != std::string::npos) {
        out.replace(pos, placeholder.size(), value);
        pos += value.size();
    }
    return out;
}

}  // namespace ps::prompts
