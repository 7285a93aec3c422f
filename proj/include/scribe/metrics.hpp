#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "scribe/article.hpp"

namespace scribe {

struct ReadabilityScores {
    double flesch_reading_ease = 0.0;
    double fk_grade = 0.0;
    std::int64_t words = 0;
    std::int64_t sentences = 0;
    std::int64_t syllables = 0;
};

// Counting rules: a word is a maximal run of letters/digits/apostrophes; a
// sentence ends at '.', '!' or '?' followed by whitespace or end of text,
// provided at least one word occurred since the previous boundary; syllables
// are contiguous vowel groups (aeiouy), minus one for a terminal silent 'e'
// unless the word ends in consonant+"le", minimum one per word.
// Throws input_error("degenerate_text") for empty text or text without a
// complete sentence.
ReadabilityScores readability(const std::string& text);

// Mean Jaccard similarity of content-word sets over adjacent paragraph pairs;
// 1.0 for single-paragraph text. Throws input_error("degenerate_text") for
// blank text.
double cohesion(const std::string& text);

bool is_stopword(const std::string& lowercase_word);

std::int64_t count_words(const std::string& text);

struct QualityPolicy {
    double min_flesch = 30.0;
    double min_cohesion = 0.15;
    double min_structure = 1.0;
    double weight_readability = 0.3;
    double weight_cohesion = 0.35;
    double weight_structure = 0.35;
    int abstract_word_target = 200;
};

// Fraction of passing structure checks, weighted. Presence/non-emptiness of
// each canonical section weighs 3; section order, abstract length within
// 0.5x-2x of its target, and no-verbatim-duplicates weigh 1 each. The heavier
// presence weight keeps the score monotone: deleting a section always lowers
// it.
double structure_adherence(const ManuscriptDraft& draft, int abstract_word_target);

struct SectionQuality {
    std::optional<ReadabilityScores> readability; // absent when degenerate
    double cohesion = 0.0;
};

struct FailingMetric {
    std::string section_id;
    std::string metric; // "flesch_reading_ease" | "cohesion" | "abstract_length"
    double value = 0.0;
    double threshold = 0.0;
};

struct QualityReport {
    std::map<std::string, SectionQuality> per_section; // prose sections
    double structure_score = 0.0;
    double mean_flesch = 0.0;
    double mean_cohesion = 0.0;
    double composite = 0.0;
    QualityPolicy thresholds;
    bool passed = false;
    std::vector<FailingMetric> failing; // fixed metric order within a section
};

// Total: degenerate sections score zero rather than erroring.
QualityReport evaluate(const ManuscriptDraft& draft, const QualityPolicy& policy);

struct ComparisonReport {
    std::string left_id;
    std::string right_id;
    std::map<std::string, double> per_metric_delta;       // left - right
    std::map<std::string, std::string> winner_per_metric; // "left" | "right" | "tie"
    std::string summary;                                  // plain-text table
};

// Compares on the higher-is-better metrics: flesch_reading_ease, cohesion,
// structure, composite. Throws input_error("degenerate_text") naming the
// offending side when one has no sections at all.
ComparisonReport compare(const ManuscriptDraft& a, const ManuscriptDraft& b,
                         const QualityPolicy& policy, const std::string& left_id = "left",
                         const std::string& right_id = "right");

nlohmann::ordered_json quality_report_to_json(const QualityReport& report);
nlohmann::ordered_json comparison_report_to_json(const ComparisonReport& report);

} // namespace scribe
