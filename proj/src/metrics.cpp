#include "scribe/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "scribe/errors.hpp"

namespace scribe {

namespace {

bool is_word_char(unsigned char c) {
    return std::isalnum(c) || c == '\'';
}

bool is_vowel(char c) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

std::int64_t syllables_in(const std::string& word) {
    std::string w;
    w.reserve(word.size());
    for (char c : word) w += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

    std::int64_t groups = 0;
    size_t i = 0;
    while (i < w.size()) {
        if (is_vowel(w[i])) {
            ++groups;
            while (i < w.size() && is_vowel(w[i])) ++i;
        } else {
            ++i;
        }
    }
    if (!w.empty() && w.back() == 'e') {
        bool le_rule = w.size() >= 3 && w[w.size() - 2] == 'l' &&
                       std::isalpha(static_cast<unsigned char>(w[w.size() - 3])) &&
                       !is_vowel(w[w.size() - 3]);
        if (!le_rule) --groups;
    }
    return std::max<std::int64_t>(groups, 1);
}

std::vector<std::string> words_of(const std::string& text) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < text.size()) {
        if (is_word_char(static_cast<unsigned char>(text[i]))) {
            size_t j = i;
            while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
            out.push_back(text.substr(i, j - i));
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

std::string to_lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::set<std::string> content_words(const std::string& paragraph) {
    std::set<std::string> out;
    for (const auto& w : words_of(paragraph)) {
        std::string lw = to_lower(w);
        if (!is_stopword(lw)) out.insert(lw);
    }
    return out;
}

std::vector<std::string> paragraphs_of(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    std::istringstream in(text);
    std::string line;
    auto flush = [&]() {
        size_t b = current.find_first_not_of(" \t\r\n");
        if (b != std::string::npos) out.push_back(current);
        current.clear();
    };
    while (std::getline(in, line)) {
        bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
        if (blank) {
            flush();
        } else {
            current += line;
            current += "\n";
        }
    }
    flush();
    return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::int64_t inter = 0;
    for (const auto& w : a) {
        if (b.count(w)) ++inter;
    }
    std::int64_t uni = static_cast<std::int64_t>(a.size() + b.size()) - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

const std::vector<std::string>& prose_section_ids() {
    static const std::vector<std::string> ids = {"abstract", "introduction", "methods",
                                                 "results", "discussion"};
    return ids;
}

std::string fmt4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

} // namespace

bool is_stopword(const std::string& w) {
    static const std::set<std::string> stop = {
        "a",      "about",  "above",   "after",  "again",   "all",    "also",   "am",
        "an",     "and",    "any",     "are",    "as",      "at",     "be",     "because",
        "been",   "being",  "below",   "between","both",    "but",    "by",     "can",
        "cannot", "could",  "did",     "do",     "does",    "doing",  "down",   "during",
        "each",   "few",    "for",     "from",   "further", "had",    "has",    "have",
        "having", "he",     "her",     "here",   "hers",    "him",    "his",    "how",
        "i",      "if",     "in",      "into",   "is",      "it",     "its",    "itself",
        "just",   "me",     "more",    "most",   "my",      "no",     "nor",    "not",
        "of",     "off",    "on",      "once",   "only",    "or",     "other",  "our",
        "ours",   "out",    "over",    "own",    "same",    "she",    "should", "so",
        "some",   "such",   "than",    "that",   "the",     "their",  "theirs", "them",
        "then",   "there",  "these",   "they",   "this",    "those",  "through","to",
        "too",    "under",  "until",   "up",     "very",    "was",    "we",     "were",
        "what",   "when",   "where",   "which",  "while",   "who",    "whom",   "why",
        "will",   "with",   "would",   "you",    "your",    "yours"};
    return stop.count(w) > 0;
}

std::int64_t count_words(const std::string& text) {
    return static_cast<std::int64_t>(words_of(text).size());
}

ReadabilityScores readability(const std::string& text) {
    ReadabilityScores scores;
    std::int64_t words_since_boundary = 0;
    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (is_word_char(c)) {
            size_t j = i;
            while (j < n && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
            std::string word = text.substr(i, j - i);
            ++scores.words;
            ++words_since_boundary;
            scores.syllables += syllables_in(word);
            i = j;
            continue;
        }
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 >= n || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
            if (words_since_boundary > 0) {
                ++scores.sentences;
                words_since_boundary = 0;
            }
        }
        ++i;
    }
    if (scores.words == 0 || scores.sentences == 0) {
        throw input_error("degenerate_text",
                          "readability needs at least one complete sentence");
    }
    double wps = static_cast<double>(scores.words) / static_cast<double>(scores.sentences);
    double spw = static_cast<double>(scores.syllables) / static_cast<double>(scores.words);
    scores.flesch_reading_ease = 206.835 - 1.015 * wps - 84.6 * spw;
    scores.fk_grade = 0.39 * wps + 11.8 * spw - 15.59;
    return scores;
}

double cohesion(const std::string& text) {
    std::vector<std::string> paragraphs = paragraphs_of(text);
    if (paragraphs.empty()) {
        throw input_error("degenerate_text", "cohesion needs at least one paragraph");
    }
    if (paragraphs.size() == 1) return 1.0;
    double sum = 0.0;
    for (size_t i = 0; i + 1 < paragraphs.size(); ++i) {
        sum += jaccard(content_words(paragraphs[i]), content_words(paragraphs[i + 1]));
    }
    return sum / static_cast<double>(paragraphs.size() - 1);
}

double structure_adherence(const ManuscriptDraft& draft, int abstract_word_target) {
    const auto& canonical = canonical_section_order();
    auto blank = [](const std::string& s) {
        return s.find_first_not_of(" \t\r\n") == std::string::npos;
    };

    double total = 0.0;
    double passed = 0.0;

    // Presence and non-emptiness, weight 3 per canonical section.
    for (const auto& id : canonical) {
        total += 3.0;
        const std::string* text = draft.section_text(id);
        if (text && !blank(*text)) passed += 3.0;
    }

    // Canonical relative order of the present sections, weight 1.
    total += 1.0;
    {
        std::vector<size_t> positions;
        bool order_ok = true;
        std::set<std::string> seen;
        for (const auto& [id, text] : draft.sections) {
            auto it = std::find(canonical.begin(), canonical.end(), id);
            if (it == canonical.end()) continue;
            if (!seen.insert(id).second) order_ok = false; // duplicate id
            positions.push_back(static_cast<size_t>(it - canonical.begin()));
        }
        for (size_t i = 1; i < positions.size(); ++i) {
            if (positions[i] < positions[i - 1]) order_ok = false;
        }
        if (order_ok) passed += 1.0;
    }

    // Abstract length within 0.5x-2x of its word target, weight 1.
    total += 1.0;
    {
        const std::string* abstract = draft.section_text("abstract");
        if (abstract) {
            std::int64_t words = count_words(*abstract);
            double lo = 0.5 * abstract_word_target;
            double hi = 2.0 * abstract_word_target;
            if (static_cast<double>(words) >= lo && static_cast<double>(words) <= hi) {
                passed += 1.0;
            }
        }
    }

    // No section duplicating another verbatim, weight 1.
    total += 1.0;
    {
        bool duplicate = false;
        for (size_t i = 0; i < draft.sections.size() && !duplicate; ++i) {
            if (blank(draft.sections[i].second)) continue;
            for (size_t j = i + 1; j < draft.sections.size(); ++j) {
                if (draft.sections[i].second == draft.sections[j].second) {
                    duplicate = true;
                    break;
                }
            }
        }
        if (!duplicate) passed += 1.0;
    }

    return passed / total;
}

QualityReport evaluate(const ManuscriptDraft& draft, const QualityPolicy& policy) {
    QualityReport report;
    report.thresholds = policy;

    double fre_sum = 0.0;
    int fre_count = 0;
    double coh_sum = 0.0;
    int coh_count = 0;

    for (const auto& id : prose_section_ids()) {
        const std::string* text = draft.section_text(id);
        if (!text || text->find_first_not_of(" \t\r\n") == std::string::npos) continue;
        SectionQuality q;
        try {
            q.readability = readability(*text);
            fre_sum += q.readability->flesch_reading_ease;
            ++fre_count;
        } catch (const Error&) {
            q.readability = std::nullopt;
        }
        try {
            q.cohesion = cohesion(*text);
        } catch (const Error&) {
            q.cohesion = 0.0;
        }
        coh_sum += q.cohesion;
        ++coh_count;

        double fre = q.readability ? q.readability->flesch_reading_ease : 0.0;
        if (fre < policy.min_flesch) {
            report.failing.push_back({id, "flesch_reading_ease", fre, policy.min_flesch});
        }
        if (q.cohesion < policy.min_cohesion) {
            report.failing.push_back({id, "cohesion", q.cohesion, policy.min_cohesion});
        }
        report.per_section[id] = q;
    }

    report.mean_flesch = fre_count > 0 ? fre_sum / fre_count : 0.0;
    report.mean_cohesion = coh_count > 0 ? coh_sum / coh_count : 0.0;
    report.structure_score = structure_adherence(draft, policy.abstract_word_target);

    // Abstract band violations are actionable on the abstract section.
    const std::string* abstract = draft.section_text("abstract");
    if (abstract && abstract->find_first_not_of(" \t\r\n") != std::string::npos) {
        std::int64_t words = count_words(*abstract);
        double lo = 0.5 * policy.abstract_word_target;
        double hi = 2.0 * policy.abstract_word_target;
        if (static_cast<double>(words) < lo) {
            report.failing.push_back(
                {"abstract", "abstract_length", static_cast<double>(words), lo});
        } else if (static_cast<double>(words) > hi) {
            report.failing.push_back(
                {"abstract", "abstract_length", static_cast<double>(words), hi});
        }
    }

    double norm_fre = std::clamp(report.mean_flesch, 0.0, 100.0) / 100.0;
    double wsum = policy.weight_readability + policy.weight_cohesion + policy.weight_structure;
    report.composite = (policy.weight_readability * norm_fre +
                        policy.weight_cohesion * report.mean_cohesion +
                        policy.weight_structure * report.structure_score) /
                       (wsum > 0 ? wsum : 1.0);

    bool sections_ok = report.failing.empty();
    report.passed = sections_ok && report.structure_score >= policy.min_structure;
    return report;
}

ComparisonReport compare(const ManuscriptDraft& a, const ManuscriptDraft& b,
                         const QualityPolicy& policy, const std::string& left_id,
                         const std::string& right_id) {
    if (a.sections.empty()) {
        throw input_error("degenerate_text", "left input (" + left_id + ") has no sections");
    }
    if (b.sections.empty()) {
        throw input_error("degenerate_text", "right input (" + right_id + ") has no sections");
    }

    QualityReport left = evaluate(a, policy);
    QualityReport right = evaluate(b, policy);

    ComparisonReport report;
    report.left_id = left_id;
    report.right_id = right_id;

    auto add = [&report](const std::string& metric, double l, double r) {
        double delta = l - r;
        report.per_metric_delta[metric] = delta;
        report.winner_per_metric[metric] = l > r ? "left" : (l < r ? "right" : "tie");
    };
    add("flesch_reading_ease", left.mean_flesch, right.mean_flesch);
    add("cohesion", left.mean_cohesion, right.mean_cohesion);
    add("structure", left.structure_score, right.structure_score);
    add("composite", left.composite, right.composite);

    std::map<std::string, std::pair<double, double>> values = {
        {"flesch_reading_ease", {left.mean_flesch, right.mean_flesch}},
        {"cohesion", {left.mean_cohesion, right.mean_cohesion}},
        {"structure", {left.structure_score, right.structure_score}},
        {"composite", {left.composite, right.composite}}};

    std::ostringstream table;
    table << "metric               " << "left(" << left_id << ")  right(" << right_id
          << ")  delta      winner\n";
    for (const auto& metric :
         {"flesch_reading_ease", "cohesion", "structure", "composite"}) {
        const auto& [l, r] = values[metric];
        char line[256];
        std::snprintf(line, sizeof(line), "%-20s %-12s %-12s %-10s %s\n", metric,
                      fmt4(l).c_str(), fmt4(r).c_str(),
                      fmt4(report.per_metric_delta[metric]).c_str(),
                      report.winner_per_metric[metric].c_str());
        table << line;
    }
    report.summary = table.str();
    return report;
}

nlohmann::ordered_json quality_report_to_json(const QualityReport& report) {
    nlohmann::ordered_json j;
    j["per_section"] = nlohmann::ordered_json::object();
    for (const auto& [id, q] : report.per_section) {
        nlohmann::ordered_json js;
        if (q.readability) {
            js["readability"] = {{"flesch_reading_ease", q.readability->flesch_reading_ease},
                                 {"fk_grade", q.readability->fk_grade},
                                 {"words", q.readability->words},
                                 {"sentences", q.readability->sentences},
                                 {"syllables", q.readability->syllables}};
        } else {
            js["readability"] = nullptr;
        }
        js["cohesion"] = q.cohesion;
        j["per_section"][id] = js;
    }
    j["structure_score"] = report.structure_score;
    j["mean_flesch"] = report.mean_flesch;
    j["mean_cohesion"] = report.mean_cohesion;
    j["composite"] = report.composite;
    j["thresholds"] = {{"min_flesch", report.thresholds.min_flesch},
                       {"min_cohesion", report.thresholds.min_cohesion},
                       {"min_structure", report.thresholds.min_structure},
                       {"weight_readability", report.thresholds.weight_readability},
                       {"weight_cohesion", report.thresholds.weight_cohesion},
                       {"weight_structure", report.thresholds.weight_structure},
                       {"abstract_word_target", report.thresholds.abstract_word_target}};
    j["failing"] = nlohmann::ordered_json::array();
    for (const auto& f : report.failing) {
        j["failing"].push_back({{"section", f.section_id},
                                {"metric", f.metric},
                                {"value", f.value},
                                {"threshold", f.threshold}});
    }
    j["passed"] = report.passed;
    return j;
}

nlohmann::ordered_json comparison_report_to_json(const ComparisonReport& report) {
    nlohmann::ordered_json j;
    j["left_id"] = report.left_id;
    j["right_id"] = report.right_id;
    j["per_metric_delta"] = nlohmann::ordered_json::object();
    for (const auto& [metric, delta] : report.per_metric_delta) {
        j["per_metric_delta"][metric] = delta;
    }
    j["winner_per_metric"] = nlohmann::ordered_json::object();
    for (const auto& [metric, winner] : report.winner_per_metric) {
        j["winner_per_metric"][metric] = winner;
    }
    j["summary"] = report.summary;
    return j;
}

} // namespace scribe
