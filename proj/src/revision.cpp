#include "scribe/revision.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "scribe/errors.hpp"

namespace scribe {

namespace {

std::string fmt4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int metric_rank(const std::string& metric) {
    if (metric == "flesch_reading_ease") return 0;
    if (metric == "cohesion") return 1;
    return 2; // abstract_length
}

// Normalized shortfall, for worst-first ordering across metrics.
double severity_of(const FailingMetric& f) {
    if (f.metric == "flesch_reading_ease") return (f.threshold - f.value) / 100.0;
    if (f.metric == "cohesion") return f.threshold - f.value;
    return 0.5;
}

} // namespace

void RevisionPolicy::validate() const {
    if (max_iterations < 0 || max_iterations > 20) {
        throw config_error("invalid_revision_policy",
                           "max_iterations must be between 0 and 20, got " +
                               std::to_string(max_iterations));
    }
}

PromptRequest build_revision_prompt(const std::string& section_id, const std::string& text,
                                    const std::vector<FailingMetric>& failing) {
    if (failing.empty()) {
        throw internal_error("no_failing_metrics",
                             "build_revision_prompt called with no failing metrics");
    }
    std::vector<FailingMetric> ordered = failing;
    std::sort(ordered.begin(), ordered.end(), [](const FailingMetric& a, const FailingMetric& b) {
        return metric_rank(a.metric) < metric_rank(b.metric);
    });

    std::string user_text =
        "Revise the " + section_id +
        " section below so it clears the failing quality metrics. Keep the meaning and "
        "scope; return only the revised section text.\n\nFailing metrics:\n";
    for (const auto& f : ordered) {
        user_text += "- " + f.metric + ": value " + fmt4(f.value) +
                     (f.metric == "abstract_length" && f.value > f.threshold
                          ? " is above threshold "
                          : " is below threshold ") +
                     fmt4(f.threshold) + "\n";
    }
    user_text += "\nSection text:\n" + text + "\n";

    PromptRequest request;
    request.system_text = "You are an academic editor improving one section of a manuscript.";
    request.user_text = user_text;
    request.temperature = 0.0;
    request.max_tokens =
        static_cast<int>(std::max<std::int64_t>(1024, 2 * estimate_tokens(text)));
    request.tag = "revise";
    return request;
}

ManuscriptDraft revise(const ManuscriptDraft& draft, const RevisionPolicy& policy,
                       Gateway& gateway, RevisionTrace& trace) {
    policy.validate();
    ManuscriptDraft current = draft;

    for (int iteration = 0; iteration < policy.max_iterations; ++iteration) {
        QualityReport report = evaluate(current, policy.quality);
        if (report.passed) break;

        // Group failing metrics per section, worst section first.
        std::map<std::string, std::vector<FailingMetric>> by_section;
        for (const auto& f : report.failing) by_section[f.section_id].push_back(f);
        if (by_section.empty()) break; // failing structure only; nothing revisable

        std::vector<std::pair<double, std::string>> order;
        for (const auto& [id, metrics] : by_section) {
            double severity = 0.0;
            for (const auto& f : metrics) severity += severity_of(f);
            order.push_back({severity, id});
        }
        std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            const auto& canon = canonical_section_order();
            return std::find(canon.begin(), canon.end(), a.second) <
                   std::find(canon.begin(), canon.end(), b.second);
        });

        RevisionIteration record;
        record.composite_before = report.composite;

        double current_composite = report.composite;
        for (const auto& [severity, section_id] : order) {
            const std::string* text = current.section_text(section_id);
            if (!text) continue;
            PromptRequest request =
                build_revision_prompt(section_id, *text, by_section[section_id]);
            CompletionResult result = gateway.complete(request);
            std::string candidate_text = trim(result.text);
            if (candidate_text.empty()) continue; // an empty section never helps

            ManuscriptDraft candidate = current;
            for (auto& [id, body] : candidate.sections) {
                if (id == section_id) {
                    body = candidate_text;
                    if (id == "title") candidate.title = candidate_text;
                    break;
                }
            }
            double candidate_composite = evaluate(candidate, policy.quality).composite;
            if (candidate_composite >= current_composite) {
                current = std::move(candidate);
                current_composite = candidate_composite;
                record.sections_revised.push_back(section_id);
            }
            // A rejected candidate leaves the manuscript untouched.
        }

        record.composite_after = current_composite;
        record.accepted = !record.sections_revised.empty();
        trace.iterations.push_back(std::move(record));
    }
    return current;
}

nlohmann::ordered_json revision_trace_to_json(const RevisionTrace& trace) {
    nlohmann::ordered_json j;
    j["iterations"] = nlohmann::ordered_json::array();
    for (const auto& it : trace.iterations) {
        j["iterations"].push_back({{"sections_revised", it.sections_revised},
                                   {"composite_before", it.composite_before},
                                   {"composite_after", it.composite_after},
                                   {"accepted", it.accepted}});
    }
    return j;
}

} // namespace scribe
