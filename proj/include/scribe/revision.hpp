#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "scribe/article.hpp"
#include "scribe/gateway.hpp"
#include "scribe/metrics.hpp"

namespace scribe {

struct RevisionPolicy {
    QualityPolicy quality;
    int max_iterations = 3; // hard cap 20

    void validate() const; // throws config_error
};

struct RevisionIteration {
    std::vector<std::string> sections_revised; // replacements actually accepted
    double composite_before = 0.0;
    double composite_after = 0.0;
    bool accepted = false;
};

struct RevisionTrace {
    std::vector<RevisionIteration> iterations;
};

// Deterministic prompt naming each failing metric with its value and
// threshold, in fixed metric order. Precondition: failing is non-empty.
PromptRequest build_revision_prompt(const std::string& section_id, const std::string& text,
                                    const std::vector<FailingMetric>& failing);

// Evaluate -> revise failing sections (worst first) -> repeat, keeping a
// candidate only when the manuscript composite does not decrease. Stops when
// the policy passes or max_iterations is reached; max_iterations 0 is the
// identity. The trace is appended in place so a gateway failure leaves the
// partial trace with the caller.
ManuscriptDraft revise(const ManuscriptDraft& draft, const RevisionPolicy& policy,
                       Gateway& gateway, RevisionTrace& trace);

nlohmann::ordered_json revision_trace_to_json(const RevisionTrace& trace);

} // namespace scribe
