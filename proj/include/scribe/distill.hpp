#pragma once

#include <optional>
#include <string>
#include <vector>

#include "scribe/analysis.hpp"
#include "scribe/gateway.hpp"

namespace scribe {

struct DistillConfig {
    double augmentation_threshold = 0.15; // strict: densities below this trigger the pre-pass
    double pass_threshold = 0.8;          // round-trip similarity needed to pass
    double verbatim_guard_fraction = 0.6; // prompts copying more source lines get flagged
    double temperature = 0.0;
};

struct AugmentationOutcome {
    enum class Action { skipped, accepted, rejected };
    Action action = Action::skipped;
    std::optional<SourceText> augmented_text; // present only when accepted
    std::string reason;
};

struct ReconstructionPrompt {
    std::string target_path;
    std::string prompt_text;
    std::string source_hash;    // digest of the (possibly augmented) source text
    std::string summary_digest; // digest of the summary it was distilled from
    double verbatim_fraction = 0.0;
    bool verbatim_flagged = false;
};

struct RoundTripReport {
    double similarity = 0.0;
    bool passed = false;
    std::vector<std::string> missing_units; // qualified names absent from the regeneration
    std::vector<std::string> extra_units;   // qualified names invented by the regeneration
    ParseStatus regenerated_status = ParseStatus::clean;
};

bool needs_augmentation(const CodeSummary& summary, double threshold);

// Asks the backend to return the same code with comments added. The result is
// accepted only when comment-stripping normalization leaves it equal to the
// original; anything else is a recorded rejection, never an error.
AugmentationOutcome augment_comments(const SourceText& text, const CodeSummary& summary,
                                     Gateway& gateway, const DistillConfig& config);

// Throws gateway_error("empty_response") on a blank backend response.
ReconstructionPrompt distill(const SourceText& text, const CodeSummary& summary,
                             Gateway& gateway, const DistillConfig& config);

// Sends the reconstruction prompt back through the gateway and scores the
// regenerated code against the original: F1 over (kind, name, parameter
// count) triples of non-module units; normalized text equality for opaque
// originals. Refuses stale prompts (input_error("stale_prompt")) before any
// LLM call.
RoundTripReport round_trip_verify(const ReconstructionPrompt& prompt, const SourceText& current,
                                  const CodeSummary& original_summary, Gateway& gateway,
                                  const DistillConfig& config);

// Exposed for direct testing of the similarity arithmetic.
double structural_f1(const CodeSummary& original, const CodeSummary& regenerated,
                     std::vector<std::string>* missing, std::vector<std::string>* extra);

// Fraction of the source's non-blank lines reproduced verbatim in the prompt.
double verbatim_line_fraction(const std::string& source, const std::string& prompt_text);

std::string source_text_hash(const SourceText& text);
std::string summary_digest_of(const CodeSummary& summary);

} // namespace scribe
