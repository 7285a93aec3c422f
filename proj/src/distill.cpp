#include "scribe/distill.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "scribe/digest.hpp"
#include "scribe/errors.hpp"
#include "scribe/mock_backend.hpp"

namespace scribe {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Model responses may wrap code in a fence; unwrap when they do.
std::string extract_code(const std::string& response) {
    std::string block = first_fenced_block(response);
    return block.empty() ? response : block;
}

int response_max_tokens(const std::string& source) {
    return static_cast<int>(std::max<std::int64_t>(1024, 2 * estimate_tokens(source) + 256));
}

std::string augment_request_text(const SourceText& text, const CodeSummary& summary) {
    std::ostringstream out;
    out << "Add explanatory comments to the code below. Return the complete file with\n"
           "comments added and no other changes: do not rename, reorder, add, or remove\n"
           "any code.\n\n";
    out << "File: " << text.path << " (comment density "
        << static_cast<int>(summary.comment_density * 100) << "%)\n\n";
    out << "```python\n" << text.text;
    if (text.text.empty() || text.text.back() != '\n') out << "\n";
    out << "```\n";
    return out.str();
}

std::string distill_request_text(const SourceText& text, const CodeSummary& summary) {
    std::ostringstream out;
    if (summary.parse_status == ParseStatus::opaque) {
        out << "The file below could not be parsed. Write a prompt that directs a language\n"
               "model to reproduce the file faithfully in a single response, preserving its\n"
               "content exactly.\n\n";
    } else {
        out << "Study the code below and write a reconstruction prompt: a self-contained\n"
               "prompt that directs a language model to regenerate the complete file in a\n"
               "single response. Describe every class and function precisely (names,\n"
               "parameters, behavior); prefer structural description over copying lines.\n\n";
        out << "Outline:\n" << to_outline(summary) << "\n";
    }
    out << "File: " << text.path << "\n\n";
    out << "```python\n" << text.text;
    if (text.text.empty() || text.text.back() != '\n') out << "\n";
    out << "```\n";
    return out.str();
}

struct UnitTriple {
    int kind;
    std::string name;
    int params;
    bool operator<(const UnitTriple& o) const {
        return std::tie(kind, name, params) < std::tie(o.kind, o.name, o.params);
    }
};

std::map<UnitTriple, std::vector<std::string>> triples_of(const CodeSummary& s) {
    std::map<UnitTriple, std::vector<std::string>> out;
    for (const auto& u : s.units) {
        if (u.kind == UnitKind::module) continue;
        UnitTriple t{static_cast<int>(u.kind), u.name, parameter_count(u.signature)};
        out[t].push_back(u.qualified_name);
    }
    return out;
}

} // namespace

bool needs_augmentation(const CodeSummary& summary, double threshold) {
    return summary.comment_density < threshold;
}

std::string source_text_hash(const SourceText& text) {
    return sha256_hex(text.text);
}

std::string summary_digest_of(const CodeSummary& summary) {
    return sha256_hex(summary_to_json(summary).dump());
}

AugmentationOutcome augment_comments(const SourceText& text, const CodeSummary& summary,
                                     Gateway& gateway, const DistillConfig& config) {
    PromptRequest request;
    request.system_text =
        "You annotate source code. You only ever add comments; the code itself must "
        "remain identical.";
    request.user_text = augment_request_text(text, summary);
    request.temperature = config.temperature;
    request.max_tokens = response_max_tokens(text.text);
    request.tag = "augment";

    CompletionResult result = gateway.complete(request);
    std::string candidate = extract_code(result.text);

    AugmentationOutcome outcome;
    std::string before = strip_comments_normalized(text.text);
    std::string after = strip_comments_normalized(candidate);
    if (before != after) {
        outcome.action = AugmentationOutcome::Action::rejected;
        outcome.reason = "response altered code under comment-stripping normalization";
        return outcome;
    }
    outcome.action = AugmentationOutcome::Action::accepted;
    SourceText augmented;
    augmented.path = text.path;
    augmented.text = candidate;
    augmented.lossy = text.lossy;

    CodeSummary aug_summary = parse_source(augmented, text.path);
    std::int64_t added =
        static_cast<std::int64_t>(aug_summary.comment_lines + aug_summary.docstring_lines) -
        static_cast<std::int64_t>(summary.comment_lines + summary.docstring_lines);
    outcome.reason = added > 0 ? "added " + std::to_string(added) + " comment lines"
                               : "no-op: response added no comments";
    outcome.augmented_text = std::move(augmented);
    return outcome;
}

ReconstructionPrompt distill(const SourceText& text, const CodeSummary& summary,
                             Gateway& gateway, const DistillConfig& config) {
    PromptRequest request;
    request.system_text =
        "You write reconstruction prompts: prompts that direct a language model to "
        "regenerate a source file exactly, in one response.";
    request.user_text = distill_request_text(text, summary);
    request.temperature = config.temperature;
    request.max_tokens = response_max_tokens(text.text);
    request.tag = "distill";

    CompletionResult result = gateway.complete(request);
    if (trim(result.text).empty()) {
        throw gateway_error("empty_response",
                            "backend returned blank text for distillation of " + text.path);
    }

    ReconstructionPrompt prompt;
    prompt.target_path = text.path;
    prompt.prompt_text = result.text;
    prompt.source_hash = source_text_hash(text);
    prompt.summary_digest = summary_digest_of(summary);
    prompt.verbatim_fraction = verbatim_line_fraction(text.text, prompt.prompt_text);
    prompt.verbatim_flagged = prompt.verbatim_fraction > config.verbatim_guard_fraction;
    return prompt;
}

double verbatim_line_fraction(const std::string& source, const std::string& prompt_text) {
    std::set<std::string> prompt_lines;
    std::istringstream pin(prompt_text);
    std::string line;
    while (std::getline(pin, line)) {
        std::string t = trim(line);
        if (!t.empty()) prompt_lines.insert(t);
    }
    std::istringstream sin(source);
    std::int64_t total = 0;
    std::int64_t copied = 0;
    while (std::getline(sin, line)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        ++total;
        if (prompt_lines.count(t)) ++copied;
    }
    if (total == 0) return 0.0;
    return static_cast<double>(copied) / static_cast<double>(total);
}

double structural_f1(const CodeSummary& original, const CodeSummary& regenerated,
                     std::vector<std::string>* missing, std::vector<std::string>* extra) {
    auto orig = triples_of(original);
    auto regen = triples_of(regenerated);

    std::int64_t orig_total = 0, regen_total = 0, matched = 0;
    for (const auto& [t, names] : orig) orig_total += static_cast<std::int64_t>(names.size());
    for (const auto& [t, names] : regen) regen_total += static_cast<std::int64_t>(names.size());

    for (const auto& [t, names] : orig) {
        auto it = regen.find(t);
        size_t have = it == regen.end() ? 0 : it->second.size();
        size_t m = std::min(names.size(), have);
        matched += static_cast<std::int64_t>(m);
        if (missing) {
            for (size_t i = m; i < names.size(); ++i) missing->push_back(names[i]);
        }
    }
    if (extra) {
        for (const auto& [t, names] : regen) {
            auto it = orig.find(t);
            size_t want = it == orig.end() ? 0 : it->second.size();
            for (size_t i = want; i < names.size(); ++i) extra->push_back(names[i]);
        }
    }
    if (orig_total == 0 && regen_total == 0) return 1.0;
    if (orig_total == 0 || regen_total == 0) return 0.0;
    double precision = static_cast<double>(matched) / static_cast<double>(regen_total);
    double recall = static_cast<double>(matched) / static_cast<double>(orig_total);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

RoundTripReport round_trip_verify(const ReconstructionPrompt& prompt, const SourceText& current,
                                  const CodeSummary& original_summary, Gateway& gateway,
                                  const DistillConfig& config) {
    if (source_text_hash(current) != prompt.source_hash) {
        throw input_error("stale_prompt",
                          "reconstruction prompt for " + prompt.target_path +
                              " no longer matches the file; re-run distillation");
    }

    PromptRequest request;
    request.system_text = "Follow the instructions exactly and output only code.";
    request.user_text = prompt.prompt_text;
    request.temperature = config.temperature;
    request.max_tokens = response_max_tokens(current.text);
    request.tag = "reconstruct";

    CompletionResult result = gateway.complete(request);
    std::string code = extract_code(result.text);
    SourceText regen_text;
    regen_text.path = prompt.target_path;
    regen_text.text = code;
    CodeSummary regen = parse_source(regen_text, prompt.target_path);

    RoundTripReport report;
    report.regenerated_status = regen.parse_status;

    if (original_summary.parse_status == ParseStatus::opaque) {
        // No structure to compare; normalized text equality decides.
        bool equal = strip_comments_normalized(current.text) == strip_comments_normalized(code);
        report.similarity = equal ? 1.0 : 0.0;
    } else if (regen.parse_status == ParseStatus::opaque) {
        report.similarity = 0.0;
        for (const auto& u : original_summary.units) {
            if (u.kind != UnitKind::module) report.missing_units.push_back(u.qualified_name);
        }
    } else {
        report.similarity =
            structural_f1(original_summary, regen, &report.missing_units, &report.extra_units);
    }
    report.passed = report.similarity >= config.pass_threshold;
    return report;
}

} // namespace scribe
