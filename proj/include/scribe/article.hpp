#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "scribe/analysis.hpp"
#include "scribe/distill.hpp"
#include "scribe/gateway.hpp"

namespace scribe {

// Presentation order of the manuscript sections.
const std::vector<std::string>& canonical_section_order();
// Order sections are drafted in: body first, title and abstract after, so the
// later ones can cite the earlier ones.
const std::vector<std::string>& generation_order();
// Display heading for a section id ("abstract" -> "Abstract").
std::string section_heading(const std::string& id);

struct SectionSpec {
    std::string id;
    std::string system_text;
    std::string prompt_template; // {{repo_digest}}, {{outlines}},
                                 // {{reconstruction_prompts}}, {{word_target}},
                                 // {{section:<id>}}
    int word_target = 500;
    int generation_order = 0;
};

struct RepoDigest {
    int file_count = 0;
    std::uint64_t total_lines = 0;
    int class_count = 0;
    int function_count = 0;
    int method_count = 0;
    double mean_density = 0.0;
    std::vector<std::pair<std::string, std::string>> import_edges; // file -> module

    std::string to_text() const;
};

struct ContextBundle {
    RepoDigest repo_digest;
    std::vector<std::pair<std::string, std::string>> outlines; // path -> outline, post-trim
    std::vector<std::pair<std::string, std::string>> prompts;  // path -> prompt text, post-trim
    std::int64_t token_estimate = 0;
    std::vector<std::string> trim_log;
};

struct GenerationRecord {
    std::string section_id;
    PromptRequest request;
    std::string request_digest;
    std::string response_digest;
    std::string response_text;
};

struct ManuscriptMeta {
    std::string source_root;
    std::string timestamp;
    std::string config_digest;
    std::string backend_id;
};

struct ManuscriptDraft {
    std::string title;
    std::vector<std::pair<std::string, std::string>> sections; // canonical order
    ManuscriptMeta metadata;
    std::vector<GenerationRecord> trace;

    const std::string* section_text(const std::string& id) const;
};

struct ArticleConfig {
    std::vector<SectionSpec> specs; // defaults from default_section_specs()
    std::int64_t context_budget = 8000;
    double temperature = 0.7;
};

std::vector<SectionSpec> default_section_specs();

std::string request_digest(const PromptRequest& request);
std::string result_digest(const CompletionResult& result);

// Builds the per-repository context and trims it to the token budget:
// reconstruction-prompt texts go first (smallest file first), then outlines
// for the smallest files; the repo digest is never dropped. Throws
// input_error("empty_repository") when summaries is empty.
ContextBundle assemble_context(const std::vector<CodeSummary>& summaries,
                               const std::vector<ReconstructionPrompt>& prompts,
                               std::int64_t budget);

// Drafts one section. The request is tagged "section:<id>"; unbound template
// placeholders are a config error raised before any LLM call.
std::string generate_section(const SectionSpec& spec, const ContextBundle& context,
                             const std::map<std::string, std::string>& prior, Gateway& gateway,
                             std::int64_t context_budget, double temperature,
                             std::vector<GenerationRecord>* trace);

ManuscriptDraft generate_manuscript(const std::vector<CodeSummary>& summaries,
                                    const std::vector<ReconstructionPrompt>& prompts,
                                    const ArticleConfig& config, const ManuscriptMeta& meta,
                                    Gateway& gateway, ContextBundle* context_out = nullptr,
                                    std::vector<GenerationRecord>* partial_trace = nullptr);

std::string render_markdown(const ManuscriptDraft& draft);
nlohmann::ordered_json sidecar_json(const ManuscriptDraft& draft);

// Reads a manuscript back from Markdown headings (for evaluate/compare on
// plain files). Unknown headings are ignored; the H1 becomes the title.
ManuscriptDraft manuscript_from_markdown(const std::string& markdown);
ManuscriptDraft manuscript_from_sidecar(const nlohmann::ordered_json& sidecar);

} // namespace scribe
