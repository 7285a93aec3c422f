#include "scribe/article.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "scribe/digest.hpp"
#include "scribe/errors.hpp"

namespace scribe {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string format_density(double d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", d);
    return buf;
}

// All placeholder names appearing in a template.
std::vector<std::string> placeholders_of(const std::string& tmpl) {
    std::vector<std::string> out;
    size_t pos = 0;
    while ((pos = tmpl.find("{{", pos)) != std::string::npos) {
        size_t end = tmpl.find("}}", pos + 2);
        if (end == std::string::npos) break;
        out.push_back(tmpl.substr(pos + 2, end - pos - 2));
        pos = end + 2;
    }
    return out;
}

std::string replace_all(std::string text, const std::string& key, const std::string& value) {
    size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        text.replace(pos, key.size(), value);
        pos += value.size();
    }
    return text;
}

std::string outlines_text(const ContextBundle& context) {
    std::string out;
    for (const auto& [path, outline] : context.outlines) {
        out += outline;
        out += "\n";
    }
    return out;
}

std::string prompts_text(const ContextBundle& context) {
    std::string out;
    for (const auto& [path, text] : context.prompts) {
        out += "--- reconstruction prompt for " + path + " ---\n";
        out += text;
        if (out.back() != '\n') out += '\n';
    }
    return out;
}

} // namespace

const std::vector<std::string>& canonical_section_order() {
    static const std::vector<std::string> order = {
        "title", "abstract", "keywords", "introduction", "methods", "results", "discussion"};
    return order;
}

const std::vector<std::string>& generation_order() {
    static const std::vector<std::string> order = {
        "introduction", "methods", "results", "discussion", "title", "abstract", "keywords"};
    return order;
}

std::string section_heading(const std::string& id) {
    std::string out = id;
    if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

const std::string* ManuscriptDraft::section_text(const std::string& id) const {
    for (const auto& [sid, text] : sections) {
        if (sid == id) return &text;
    }
    return nullptr;
}

std::string RepoDigest::to_text() const {
    std::ostringstream out;
    out << "repository: " << file_count << " files, " << total_lines << " lines\n";
    out << "units: " << class_count << " classes, " << function_count << " functions, "
        << method_count << " methods\n";
    out << "mean comment density: " << format_density(mean_density) << "\n";
    if (!import_edges.empty()) {
        out << "imports:\n";
        for (const auto& [file, mod] : import_edges) {
            out << "  " << file << " -> " << mod << "\n";
        }
    }
    return out.str();
}

std::vector<SectionSpec> default_section_specs() {
    const std::string context_block =
        "Repository digest:\n{{repo_digest}}\n"
        "File outlines:\n{{outlines}}";
    std::vector<SectionSpec> specs;

    SectionSpec intro;
    intro.id = "introduction";
    intro.system_text = "You draft academic prose describing a software repository.";
    intro.prompt_template =
        "Write the introduction section of an academic article about the software "
        "repository described below. Explain the motivation and the problem the software "
        "addresses. Aim for {{word_target}} words.\n\n" +
        context_block;
    intro.word_target = 500;
    specs.push_back(intro);

    SectionSpec methods;
    methods.id = "methods";
    methods.system_text = "You draft academic prose describing a software repository.";
    methods.prompt_template =
        "Write the methods section of an academic article about the software repository "
        "described below. Describe the architecture and what each component does. Aim for "
        "{{word_target}} words.\n\n" +
        context_block +
        "\nReconstruction notes:\n{{reconstruction_prompts}}";
    methods.word_target = 700;
    specs.push_back(methods);

    SectionSpec results;
    results.id = "results";
    results.system_text = "You draft academic prose describing a software repository.";
    results.prompt_template =
        "Write the results section of an academic article about the software repository "
        "described below, covering what the software produces and its observable behavior. "
        "Aim for {{word_target}} words.\n\n" +
        context_block + "\nMethods section for reference:\n{{section:methods}}";
    results.word_target = 500;
    specs.push_back(results);

    SectionSpec discussion;
    discussion.id = "discussion";
    discussion.system_text = "You draft academic prose describing a software repository.";
    discussion.prompt_template =
        "Write the discussion section of an academic article about the software repository "
        "described below: implications, limitations, and future directions. Aim for "
        "{{word_target}} words.\n\nIntroduction:\n{{section:introduction}}\n"
        "Results:\n{{section:results}}";
    discussion.word_target = 600;
    specs.push_back(discussion);

    SectionSpec title;
    title.id = "title";
    title.system_text = "You write concise academic titles.";
    title.prompt_template =
        "Write a single-line title (at most {{word_target}} words) for an academic article "
        "with the following sections.\n\nIntroduction:\n{{section:introduction}}\n"
        "Methods:\n{{section:methods}}\nResults:\n{{section:results}}\n"
        "Discussion:\n{{section:discussion}}";
    title.word_target = 12;
    specs.push_back(title);

    SectionSpec abstract;
    abstract.id = "abstract";
    abstract.system_text = "You write academic abstracts.";
    abstract.prompt_template =
        "Write the abstract for an academic article with the following sections. Aim for "
        "{{word_target}} words.\n\nIntroduction:\n{{section:introduction}}\n"
        "Methods:\n{{section:methods}}\nResults:\n{{section:results}}\n"
        "Discussion:\n{{section:discussion}}";
    abstract.word_target = 200;
    specs.push_back(abstract);

    SectionSpec keywords;
    keywords.id = "keywords";
    keywords.system_text = "You select academic keywords.";
    keywords.prompt_template =
        "List 6-10 comma-separated keywords for an article with this abstract.\n\n"
        "Abstract:\n{{section:abstract}}";
    keywords.word_target = 30;
    specs.push_back(keywords);

    for (size_t i = 0; i < specs.size(); ++i) {
        specs[i].generation_order = static_cast<int>(i) + 1;
    }
    return specs;
}

std::string request_digest(const PromptRequest& request) {
    nlohmann::ordered_json j;
    j["system_text"] = request.system_text;
    j["user_text"] = request.user_text;
    j["temperature"] = request.temperature;
    j["max_tokens"] = request.max_tokens;
    j["tag"] = request.tag;
    return sha256_hex(j.dump());
}

std::string result_digest(const CompletionResult& result) {
    nlohmann::ordered_json j;
    j["text"] = result.text;
    j["prompt_tokens"] = result.prompt_tokens;
    j["completion_tokens"] = result.completion_tokens;
    j["backend_id"] = result.backend_id;
    return sha256_hex(j.dump());
}

ContextBundle assemble_context(const std::vector<CodeSummary>& summaries,
                               const std::vector<ReconstructionPrompt>& prompts,
                               std::int64_t budget) {
    if (summaries.empty()) {
        throw input_error("empty_repository", "no code summaries; nothing to describe");
    }

    ContextBundle bundle;
    RepoDigest& digest = bundle.repo_digest;
    digest.file_count = static_cast<int>(summaries.size());
    double density_sum = 0.0;
    for (const auto& s : summaries) {
        digest.total_lines += s.loc;
        density_sum += s.comment_density;
        for (const auto& u : s.units) {
            switch (u.kind) {
                case UnitKind::cls: ++digest.class_count; break;
                case UnitKind::function: ++digest.function_count; break;
                case UnitKind::method: ++digest.method_count; break;
                case UnitKind::module: break;
            }
        }
        for (const auto& imp : s.imports) {
            digest.import_edges.push_back({s.file, imp});
        }
    }
    digest.mean_density = density_sum / static_cast<double>(summaries.size());

    std::map<std::string, std::uint64_t> loc_by_path;
    for (const auto& s : summaries) {
        bundle.outlines.push_back({s.file, to_outline(s)});
        loc_by_path[s.file] = s.loc;
    }
    for (const auto& p : prompts) {
        bundle.prompts.push_back({p.target_path, p.prompt_text});
    }

    auto estimate = [&bundle]() {
        std::int64_t total = estimate_tokens(bundle.repo_digest.to_text());
        for (const auto& [path, outline] : bundle.outlines) total += estimate_tokens(outline);
        for (const auto& [path, text] : bundle.prompts) total += estimate_tokens(text);
        return total;
    };

    auto smallest_first = [&loc_by_path](const std::pair<std::string, std::string>& a,
                                         const std::pair<std::string, std::string>& b) {
        auto la = loc_by_path.count(a.first) ? loc_by_path[a.first] : 0;
        auto lb = loc_by_path.count(b.first) ? loc_by_path[b.first] : 0;
        if (la != lb) return la < lb;
        return a.first < b.first;
    };

    bundle.token_estimate = estimate();
    // Trim priority: verbatim prompt texts first, then outlines for the
    // smallest files; the repo digest always stays.
    std::vector<std::pair<std::string, std::string>> prompt_order = bundle.prompts;
    std::sort(prompt_order.begin(), prompt_order.end(), smallest_first);
    for (const auto& victim : prompt_order) {
        if (bundle.token_estimate <= budget) break;
        auto it = std::find_if(bundle.prompts.begin(), bundle.prompts.end(),
                               [&](const auto& p) { return p.first == victim.first; });
        if (it == bundle.prompts.end()) continue;
        bundle.trim_log.push_back("dropped reconstruction prompt for " + it->first + " (" +
                                  std::to_string(estimate_tokens(it->second)) + " tokens)");
        bundle.prompts.erase(it);
        bundle.token_estimate = estimate();
    }
    std::vector<std::pair<std::string, std::string>> outline_order = bundle.outlines;
    std::sort(outline_order.begin(), outline_order.end(), smallest_first);
    for (const auto& victim : outline_order) {
        if (bundle.token_estimate <= budget) break;
        auto it = std::find_if(bundle.outlines.begin(), bundle.outlines.end(),
                               [&](const auto& p) { return p.first == victim.first; });
        if (it == bundle.outlines.end()) continue;
        bundle.trim_log.push_back("dropped outline for " + it->first + " (" +
                                  std::to_string(estimate_tokens(it->second)) + " tokens)");
        bundle.outlines.erase(it);
        bundle.token_estimate = estimate();
    }
    return bundle;
}

std::string generate_section(const SectionSpec& spec, const ContextBundle& context,
                             const std::map<std::string, std::string>& prior, Gateway& gateway,
                             std::int64_t context_budget, double temperature,
                             std::vector<GenerationRecord>* trace) {
    // Bind placeholders; anything unbound is a configuration error and must
    // surface before the LLM is touched.
    for (const auto& name : placeholders_of(spec.prompt_template)) {
        if (name == "repo_digest" || name == "outlines" || name == "reconstruction_prompts" ||
            name == "word_target") {
            continue;
        }
        if (name.rfind("section:", 0) == 0) {
            std::string dep = name.substr(8);
            if (!prior.count(dep)) {
                throw config_error("unbound_placeholder",
                                   "section template '" + spec.id + "' references '" + name +
                                       "' which is not generated yet");
            }
            continue;
        }
        throw config_error("unbound_placeholder",
                           "section template '" + spec.id + "' references unknown placeholder '" +
                               name + "'");
    }

    auto render = [&](bool with_prompts, const std::string& outlines) {
        std::string text = spec.prompt_template;
        text = replace_all(text, "{{word_target}}", std::to_string(spec.word_target));
        text = replace_all(text, "{{repo_digest}}", context.repo_digest.to_text());
        text = replace_all(text, "{{outlines}}", outlines);
        text = replace_all(text, "{{reconstruction_prompts}}",
                           with_prompts ? prompts_text(context) : "(omitted for budget)\n");
        for (const auto& [id, body] : prior) {
            text = replace_all(text, "{{section:" + id + "}}", body);
        }
        return text;
    };

    std::string user_text = render(true, outlines_text(context));
    if (estimate_tokens(user_text) > context_budget) {
        user_text = render(false, outlines_text(context));
    }
    if (estimate_tokens(user_text) > context_budget) {
        // Truncate the outline block until the request fits.
        std::string outlines = outlines_text(context);
        std::int64_t overflow_chars =
            (estimate_tokens(user_text) - context_budget) * 4;
        std::int64_t keep =
            std::max<std::int64_t>(0, static_cast<std::int64_t>(outlines.size()) - overflow_chars);
        user_text = render(false, outlines.substr(0, static_cast<size_t>(keep)));
    }
    if (estimate_tokens(user_text) > context_budget) {
        user_text = user_text.substr(0, static_cast<size_t>(context_budget * 4));
    }

    PromptRequest request;
    request.system_text = spec.system_text;
    request.user_text = user_text;
    request.temperature = temperature;
    request.max_tokens = std::max(256, spec.word_target * 2);
    request.tag = "section:" + spec.id;

    CompletionResult result = gateway.complete(request);
    if (trim(result.text).empty()) {
        throw gateway_error("empty_response", "backend returned blank text for " + request.tag);
    }
    if (trace) {
        GenerationRecord rec;
        rec.section_id = spec.id;
        rec.request = request;
        rec.request_digest = request_digest(request);
        rec.response_digest = result_digest(result);
        rec.response_text = result.text;
        trace->push_back(std::move(rec));
    }
    return result.text;
}

ManuscriptDraft generate_manuscript(const std::vector<CodeSummary>& summaries,
                                    const std::vector<ReconstructionPrompt>& prompts,
                                    const ArticleConfig& config, const ManuscriptMeta& meta,
                                    Gateway& gateway, ContextBundle* context_out,
                                    std::vector<GenerationRecord>* partial_trace) {
    if (summaries.empty()) {
        throw input_error("empty_repository", "no code summaries; nothing to describe");
    }

    // Exactly the canonical section set, each id once.
    std::set<std::string> ids;
    for (const auto& spec : config.specs) {
        if (!ids.insert(spec.id).second) {
            throw config_error("duplicate_section", "section id appears twice: " + spec.id);
        }
    }
    for (const auto& id : canonical_section_order()) {
        if (!ids.count(id)) {
            throw config_error("missing_section", "no spec for canonical section: " + id);
        }
    }
    if (ids.size() != canonical_section_order().size()) {
        throw config_error("unknown_section", "section specs outside the canonical set");
    }

    // Check every template's placeholders against the generation order up
    // front, so a bad config never reaches the backend.
    {
        std::set<std::string> available;
        for (const auto& id : generation_order()) {
            auto it = std::find_if(config.specs.begin(), config.specs.end(),
                                   [&](const SectionSpec& s) { return s.id == id; });
            for (const auto& name : placeholders_of(it->prompt_template)) {
                if (name == "repo_digest" || name == "outlines" ||
                    name == "reconstruction_prompts" || name == "word_target") {
                    continue;
                }
                if (name.rfind("section:", 0) == 0 && available.count(name.substr(8))) continue;
                throw config_error("unbound_placeholder",
                                   "section template '" + id + "' references '" + name +
                                       "' which is not bound at generation time");
            }
            available.insert(id);
        }
    }

    ContextBundle context = assemble_context(summaries, prompts, config.context_budget);
    if (context_out) *context_out = context;

    std::vector<GenerationRecord> local_trace;
    std::vector<GenerationRecord>* trace = partial_trace ? partial_trace : &local_trace;
    std::map<std::string, std::string> generated;
    for (const auto& id : generation_order()) {
        auto it = std::find_if(config.specs.begin(), config.specs.end(),
                               [&](const SectionSpec& s) { return s.id == id; });
        std::string text = generate_section(*it, context, generated, gateway,
                                            config.context_budget, config.temperature, trace);
        generated[id] = text;
    }

    ManuscriptDraft draft;
    draft.metadata = meta;
    draft.metadata.backend_id = gateway.backend_id();
    draft.title = trim(generated["title"]);
    for (const auto& id : canonical_section_order()) {
        draft.sections.push_back({id, id == "title" ? draft.title : trim(generated[id])});
    }
    draft.trace = std::move(*trace);
    return draft;
}

std::string render_markdown(const ManuscriptDraft& draft) {
    std::ostringstream out;
    out << "# " << draft.title << "\n";
    for (const auto& [id, text] : draft.sections) {
        if (id == "title") continue;
        out << "\n## " << section_heading(id) << "\n\n" << text << "\n";
    }
    // Static scaffold: the analyzed repository is the one primary artifact.
    out << "\n## References\n\n- " << draft.metadata.source_root
        << " (analyzed source repository, primary artifact)\n";
    return out.str();
}

nlohmann::ordered_json sidecar_json(const ManuscriptDraft& draft) {
    nlohmann::ordered_json j;
    j["title"] = draft.title;
    j["sections"] = nlohmann::ordered_json::array();
    for (const auto& [id, text] : draft.sections) {
        j["sections"].push_back({{"id", id}, {"text", text}});
    }
    j["metadata"] = {{"source_root", draft.metadata.source_root},
                     {"timestamp", draft.metadata.timestamp},
                     {"config_digest", draft.metadata.config_digest},
                     {"backend_id", draft.metadata.backend_id}};
    j["trace"] = nlohmann::ordered_json::array();
    for (const auto& rec : draft.trace) {
        j["trace"].push_back({{"section", rec.section_id},
                              {"request",
                               {{"system_text", rec.request.system_text},
                                {"user_text", rec.request.user_text},
                                {"temperature", rec.request.temperature},
                                {"max_tokens", rec.request.max_tokens},
                                {"tag", rec.request.tag}}},
                              {"request_digest", rec.request_digest},
                              {"response_digest", rec.response_digest},
                              {"response_text", rec.response_text}});
    }
    return j;
}

ManuscriptDraft manuscript_from_markdown(const std::string& markdown) {
    ManuscriptDraft draft;
    std::istringstream in(markdown);
    std::string line;
    std::string current_id;
    std::string current_text;
    auto flush = [&]() {
        if (!current_id.empty()) {
            draft.sections.push_back({current_id, trim(current_text)});
        }
        current_text.clear();
    };
    std::set<std::string> canonical(canonical_section_order().begin(),
                                    canonical_section_order().end());
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) {
            flush();
            current_id.clear();
            draft.title = trim(line.substr(2));
            continue;
        }
        if (line.rfind("## ", 0) == 0) {
            flush();
            std::string heading = trim(line.substr(3));
            std::string id = heading;
            std::transform(id.begin(), id.end(), id.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            current_id = canonical.count(id) ? id : "";
            continue;
        }
        if (!current_id.empty()) {
            current_text += line;
            current_text += "\n";
        }
    }
    flush();
    if (!draft.title.empty()) {
        draft.sections.insert(draft.sections.begin(), {"title", draft.title});
    }
    // Keep canonical presentation order regardless of input order.
    std::vector<std::pair<std::string, std::string>> ordered;
    for (const auto& id : canonical_section_order()) {
        for (const auto& [sid, text] : draft.sections) {
            if (sid == id) {
                ordered.push_back({sid, text});
                break;
            }
        }
    }
    draft.sections = std::move(ordered);
    return draft;
}

ManuscriptDraft manuscript_from_sidecar(const nlohmann::ordered_json& sidecar) {
    ManuscriptDraft draft;
    draft.title = sidecar.value("title", "");
    if (sidecar.contains("sections")) {
        for (const auto& s : sidecar["sections"]) {
            draft.sections.push_back(
                {s.at("id").get<std::string>(), s.at("text").get<std::string>()});
        }
    }
    if (sidecar.contains("metadata")) {
        const auto& m = sidecar["metadata"];
        draft.metadata.source_root = m.value("source_root", "");
        draft.metadata.timestamp = m.value("timestamp", "");
        draft.metadata.config_digest = m.value("config_digest", "");
        draft.metadata.backend_id = m.value("backend_id", "");
    }
    return draft;
}

} // namespace scribe
