#include "scribe/pipeline.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "scribe/digest.hpp"
#include "scribe/errors.hpp"

namespace fs = std::filesystem;

namespace scribe {

namespace {

struct AnalyzedFile {
    FileRecord record;
    SourceText text;     // possibly replaced by an accepted augmentation
    CodeSummary summary; // summary of .text
    AugmentationOutcome::Action augmentation = AugmentationOutcome::Action::skipped;
    std::string augmentation_reason;
};

void write_file(const fs::path& out_dir, const std::string& name, const std::string& content) {
    fs::create_directories((out_dir / name).parent_path());
    std::ofstream out(out_dir / name, std::ios::binary);
    if (!out) {
        throw input_error("write_failed", "cannot write " + (out_dir / name).string());
    }
    out << content;
}

std::string dump_pretty(const nlohmann::ordered_json& j) {
    return j.dump(2) + "\n";
}

RepoInventory load_or_scan(const PipelineConfig& config, const std::string& root) {
    fs::path artifact = fs::path(config.output_dir) / "inventory.json";
    if (fs::exists(artifact)) {
        std::ifstream in(artifact);
        nlohmann::ordered_json j;
        try {
            in >> j;
            return inventory_from_json(j);
        } catch (const std::exception&) {
            // fall through to a fresh scan on any artifact damage
        }
    }
    return scan_repository(root, config.ingest);
}

std::vector<AnalyzedFile> analyze_files(const RepoInventory& inventory) {
    std::vector<AnalyzedFile> out;
    for (const auto& record : inventory.files) {
        AnalyzedFile f;
        f.record = record;
        f.text = read_source(record, inventory.root);
        f.summary = parse_source(f.text, record.path);
        out.push_back(std::move(f));
    }
    return out;
}

void run_augmentation(std::vector<AnalyzedFile>& files, const PipelineConfig& config,
                      Gateway& gateway) {
    for (auto& f : files) {
        if (!needs_augmentation(f.summary, config.distill.augmentation_threshold)) {
            f.augmentation = AugmentationOutcome::Action::skipped;
            f.augmentation_reason = "density above threshold";
            continue;
        }
        AugmentationOutcome outcome =
            augment_comments(f.text, f.summary, gateway, config.distill);
        f.augmentation = outcome.action;
        f.augmentation_reason = outcome.reason;
        if (outcome.action == AugmentationOutcome::Action::accepted && outcome.augmented_text) {
            f.text = *outcome.augmented_text;
            f.summary = parse_source(f.text, f.record.path);
        }
    }
}

const char* augmentation_name(AugmentationOutcome::Action a) {
    switch (a) {
        case AugmentationOutcome::Action::skipped: return "skipped";
        case AugmentationOutcome::Action::accepted: return "accepted";
        case AugmentationOutcome::Action::rejected: return "rejected";
    }
    return "skipped";
}

struct DistillRecord {
    ReconstructionPrompt prompt;
    RoundTripReport round_trip;
    AugmentationOutcome::Action augmentation;
    std::string augmentation_reason;
};

nlohmann::ordered_json distill_record_json(const DistillRecord& r) {
    nlohmann::ordered_json j;
    j["target_path"] = r.prompt.target_path;
    j["prompt_text"] = r.prompt.prompt_text;
    j["source_hash"] = r.prompt.source_hash;
    j["summary_digest"] = r.prompt.summary_digest;
    j["verbatim_fraction"] = r.prompt.verbatim_fraction;
    j["verbatim_flagged"] = r.prompt.verbatim_flagged;
    j["augmentation"] = {{"action", augmentation_name(r.augmentation)},
                         {"reason", r.augmentation_reason}};
    j["round_trip"] = {{"similarity", r.round_trip.similarity},
                       {"passed", r.round_trip.passed},
                       {"missing_units", r.round_trip.missing_units},
                       {"extra_units", r.round_trip.extra_units},
                       {"regenerated_status", to_string(r.round_trip.regenerated_status)}};
    return j;
}

std::vector<DistillRecord> run_distillation(const std::vector<AnalyzedFile>& files,
                                            const PipelineConfig& config, Gateway& gateway) {
    std::vector<DistillRecord> records;
    for (const auto& f : files) {
        DistillRecord rec;
        rec.augmentation = f.augmentation;
        rec.augmentation_reason = f.augmentation_reason;
        rec.prompt = distill(f.text, f.summary, gateway, config.distill);
        rec.round_trip =
            round_trip_verify(rec.prompt, f.text, f.summary, gateway, config.distill);
        records.push_back(std::move(rec));
    }
    return records;
}

ManuscriptMeta make_meta(const PipelineConfig& config, const std::string& root_abs) {
    ManuscriptMeta meta;
    meta.source_root = root_abs;
    meta.timestamp = current_timestamp(config.fixed_clock);
    meta.config_digest = config.digest();
    return meta;
}

ManuscriptDraft load_manuscript(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("manuscript_missing", "cannot open manuscript: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
        nlohmann::ordered_json j = nlohmann::ordered_json::parse(buf.str(), nullptr, false);
        if (j.is_discarded()) {
            throw input_error("manuscript_malformed", "not valid JSON: " + path);
        }
        return manuscript_from_sidecar(j);
    }
    return manuscript_from_markdown(buf.str());
}

} // namespace

std::string current_timestamp(bool fixed_clock) {
    if (fixed_clock) return "1970-01-01T00:00:00Z";
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::ordered_json RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["config_digest"] = config_digest;
    j["inventory_digest"] = inventory_digest;
    j["stages"] = nlohmann::ordered_json::array();
    for (const auto& s : stages) {
        j["stages"].push_back({{"name", s.name}, {"status", s.status}, {"detail", s.detail}});
    }
    j["tokens"] = {{"prompt", prompt_tokens},
                   {"completion", completion_tokens},
                   {"total", prompt_tokens + completion_tokens}};
    j["outputs"] = nlohmann::ordered_json::array();
    for (const auto& [path, digest] : outputs) {
        j["outputs"].push_back({{"path", path}, {"digest", digest}});
    }
    return j;
}

void cmd_scan(const PipelineConfig& config, const std::string& root) {
    RepoInventory inventory = scan_repository(root, config.ingest);
    write_file(config.output_dir, "inventory.json", dump_pretty(inventory_to_json(inventory)));
}

void cmd_analyze(const PipelineConfig& config, const std::string& root) {
    RepoInventory inventory = load_or_scan(config, root);
    std::vector<AnalyzedFile> files = analyze_files(inventory);

    double density_sum = 0.0;
    std::uint64_t total_units = 0;
    for (const auto& f : files) {
        nlohmann::ordered_json j = summary_to_json(f.summary);
        write_file(config.output_dir, "analysis/" + f.record.path + ".json", dump_pretty(j));
        density_sum += f.summary.comment_density;
        total_units += f.summary.units.size();
    }
    nlohmann::ordered_json rollup;
    rollup["files"] = files.size();
    rollup["total_lines"] = inventory.total_lines;
    rollup["total_units"] = total_units;
    rollup["mean_comment_density"] =
        files.empty() ? 0.0 : density_sum / static_cast<double>(files.size());
    write_file(config.output_dir, "analysis_summary.json", dump_pretty(rollup));
}

void cmd_distill(const PipelineConfig& config, const std::string& root) {
    auto gateway = make_gateway(config.backend);
    RepoInventory inventory = load_or_scan(config, root);
    std::vector<AnalyzedFile> files = analyze_files(inventory);
    run_augmentation(files, config, *gateway);
    std::vector<DistillRecord> records = run_distillation(files, config, *gateway);

    std::string lines;
    for (const auto& rec : records) {
        lines += distill_record_json(rec).dump();
        lines += "\n";
    }
    write_file(config.output_dir, "distill.jsonl", lines);
}

void cmd_generate(const PipelineConfig& config, const std::string& root) {
    auto gateway = make_gateway(config.backend);
    RepoInventory inventory = load_or_scan(config, root);
    std::vector<AnalyzedFile> files = analyze_files(inventory);
    run_augmentation(files, config, *gateway);

    // Reuse distill.jsonl when an earlier stage already produced it.
    std::vector<ReconstructionPrompt> prompts;
    fs::path artifact = fs::path(config.output_dir) / "distill.jsonl";
    if (fs::exists(artifact)) {
        std::ifstream in(artifact);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            nlohmann::ordered_json j = nlohmann::ordered_json::parse(line, nullptr, false);
            if (j.is_discarded()) continue;
            ReconstructionPrompt p;
            p.target_path = j.value("target_path", "");
            p.prompt_text = j.value("prompt_text", "");
            p.source_hash = j.value("source_hash", "");
            p.summary_digest = j.value("summary_digest", "");
            prompts.push_back(std::move(p));
        }
    } else {
        for (const auto& rec : run_distillation(files, config, *gateway)) {
            prompts.push_back(rec.prompt);
        }
    }

    std::vector<CodeSummary> summaries;
    for (const auto& f : files) summaries.push_back(f.summary);

    ContextBundle context;
    ManuscriptDraft draft = generate_manuscript(summaries, prompts, config.article,
                                                make_meta(config, inventory.root), *gateway,
                                                &context);
    write_file(config.output_dir, "manuscript.md", render_markdown(draft));
    nlohmann::ordered_json sidecar = sidecar_json(draft);
    sidecar["context"] = {{"token_estimate", context.token_estimate},
                          {"trim_log", context.trim_log}};
    write_file(config.output_dir, "manuscript.sidecar.json", dump_pretty(sidecar));
}

void cmd_evaluate(const PipelineConfig& config, const std::string& manuscript_path) {
    ManuscriptDraft draft = load_manuscript(manuscript_path);
    QualityReport report = evaluate(draft, config.quality);
    write_file(config.output_dir, "quality.json", dump_pretty(quality_report_to_json(report)));
}

void cmd_compare(const PipelineConfig& config, const std::string& left_path,
                 const std::string& right_path) {
    ManuscriptDraft left = load_manuscript(left_path);
    ManuscriptDraft right = load_manuscript(right_path);
    ComparisonReport report = compare(left, right, config.quality,
                                      fs::path(left_path).filename().string(),
                                      fs::path(right_path).filename().string());
    write_file(config.output_dir, "comparison.json",
               dump_pretty(comparison_report_to_json(report)));
    std::fputs(report.summary.c_str(), stdout);
}

void cmd_pipeline(const PipelineConfig& config, const std::string& root) {
    // Secrets and config are checked before any write or network call.
    auto gateway = make_gateway(config.backend);

    RunManifest manifest;
    manifest.config_digest = config.digest();
    const std::vector<std::string> stage_names = {"scan",     "analyze", "augment", "distill",
                                                  "generate", "revise",  "evaluate"};
    for (const auto& name : stage_names) {
        manifest.stages.push_back({name, "skipped", ""});
    }
    auto stage = [&manifest](const std::string& name) -> StageStatus& {
        for (auto& s : manifest.stages) {
            if (s.name == name) return s;
        }
        throw internal_error("unknown_stage", name);
    };
    auto emit = [&](const std::string& name, const std::string& content) {
        write_file(config.output_dir, name, content);
        manifest.outputs.push_back({name, sha256_hex(content)});
    };
    auto write_manifest = [&]() {
        manifest.prompt_tokens = gateway->ledger().spent_prompt();
        manifest.completion_tokens = gateway->ledger().spent_completion();
        write_file(config.output_dir, "manifest.json", dump_pretty(manifest.to_json()));
    };

    std::string current_stage = "scan";
    try {
        RepoInventory inventory = scan_repository(root, config.ingest);
        std::string inventory_doc = dump_pretty(inventory_to_json(inventory));
        manifest.inventory_digest = sha256_hex(inventory_doc);
        emit("inventory.json", inventory_doc);
        stage("scan") = {"scan", "ok",
                         std::to_string(inventory.files.size()) + " files, " +
                             std::to_string(inventory.skipped.size()) + " skipped"};

        current_stage = "analyze";
        std::vector<AnalyzedFile> files = analyze_files(inventory);
        stage("analyze") = {"analyze", "ok", std::to_string(files.size()) + " files parsed"};

        current_stage = "augment";
        run_augmentation(files, config, *gateway);
        int accepted = 0, rejected = 0;
        for (const auto& f : files) {
            if (f.augmentation == AugmentationOutcome::Action::accepted) ++accepted;
            if (f.augmentation == AugmentationOutcome::Action::rejected) ++rejected;
        }
        stage("augment") = {"augment", "ok",
                            std::to_string(accepted) + " accepted, " +
                                std::to_string(rejected) + " rejected"};

        current_stage = "distill";
        std::vector<DistillRecord> records = run_distillation(files, config, *gateway);
        int round_trip_passed = 0;
        for (const auto& rec : records) {
            if (rec.round_trip.passed) ++round_trip_passed;
        }
        stage("distill") = {"distill", "ok",
                            std::to_string(round_trip_passed) + "/" +
                                std::to_string(records.size()) + " round trips passed"};

        current_stage = "generate";
        std::vector<CodeSummary> summaries;
        std::vector<ReconstructionPrompt> prompts;
        for (const auto& f : files) summaries.push_back(f.summary);
        for (const auto& rec : records) prompts.push_back(rec.prompt);

        ContextBundle context;
        std::vector<GenerationRecord> partial_trace;
        ManuscriptDraft draft;
        try {
            draft = generate_manuscript(summaries, prompts, config.article,
                                        make_meta(config, inventory.root), *gateway, &context,
                                        &partial_trace);
        } catch (...) {
            // Persist whatever trace exists for debugging, then abort.
            nlohmann::ordered_json partial = nlohmann::ordered_json::array();
            for (const auto& rec : partial_trace) {
                partial.push_back({{"section", rec.section_id},
                                   {"request_digest", rec.request_digest},
                                   {"response_digest", rec.response_digest}});
            }
            write_file(config.output_dir, "trace.partial.json", dump_pretty(partial));
            throw;
        }
        stage("generate") = {"generate", "ok",
                             std::to_string(draft.sections.size()) + " sections"};

        current_stage = "revise";
        RevisionTrace revision_trace;
        draft = revise(draft, config.revision, *gateway, revision_trace);
        stage("revise") = {"revise", "ok",
                           std::to_string(revision_trace.iterations.size()) + " iterations"};

        current_stage = "evaluate";
        QualityReport report = evaluate(draft, config.quality);
        stage("evaluate") = {"evaluate", "ok",
                             std::string("passed=") + (report.passed ? "true" : "false")};

        emit("manuscript.md", render_markdown(draft));
        nlohmann::ordered_json sidecar = sidecar_json(draft);
        sidecar["context"] = {{"token_estimate", context.token_estimate},
                              {"trim_log", context.trim_log}};
        sidecar["distillation"] = nlohmann::ordered_json::array();
        for (const auto& rec : records) {
            sidecar["distillation"].push_back(distill_record_json(rec));
        }
        sidecar["revision"] = revision_trace_to_json(revision_trace);
        emit("manuscript.sidecar.json", dump_pretty(sidecar));
        emit("quality.json", dump_pretty(quality_report_to_json(report)));

        write_manifest();
    } catch (const Error& e) {
        stage(current_stage) = {current_stage, "failed: " + e.code(), e.what()};
        write_manifest();
        throw;
    }
}

} // namespace scribe
