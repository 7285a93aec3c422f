#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "scribe/config.hpp"

namespace scribe {

struct StageStatus {
    std::string name;
    std::string status; // "ok" | "failed: <code>" | "skipped"
    std::string detail;
};

struct RunManifest {
    std::string config_digest;
    std::string inventory_digest;
    std::vector<StageStatus> stages;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::vector<std::pair<std::string, std::string>> outputs; // filename -> digest

    nlohmann::ordered_json to_json() const;
};

// Stage commands. Each writes only under config.output_dir, reads prior-stage
// JSON artifacts when present, and throws scribe::Error on failure (the CLI
// maps error kinds to exit codes).
void cmd_scan(const PipelineConfig& config, const std::string& root);
void cmd_analyze(const PipelineConfig& config, const std::string& root);
void cmd_distill(const PipelineConfig& config, const std::string& root);
void cmd_generate(const PipelineConfig& config, const std::string& root);
void cmd_evaluate(const PipelineConfig& config, const std::string& manuscript_path);
// Prints the comparison table on stdout in addition to writing comparison.json.
void cmd_compare(const PipelineConfig& config, const std::string& left_path,
                 const std::string& right_path);
// Full flow: scan -> analyze -> (augment) -> distill+verify -> generate ->
// revise -> evaluate. Emits inventory.json, manuscript.md,
// manuscript.sidecar.json, quality.json, and manifest.json; the manifest
// records per-stage status even when a stage fails.
void cmd_pipeline(const PipelineConfig& config, const std::string& root);

std::string current_timestamp(bool fixed_clock);

} // namespace scribe
