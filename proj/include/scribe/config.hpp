#pragma once

#include <string>

#include "json.hpp"

#include "scribe/article.hpp"
#include "scribe/distill.hpp"
#include "scribe/gateway.hpp"
#include "scribe/ingest.hpp"
#include "scribe/metrics.hpp"
#include "scribe/revision.hpp"

namespace scribe {

// Effective settings for one run. Every field has a default, so an absent or
// empty config file still yields a working mock-backend pipeline.
struct PipelineConfig {
    IngestRules ingest;
    BackendConfig backend;
    DistillConfig distill;
    ArticleConfig article;
    QualityPolicy quality;
    RevisionPolicy revision;
    std::string output_dir = "out";
    bool fixed_clock = false;

    nlohmann::ordered_json to_json() const; // canonical, order-stable
    std::string digest() const;
    void validate() const;
};

PipelineConfig default_config();

// Loads a TOML-style key-value document: [section] tables of key = value
// lines where values are strings, integers, floats, booleans, or arrays of
// strings. Unknown sections or keys are a config error.
PipelineConfig load_config_file(const std::string& path);
PipelineConfig parse_config_text(const std::string& text);

} // namespace scribe
