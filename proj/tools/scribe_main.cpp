#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "scribe/errors.hpp"
#include "scribe/pipeline.hpp"

namespace {

const char* kind_name(scribe::ErrorKind kind) {
    switch (kind) {
        case scribe::ErrorKind::config: return "config";
        case scribe::ErrorKind::input: return "input";
        case scribe::ErrorKind::gateway: return "gateway";
        case scribe::ErrorKind::budget: return "budget";
        case scribe::ErrorKind::internal: return "internal";
    }
    return "internal";
}

int exit_code_for(scribe::ErrorKind kind) {
    switch (kind) {
        case scribe::ErrorKind::config: return 2;
        case scribe::ErrorKind::input: return 3;
        case scribe::ErrorKind::gateway: return 4;
        case scribe::ErrorKind::budget: return 5;
        case scribe::ErrorKind::internal: return 1;
    }
    return 1;
}

void print_diagnostic(const std::string& code, const std::string& kind,
                      const std::string& message) {
    nlohmann::ordered_json j = {{"error", code}, {"kind", kind}, {"message", message}};
    std::fprintf(stderr, "%s\n", j.dump().c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"scribe: drafts an academic manuscript from a source repository"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_dir;
    std::string backend_choice;
    std::string mock_rules;
    std::int64_t budget = -1;
    int max_iterations = -1;
    bool fixed_clock = false;

    app.add_option("--config", config_path, "TOML-style config file");
    app.add_option("--out", out_dir, "output directory (default: out)");
    app.add_option("--backend", backend_choice, "backend kind override")
        ->check(CLI::IsMember({"http", "mock"}));
    app.add_option("--mock-rules", mock_rules, "mock backend rule table (JSON)");
    app.add_option("--budget", budget, "token budget for the run");
    app.add_option("--max-iterations", max_iterations, "revision iteration cap");
    app.add_flag("--fixed-clock", fixed_clock, "use a constant timestamp in outputs");

    std::string root;
    std::string manuscript_path;
    std::string left_path, right_path;

    auto* scan = app.add_subcommand("scan", "inventory the repository's source files");
    scan->add_option("root", root, "repository root")->required();
    auto* analyze = app.add_subcommand("analyze", "emit structural summaries per file");
    analyze->add_option("root", root, "repository root")->required();
    auto* distill = app.add_subcommand("distill", "build and verify reconstruction prompts");
    distill->add_option("root", root, "repository root")->required();
    auto* generate = app.add_subcommand("generate", "draft the manuscript sections");
    generate->add_option("root", root, "repository root")->required();
    auto* evaluate = app.add_subcommand("evaluate", "score a manuscript's quality");
    evaluate->add_option("manuscript", manuscript_path, "manuscript (.md or sidecar .json)")
        ->required();
    auto* cmp = app.add_subcommand("compare", "compare two manuscripts metric by metric");
    cmp->add_option("left", left_path, "left manuscript")->required();
    cmp->add_option("right", right_path, "right manuscript")->required();
    auto* pipeline = app.add_subcommand("pipeline", "run the full flow end to end");
    pipeline->add_option("root", root, "repository root")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_diagnostic("cli_usage", "config", e.what());
        return 2;
    }

    try {
        scribe::PipelineConfig config =
            config_path.empty() ? scribe::default_config() : scribe::load_config_file(config_path);
        if (!out_dir.empty()) config.output_dir = out_dir;
        if (backend_choice == "mock") config.backend.kind = scribe::BackendKind::mock;
        if (backend_choice == "http") config.backend.kind = scribe::BackendKind::http;
        if (!mock_rules.empty()) config.backend.mock_rules_path = mock_rules;
        if (budget >= 0) config.backend.token_budget = budget;
        if (max_iterations >= 0) config.revision.max_iterations = max_iterations;
        if (fixed_clock) config.fixed_clock = true;
        config.validate();

        if (app.got_subcommand(scan)) {
            scribe::cmd_scan(config, root);
        } else if (app.got_subcommand(analyze)) {
            scribe::cmd_analyze(config, root);
        } else if (app.got_subcommand(distill)) {
            scribe::cmd_distill(config, root);
        } else if (app.got_subcommand(generate)) {
            scribe::cmd_generate(config, root);
        } else if (app.got_subcommand(evaluate)) {
            scribe::cmd_evaluate(config, manuscript_path);
        } else if (app.got_subcommand(cmp)) {
            scribe::cmd_compare(config, left_path, right_path);
        } else if (app.got_subcommand(pipeline)) {
            scribe::cmd_pipeline(config, root);
        }
        return 0;
    } catch (const scribe::Error& e) {
        print_diagnostic(e.code(), kind_name(e.kind()), e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        print_diagnostic("unexpected", "internal", e.what());
        return 1;
    }
}
