#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RunResult run_cli(const std::string& args) {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() / "scribe_cli_io";
    fs::create_directories(dir);
    fs::path out_file = dir / ("out" + std::to_string(++counter));
    fs::path err_file = dir / ("err" + std::to_string(counter));
    std::string cmd = std::string(SCRIBE_BIN) + " " + args + " >" + out_file.string() + " 2>" +
                      err_file.string();
    int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

fs::path fixtures() {
    return fs::path(SCRIBE_FIXTURES_DIR);
}

fs::path fresh_out(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("scribe_cli_" + tag);
    fs::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("scan on an empty directory exits 0 with an empty inventory") {
    fs::path repo = fresh_out("empty_repo");
    fs::create_directories(repo);
    fs::path out = fresh_out("scan_empty");
    RunResult r = run_cli("scan " + repo.string() + " --out " + out.string());
    CHECK(r.exit_code == 0);
    auto inv = nlohmann::ordered_json::parse(slurp(out / "inventory.json"));
    CHECK(inv["files"].empty());
    CHECK(inv["total_lines"] == 0);
}

TEST_CASE("missing root is an input error with a machine-readable diagnostic") {
    fs::path out = fresh_out("scan_missing");
    RunResult r = run_cli("scan /no/such/tree --out " + out.string());
    CHECK(r.exit_code == 3);
    auto diag = nlohmann::ordered_json::parse(r.err);
    CHECK(diag["error"] == "root_not_found");
    CHECK(diag["kind"] == "input");
    CHECK(r.err.find('\n') == r.err.size() - 1); // single line
}

TEST_CASE("generate with an http backend and unset key fails fast, before any write") {
    fs::path out = fresh_out("nokey");
    unsetenv("SCRIBE_CLI_TEST_KEY");
    fs::path cfg = fresh_out("nokey_cfg");
    fs::create_directories(cfg);
    std::ofstream(cfg / "scribe.toml")
        << "[backend]\nkind = \"http\"\n"
           "endpoint_url = \"http://127.0.0.1:1/v1/chat/completions\"\n"
           "api_key_env = \"SCRIBE_CLI_TEST_KEY\"\n";
    RunResult r = run_cli("generate " + (fixtures() / "pyrepo").string() + " --config " +
                          (cfg / "scribe.toml").string() + " --out " + out.string());
    CHECK(r.exit_code == 2);
    auto diag = nlohmann::ordered_json::parse(r.err);
    CHECK(diag["error"] == "auth_missing");
    CHECK_FALSE(fs::exists(out)); // nothing written
}

TEST_CASE("bad usage exits 2 with a diagnostic") {
    RunResult r = run_cli("scan"); // missing root argument
    CHECK(r.exit_code == 2);
    auto diag = nlohmann::ordered_json::parse(r.err);
    CHECK(diag["error"] == "cli_usage");
}

TEST_CASE("full pipeline on the fixture repo emits all artifacts") {
    fs::path out = fresh_out("pipe");
    std::string rules = (fixtures() / "mock_rules.json").string();
    RunResult r = run_cli("pipeline " + (fixtures() / "pyrepo").string() + " --out " +
                          out.string() + " --mock-rules " + rules + " --fixed-clock");
    REQUIRE(r.exit_code == 0);
    for (const char* name : {"inventory.json", "manuscript.md", "manuscript.sidecar.json",
                             "quality.json", "manifest.json"}) {
        CAPTURE(name);
        CHECK(fs::exists(out / name));
    }
    auto manifest = nlohmann::ordered_json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["outputs"].size() == 4);
    for (const auto& stage : manifest["stages"]) {
        CHECK(stage["status"] == "ok");
    }
    CHECK(manifest["tokens"]["total"].get<std::int64_t>() > 0);

    // Quality of the canned fixture content passes the default thresholds.
    auto quality = nlohmann::ordered_json::parse(slurp(out / "quality.json"));
    CHECK(quality["passed"] == true);
}

TEST_CASE("reruns with identical inputs produce identical digests") {
    fs::path out1 = fresh_out("pipe_a");
    fs::path out2 = fresh_out("pipe_b");
    std::string rules = (fixtures() / "mock_rules.json").string();
    std::string base = "pipeline " + (fixtures() / "pyrepo").string() + " --mock-rules " +
                       rules + " --fixed-clock --out ";
    REQUIRE(run_cli(base + out1.string()).exit_code == 0);
    REQUIRE(run_cli(base + out2.string()).exit_code == 0);
    for (const char* name : {"inventory.json", "manuscript.md", "manuscript.sidecar.json",
                             "quality.json", "manifest.json"}) {
        CAPTURE(name);
        CHECK(slurp(out1 / name) == slurp(out2 / name));
    }
}

TEST_CASE("a budget below the first request aborts with exit 5 and no manuscript") {
    fs::path out = fresh_out("budget");
    std::string rules = (fixtures() / "mock_rules.json").string();
    RunResult r = run_cli("pipeline " + (fixtures() / "pyrepo").string() + " --out " +
                          out.string() + " --mock-rules " + rules + " --budget 10");
    CHECK(r.exit_code == 5);
    auto diag = nlohmann::ordered_json::parse(r.err);
    CHECK(diag["error"] == "budget_exceeded");
    CHECK_FALSE(fs::exists(out / "manuscript.md"));
    // The manifest still records the partial run.
    REQUIRE(fs::exists(out / "manifest.json"));
    auto manifest = nlohmann::ordered_json::parse(slurp(out / "manifest.json"));
    bool saw_failure = false;
    for (const auto& stage : manifest["stages"]) {
        std::string status = stage["status"];
        if (status.rfind("failed", 0) == 0) saw_failure = true;
    }
    CHECK(saw_failure);
}

TEST_CASE("evaluate scores a manuscript file") {
    fs::path out = fresh_out("eval_src");
    std::string rules = (fixtures() / "mock_rules.json").string();
    REQUIRE(run_cli("pipeline " + (fixtures() / "pyrepo").string() + " --out " + out.string() +
                    " --mock-rules " + rules + " --fixed-clock")
                .exit_code == 0);
    fs::path eval_out = fresh_out("eval_out");
    RunResult r =
        run_cli("evaluate " + (out / "manuscript.md").string() + " --out " + eval_out.string());
    CHECK(r.exit_code == 0);
    auto quality = nlohmann::ordered_json::parse(slurp(eval_out / "quality.json"));
    CHECK(quality.contains("composite"));
    CHECK(quality["per_section"].contains("abstract"));
}

TEST_CASE("compare of a manuscript against itself reports all-zero deltas") {
    fs::path out = fresh_out("cmp_src");
    std::string rules = (fixtures() / "mock_rules.json").string();
    REQUIRE(run_cli("pipeline " + (fixtures() / "pyrepo").string() + " --out " + out.string() +
                    " --mock-rules " + rules + " --fixed-clock")
                .exit_code == 0);
    fs::path cmp_out = fresh_out("cmp_out");
    std::string md = (out / "manuscript.md").string();
    RunResult r = run_cli("compare " + md + " " + md + " --out " + cmp_out.string());
    CHECK(r.exit_code == 0);
    auto report = nlohmann::ordered_json::parse(slurp(cmp_out / "comparison.json"));
    for (const auto& [metric, delta] : report["per_metric_delta"].items()) {
        CHECK(delta.get<double>() == 0.0);
        CHECK(report["winner_per_metric"][metric] == "tie");
    }
    // The plain-text table lands on stdout.
    CHECK(r.out.find("flesch_reading_ease") != std::string::npos);
    CHECK(r.out.find("tie") != std::string::npos);
}

TEST_CASE("commands write only inside the output directory") {
    fs::path sandbox = fresh_out("isolation");
    fs::create_directories(sandbox / "repo");
    std::ofstream(sandbox / "repo" / "a.py") << "x = 1\n";
    fs::path out = sandbox / "only_here";
    std::string rules = (fixtures() / "mock_rules.json").string();
    RunResult r = run_cli("pipeline " + (sandbox / "repo").string() + " --out " + out.string() +
                          " --mock-rules " + rules);
    REQUIRE(r.exit_code == 0);
    // The sandbox gained nothing but the output directory itself.
    std::vector<std::string> entries;
    for (const auto& e : fs::directory_iterator(sandbox)) {
        entries.push_back(e.path().filename().string());
    }
    std::sort(entries.begin(), entries.end());
    CHECK(entries == std::vector<std::string>{"only_here", "repo"});
}

TEST_CASE("analyze emits one JSON document per file plus a roll-up") {
    fs::path out = fresh_out("analyze");
    RunResult r =
        run_cli("analyze " + (fixtures() / "pyrepo").string() + " --out " + out.string());
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(out / "analysis" / "wordtally" / "tokenizer.py.json"));
    CHECK(fs::exists(out / "analysis" / "scripts" / "quickstats.py.json"));
    auto rollup = nlohmann::ordered_json::parse(slurp(out / "analysis_summary.json"));
    CHECK(rollup["files"] == 8);
    CHECK(rollup["mean_comment_density"].get<double>() > 0.0);
}

TEST_CASE("distill emits one JSONL record per file with round-trip results") {
    fs::path out = fresh_out("distill");
    std::string rules = (fixtures() / "mock_rules.json").string();
    RunResult r = run_cli("distill " + (fixtures() / "pyrepo").string() + " --out " +
                          out.string() + " --mock-rules " + rules);
    REQUIRE(r.exit_code == 0);
    std::istringstream in(slurp(out / "distill.jsonl"));
    std::string line;
    int records = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto rec = nlohmann::ordered_json::parse(line);
        CHECK(rec.contains("target_path"));
        CHECK(rec.contains("prompt_text"));
        CHECK(rec.contains("source_hash"));
        CHECK(rec["round_trip"].contains("similarity"));
        CHECK(rec["round_trip"]["similarity"].get<double>() == 1.0);
        CHECK(rec["round_trip"]["passed"] == true);
        ++records;
    }
    CHECK(records == 8);
}
