#include "scribe/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <variant>

#include "scribe/digest.hpp"
#include "scribe/errors.hpp"

namespace scribe {

namespace {

using TomlValue = std::variant<std::string, std::int64_t, double, bool, std::vector<std::string>>;
using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string parse_quoted(const std::string& raw, size_t& pos) {
    std::string out;
    ++pos; // opening quote
    while (pos < raw.size() && raw[pos] != '"') {
        if (raw[pos] == '\\' && pos + 1 < raw.size()) {
            ++pos;
            switch (raw[pos]) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: out += raw[pos]; break;
            }
        } else {
            out += raw[pos];
        }
        ++pos;
    }
    if (pos >= raw.size()) {
        throw config_error("config_parse", "unterminated string: " + raw);
    }
    ++pos; // closing quote
    return out;
}

TomlValue parse_value(const std::string& raw_in, int line_no) {
    std::string raw = trim(raw_in);
    if (raw.empty()) {
        throw config_error("config_parse", "missing value on line " + std::to_string(line_no));
    }
    if (raw[0] == '"') {
        size_t pos = 0;
        std::string s = parse_quoted(raw, pos);
        if (trim(raw.substr(pos)).size() > 0) {
            throw config_error("config_parse",
                               "trailing content after string on line " + std::to_string(line_no));
        }
        return s;
    }
    if (raw[0] == '[') {
        std::vector<std::string> items;
        size_t pos = 1;
        while (pos < raw.size()) {
            while (pos < raw.size() && (raw[pos] == ' ' || raw[pos] == '\t' || raw[pos] == ','))
                ++pos;
            if (pos < raw.size() && raw[pos] == ']') break;
            if (pos >= raw.size() || raw[pos] != '"') {
                throw config_error("config_parse", "arrays hold strings only (line " +
                                                       std::to_string(line_no) + ")");
            }
            items.push_back(parse_quoted(raw, pos));
        }
        return items;
    }
    if (raw == "true") return true;
    if (raw == "false") return false;
    if (raw.find('.') != std::string::npos || raw.find('e') != std::string::npos ||
        raw.find('E') != std::string::npos) {
        try {
            size_t used = 0;
            double d = std::stod(raw, &used);
            if (used == raw.size()) return d;
        } catch (...) {
        }
    } else {
        try {
            size_t used = 0;
            std::int64_t v = std::stoll(raw, &used);
            if (used == raw.size()) return v;
        } catch (...) {
        }
    }
    throw config_error("config_parse",
                       "cannot parse value '" + raw + "' on line " + std::to_string(line_no));
}

TomlTable parse_toml_subset(const std::string& text) {
    TomlTable table;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        // strip comments outside quotes
        bool in_quote = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_quote = !in_quote;
            if (line[i] == '#' && !in_quote) {
                line = line.substr(0, i);
                break;
            }
        }
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw config_error("config_parse",
                                   "malformed table header on line " + std::to_string(line_no));
            }
            section = trim(t.substr(1, t.size() - 2));
            table[section];
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw config_error("config_parse",
                               "expected key = value on line " + std::to_string(line_no));
        }
        std::string key = trim(t.substr(0, eq));
        table[section][key] = parse_value(t.substr(eq + 1), line_no);
    }
    return table;
}

class Applier {
public:
    explicit Applier(const TomlTable& table) : table_(table) {}

    template <typename T>
    void get(const std::string& section, const std::string& key, T& out) {
        auto sec = table_.find(section);
        if (sec == table_.end()) return;
        auto it = sec->second.find(key);
        if (it == sec->second.end()) return;
        consumed_.insert(section + "." + key);
        if constexpr (std::is_same_v<T, std::int64_t> || std::is_same_v<T, int> ||
                      std::is_same_v<T, std::uint64_t>) {
            if (const auto* v = std::get_if<std::int64_t>(&it->second)) {
                out = static_cast<T>(*v);
                return;
            }
        } else if constexpr (std::is_same_v<T, double>) {
            if (const auto* v = std::get_if<double>(&it->second)) {
                out = *v;
                return;
            }
            if (const auto* v = std::get_if<std::int64_t>(&it->second)) {
                out = static_cast<double>(*v);
                return;
            }
        } else if constexpr (std::is_same_v<T, bool>) {
            if (const auto* v = std::get_if<bool>(&it->second)) {
                out = *v;
                return;
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (const auto* v = std::get_if<std::string>(&it->second)) {
                out = *v;
                return;
            }
        } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
            if (const auto* v = std::get_if<std::vector<std::string>>(&it->second)) {
                out = *v;
                return;
            }
        }
        throw config_error("config_type", "wrong value type for " + section + "." + key);
    }

    void check_all_consumed() const {
        for (const auto& [section, entries] : table_) {
            for (const auto& [key, value] : entries) {
                if (!consumed_.count(section + "." + key)) {
                    throw config_error("config_unknown_key",
                                       "unknown config key: [" + section + "] " + key);
                }
            }
        }
    }

private:
    const TomlTable& table_;
    std::set<std::string> consumed_;
};

void set_word_target(ArticleConfig& article, const std::string& id, int target) {
    for (auto& spec : article.specs) {
        if (spec.id == id) spec.word_target = target;
    }
}

int word_target_of(const ArticleConfig& article, const std::string& id) {
    for (const auto& spec : article.specs) {
        if (spec.id == id) return spec.word_target;
    }
    return 0;
}

} // namespace

PipelineConfig default_config() {
    PipelineConfig cfg;
    cfg.article.specs = default_section_specs();
    cfg.revision.quality = cfg.quality;
    return cfg;
}

PipelineConfig parse_config_text(const std::string& text) {
    TomlTable table = parse_toml_subset(text);
    PipelineConfig cfg = default_config();
    Applier a(table);

    a.get("ingest", "include_extensions", cfg.ingest.include_extensions);
    a.get("ingest", "exclude_dirs", cfg.ingest.exclude_dirs);
    a.get("ingest", "max_file_bytes", cfg.ingest.max_file_bytes);
    a.get("ingest", "follow_symlinks", cfg.ingest.follow_symlinks);

    std::string kind = "mock";
    a.get("backend", "kind", kind);
    if (kind == "mock") {
        cfg.backend.kind = BackendKind::mock;
    } else if (kind == "http") {
        cfg.backend.kind = BackendKind::http;
    } else {
        throw config_error("config_value", "backend.kind must be \"mock\" or \"http\"");
    }
    a.get("backend", "endpoint_url", cfg.backend.endpoint_url);
    a.get("backend", "model_name", cfg.backend.model_name);
    a.get("backend", "api_key_env", cfg.backend.api_key_env);
    a.get("backend", "timeout_ms", cfg.backend.timeout_ms);
    a.get("backend", "max_retries", cfg.backend.max_retries);
    a.get("backend", "max_in_flight", cfg.backend.max_in_flight);
    std::int64_t budget = 0;
    a.get("backend", "token_budget", budget);
    if (budget > 0) cfg.backend.token_budget = budget;
    a.get("backend", "mock_rules", cfg.backend.mock_rules_path);

    a.get("distill", "augmentation_threshold", cfg.distill.augmentation_threshold);
    a.get("distill", "pass_threshold", cfg.distill.pass_threshold);
    a.get("distill", "verbatim_guard_fraction", cfg.distill.verbatim_guard_fraction);
    a.get("distill", "temperature", cfg.distill.temperature);

    a.get("article", "context_budget", cfg.article.context_budget);
    a.get("article", "temperature", cfg.article.temperature);
    for (const auto& id : canonical_section_order()) {
        int target = word_target_of(cfg.article, id);
        a.get("article", "word_target_" + id, target);
        set_word_target(cfg.article, id, target);
    }

    a.get("quality", "min_flesch", cfg.quality.min_flesch);
    a.get("quality", "min_cohesion", cfg.quality.min_cohesion);
    a.get("quality", "min_structure", cfg.quality.min_structure);
    a.get("quality", "weight_readability", cfg.quality.weight_readability);
    a.get("quality", "weight_cohesion", cfg.quality.weight_cohesion);
    a.get("quality", "weight_structure", cfg.quality.weight_structure);

    a.get("revision", "max_iterations", cfg.revision.max_iterations);

    a.get("output", "dir", cfg.output_dir);

    a.check_all_consumed();

    cfg.quality.abstract_word_target = word_target_of(cfg.article, "abstract");
    cfg.revision.quality = cfg.quality;
    cfg.validate();
    return cfg;
}

PipelineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config_missing", "cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void PipelineConfig::validate() const {
    ingest.validate();
    backend.validate();
    revision.validate();
    if (distill.augmentation_threshold < 0.0 || distill.augmentation_threshold > 1.0) {
        throw config_error("config_value", "distill.augmentation_threshold must be in [0,1]");
    }
    if (distill.pass_threshold < 0.0 || distill.pass_threshold > 1.0) {
        throw config_error("config_value", "distill.pass_threshold must be in [0,1]");
    }
    if (article.context_budget <= 0) {
        throw config_error("config_value", "article.context_budget must be > 0");
    }
    if (output_dir.empty()) {
        throw config_error("config_value", "output.dir must be non-empty");
    }
}

nlohmann::ordered_json PipelineConfig::to_json() const {
    nlohmann::ordered_json j;
    j["ingest"] = {{"include_extensions", ingest.include_extensions},
                   {"exclude_dirs", ingest.exclude_dirs},
                   {"max_file_bytes", ingest.max_file_bytes},
                   {"follow_symlinks", ingest.follow_symlinks}};
    j["backend"] = {{"kind", backend.kind == BackendKind::mock ? "mock" : "http"},
                    {"endpoint_url", backend.endpoint_url},
                    {"model_name", backend.model_name},
                    {"api_key_env", backend.api_key_env},
                    {"timeout_ms", backend.timeout_ms},
                    {"max_retries", backend.max_retries},
                    {"max_in_flight", backend.max_in_flight},
                    {"token_budget", backend.token_budget ? *backend.token_budget : 0},
                    {"mock_rules", backend.mock_rules_path}};
    j["distill"] = {{"augmentation_threshold", distill.augmentation_threshold},
                    {"pass_threshold", distill.pass_threshold},
                    {"verbatim_guard_fraction", distill.verbatim_guard_fraction},
                    {"temperature", distill.temperature}};
    nlohmann::ordered_json targets;
    for (const auto& spec : article.specs) {
        targets[spec.id] = spec.word_target;
    }
    j["article"] = {{"context_budget", article.context_budget},
                    {"temperature", article.temperature},
                    {"word_targets", targets}};
    j["quality"] = {{"min_flesch", quality.min_flesch},
                    {"min_cohesion", quality.min_cohesion},
                    {"min_structure", quality.min_structure},
                    {"weight_readability", quality.weight_readability},
                    {"weight_cohesion", quality.weight_cohesion},
                    {"weight_structure", quality.weight_structure}};
    j["revision"] = {{"max_iterations", revision.max_iterations}};
    j["output"] = {{"dir", output_dir}};
    j["fixed_clock"] = fixed_clock;
    return j;
}

std::string PipelineConfig::digest() const {
    // The output directory is where results land, not a semantic input; two
    // runs that differ only in it are the same configuration.
    nlohmann::ordered_json j = to_json();
    j.erase("output");
    return sha256_hex(j.dump());
}

} // namespace scribe
