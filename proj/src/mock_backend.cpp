#include "scribe/mock_backend.hpp"

#include <fstream>
#include <set>

#include "scribe/digest.hpp"
#include "scribe/errors.hpp"

namespace scribe {

std::string first_fenced_block(const std::string& text) {
    size_t open = text.find("```");
    if (open == std::string::npos) return "";
    size_t body_start = text.find('\n', open);
    if (body_start == std::string::npos) return "";
    ++body_start;
    size_t close = text.find("```", body_start);
    if (close == std::string::npos) return "";
    // Drop the newline that precedes the closing fence.
    size_t body_end = close;
    if (body_end > body_start && text[body_end - 1] == '\n') --body_end;
    return text.substr(body_start, body_end - body_start);
}

MockBackend::MockBackend(std::vector<MockRule> rules) : rules_(std::move(rules)) {
    bool has_default = false;
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& r : rules_) {
        if (r.tag == "*") has_default = true;
        if (!keys.insert({r.tag, r.pattern}).second) {
            throw config_error("duplicate_rule",
                               "duplicate mock rule for tag '" + r.tag + "' pattern '" +
                                   r.pattern + "'");
        }
    }
    if (!has_default) {
        throw config_error("missing_default_rule",
                           "mock rule table needs a default rule with tag \"*\"");
    }
}

MockBackend MockBackend::from_rules_json(const nlohmann::ordered_json& doc) {
    if (!doc.is_object() || !doc.contains("rules") || !doc["rules"].is_array()) {
        throw config_error("invalid_rules", "mock rules document must have a rules[] array");
    }
    std::vector<MockRule> rules;
    for (const auto& r : doc["rules"]) {
        MockRule rule;
        rule.tag = r.at("tag").get<std::string>();
        if (r.contains("pattern")) rule.pattern = r.at("pattern").get<std::string>();
        rule.response = r.at("response").get<std::string>();
        rules.push_back(std::move(rule));
    }
    return MockBackend(std::move(rules));
}

MockBackend MockBackend::from_rules_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("invalid_rules", "cannot open mock rules file: " + path);
    nlohmann::ordered_json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw config_error("invalid_rules",
                           "mock rules file is not valid JSON: " + std::string(e.what()));
    }
    return from_rules_json(doc);
}

std::string MockBackend::render(const std::string& tmpl, const PromptRequest& request) const {
    std::string out = tmpl;
    auto replace_all = [&out](const std::string& key, const std::string& value) {
        size_t pos = 0;
        while ((pos = out.find(key, pos)) != std::string::npos) {
            out.replace(pos, key.size(), value);
            pos += value.size();
        }
    };
    replace_all("{{code_block}}", first_fenced_block(request.user_text));
    replace_all("{{user_text}}", request.user_text);
    replace_all("{{system_text}}", request.system_text);
    replace_all("{{tag}}", request.tag);
    return out;
}

SendOutcome MockBackend::send(const PromptRequest& request) {
    SendOutcome outcome;
    outcome.status = SendOutcome::Status::ok;
    if (rules_.empty()) {
        outcome.text = "mock response [" + request.tag + ":" +
                       short_digest(request.user_text) + "]";
    } else {
        const MockRule* chosen = nullptr;
        const MockRule* fallback = nullptr;
        for (const auto& r : rules_) {
            if (r.tag == "*") {
                if (!fallback) fallback = &r;
                continue;
            }
            if (r.tag != request.tag) continue;
            if (r.pattern.empty() || request.user_text.find(r.pattern) != std::string::npos) {
                chosen = &r;
                break;
            }
        }
        if (!chosen) chosen = fallback;
        outcome.text = render(chosen->response, request);
    }
    outcome.prompt_tokens =
        estimate_tokens(request.system_text) + estimate_tokens(request.user_text);
    outcome.completion_tokens = estimate_tokens(outcome.text);
    return outcome;
}

} // namespace scribe
