#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "scribe/gateway.hpp"

namespace scribe {

// One entry of the deterministic rule table: selected when the request tag
// matches and (if present) the pattern occurs in user_text. The response
// template may splice request fragments via {{user_text}}, {{system_text}},
// {{tag}}, and {{code_block}} (the body of the first fenced block).
struct MockRule {
    std::string tag;     // "*" is the required catch-all
    std::string pattern; // substring of user_text; empty matches everything
    std::string response;
};

class MockBackend : public Backend {
public:
    // Built-in behavior: echo a response derived from (tag, digest of
    // user_text). Identical requests always get identical responses.
    MockBackend() = default;

    explicit MockBackend(std::vector<MockRule> rules);

    // Throws config_error("missing_default_rule" | "duplicate_rule" |
    // "invalid_rules").
    static MockBackend from_rules_json(const nlohmann::ordered_json& doc);
    static MockBackend from_rules_file(const std::string& path);

    SendOutcome send(const PromptRequest& request) override;
    std::string id() const override { return "mock"; }

private:
    std::string render(const std::string& tmpl, const PromptRequest& request) const;

    std::vector<MockRule> rules_; // empty means built-in echo mode
};

// Body of the first ``` fenced block in text, fence lines excluded; empty
// string when there is none.
std::string first_fenced_block(const std::string& text);

} // namespace scribe
