#include "doctest.h"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

#include "httplib.h"

#include "scribe/errors.hpp"
#include "scribe/gateway.hpp"
#include "scribe/http_backend.hpp"
#include "scribe/mock_backend.hpp"

using namespace scribe;

namespace {

PromptRequest request_with(const std::string& tag, const std::string& user,
                           int max_tokens = 256) {
    PromptRequest r;
    r.system_text = "system";
    r.user_text = user;
    r.max_tokens = max_tokens;
    r.tag = tag;
    return r;
}

GatewayHooks no_sleep_hooks() {
    GatewayHooks hooks;
    hooks.sleep = [](std::chrono::milliseconds) {};
    hooks.jitter01 = [] { return 1.0; };
    return hooks;
}

std::unique_ptr<Gateway> mock_gateway(BackendConfig config = {}) {
    config.kind = BackendKind::mock;
    return std::make_unique<Gateway>(config, std::make_unique<MockBackend>(), no_sleep_hooks());
}

class FixedBackend : public Backend {
public:
    explicit FixedBackend(std::string text) : text_(std::move(text)) {}
    SendOutcome send(const PromptRequest& request) override {
        ++sends;
        SendOutcome o;
        o.text = text_;
        o.prompt_tokens = estimate_tokens(request.system_text) + estimate_tokens(request.user_text);
        o.completion_tokens = estimate_tokens(text_);
        return o;
    }
    std::string id() const override { return "fixed"; }
    std::atomic<int> sends{0};

private:
    std::string text_;
};

class GaugeBackend : public Backend {
public:
    SendOutcome send(const PromptRequest&) override {
        int now = ++current;
        int old = peak.load();
        while (now > old && !peak.compare_exchange_weak(old, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        --current;
        SendOutcome o;
        o.text = "ok";
        o.prompt_tokens = 1;
        o.completion_tokens = 1;
        return o;
    }
    std::string id() const override { return "gauge"; }
    std::atomic<int> current{0};
    std::atomic<int> peak{0};
};

} // namespace

TEST_CASE("token estimate is chars/4 rounded up") {
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens("a") == 1);
    CHECK(estimate_tokens("abcd") == 1);
    CHECK(estimate_tokens("abcde") == 2);
}

TEST_CASE("built-in mock: deterministic response keyed by tag and user-text digest") {
    auto gw = mock_gateway();
    CompletionResult a = gw->complete(request_with("distill", "same text"));
    CompletionResult b = gw->complete(request_with("distill", "same text"));
    CompletionResult c = gw->complete(request_with("revise", "same text"));
    CompletionResult d = gw->complete(request_with("distill", "other text"));
    CHECK(a.text == b.text);
    CHECK(a.attempt_count == 1);
    CHECK(a.latency_ms == 0);
    CHECK(a.text != c.text);
    CHECK(a.text != d.text);
    CHECK(a.backend_id == "mock");
}

TEST_CASE("budget precondition: max_tokens over budget fails before any send") {
    BackendConfig config;
    config.kind = BackendKind::mock;
    config.token_budget = 100;
    auto backend = std::make_unique<FixedBackend>("reply");
    FixedBackend* raw = backend.get();
    Gateway gw(config, std::move(backend), no_sleep_hooks());
    CHECK_THROWS_AS(gw.complete(request_with("distill", "text", 200)), Error);
    CHECK(raw->sends.load() == 0);
    try {
        gw.complete(request_with("distill", "text", 200));
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::budget);
        CHECK(e.code() == "budget_exceeded");
    }
    // The failed reservation must not leak: a small request still fits.
    CompletionResult ok = gw.complete(request_with("distill", "text", 50));
    CHECK(ok.attempt_count == 1);
}

TEST_CASE("budget safety under concurrency: debits never exceed the budget") {
    BackendConfig config;
    config.kind = BackendKind::mock;
    // Each success debits ~11 tokens; 40 attempts must overrun 150.
    config.token_budget = 150;
    config.max_in_flight = 8;
    Gateway gw(config, std::make_unique<FixedBackend>("0123456789abcdef"), no_sleep_hooks());

    std::atomic<int> succeeded{0}, refused{0};
    std::vector<std::thread> threads;
    for (int i = 0; i < 40; ++i) {
        threads.emplace_back([&] {
            try {
                gw.complete(request_with("distill", "0123456789abcdefghij", 20));
                ++succeeded;
            } catch (const Error&) {
                ++refused;
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(succeeded.load() > 0);
    CHECK(refused.load() > 0);
    CHECK(gw.ledger().spent_total() <= 150);
    CHECK(succeeded + refused == 40);
}

TEST_CASE("concurrency cap: 100 concurrent requests stay within max_in_flight") {
    BackendConfig config;
    config.kind = BackendKind::mock;
    config.max_in_flight = 4;
    auto backend = std::make_unique<GaugeBackend>();
    GaugeBackend* raw = backend.get();
    Gateway gw(config, std::move(backend), no_sleep_hooks());

    std::vector<std::thread> threads;
    for (int i = 0; i < 100; ++i) {
        threads.emplace_back([&] { gw.complete(request_with("distill", "x")); });
    }
    for (auto& t : threads) t.join();
    CHECK(raw->peak.load() <= 4);
    CHECK(raw->peak.load() >= 1);
}

TEST_CASE("backoff doubles per attempt with full jitter drawn from the hook") {
    BackendConfig config;
    config.kind = BackendKind::mock;
    config.max_retries = 2;

    class FailingBackend : public Backend {
    public:
        SendOutcome send(const PromptRequest&) override {
            SendOutcome o;
            o.status = SendOutcome::Status::retryable;
            o.error_code = "network_failure";
            o.error_message = "scripted failure";
            return o;
        }
        std::string id() const override { return "failing"; }
    };

    std::vector<std::int64_t> delays;
    GatewayHooks hooks;
    hooks.sleep = [&delays](std::chrono::milliseconds d) { delays.push_back(d.count()); };
    hooks.jitter01 = [] { return 1.0; }; // full ceiling, deterministic
    Gateway gw(config, std::make_unique<FailingBackend>(), hooks);

    try {
        gw.complete(request_with("distill", "x"));
        FAIL("expected network_failure");
    } catch (const Error& e) {
        CHECK(e.code() == "network_failure");
        CHECK(e.kind() == ErrorKind::gateway);
    }
    REQUIRE(delays.size() == 2); // retries between 3 attempts
    CHECK(delays[0] == 500);
    CHECK(delays[1] == 1000);
}

TEST_CASE("unregistered tags and empty user text are rejected") {
    auto gw = mock_gateway();
    CHECK_THROWS_AS(gw->complete(request_with("not-a-stage", "x")), Error);
    CHECK_THROWS_AS(gw->complete(request_with("distill", "")), Error);
    gw->register_tag("custom");
    CHECK(gw->complete(request_with("custom", "x")).attempt_count == 1);
}

TEST_CASE("mock rule table: lookup by tag and pattern, template splices") {
    nlohmann::ordered_json doc = {
        {"rules",
         {{{"tag", "augment"}, {"response", "```python\n{{code_block}}\n```"}},
          {{"tag", "distill"},
           {"pattern", "File: a.py"},
           {"response", "prompt for a.py ({{tag}})"}},
          {{"tag", "distill"}, {"response", "generic prompt"}},
          {{"tag", "*"}, {"response", "default: {{user_text}}"}}}}};
    MockBackend backend = MockBackend::from_rules_json(doc);

    SendOutcome a = backend.send(request_with("distill", "please distill File: a.py now"));
    CHECK(a.text == "prompt for a.py (distill)");
    SendOutcome b = backend.send(request_with("distill", "something else"));
    CHECK(b.text == "generic prompt");
    SendOutcome c = backend.send(request_with("revise", "hello"));
    CHECK(c.text == "default: hello");
    SendOutcome d =
        backend.send(request_with("augment", "add comments\n```python\nx = 1\ny = 2\n```\n"));
    CHECK(d.text == "```python\nx = 1\ny = 2\n```");
}

TEST_CASE("mock rule table requires a default and rejects duplicates") {
    nlohmann::ordered_json no_default = {
        {"rules", {{{"tag", "distill"}, {"response", "x"}}}}};
    try {
        MockBackend::from_rules_json(no_default);
        FAIL("expected missing_default_rule");
    } catch (const Error& e) {
        CHECK(e.code() == "missing_default_rule");
    }

    nlohmann::ordered_json duplicate = {
        {"rules",
         {{{"tag", "distill"}, {"response", "x"}},
          {{"tag", "distill"}, {"response", "y"}},
          {{"tag", "*"}, {"response", "d"}}}}};
    try {
        MockBackend::from_rules_json(duplicate);
        FAIL("expected duplicate_rule");
    } catch (const Error& e) {
        CHECK(e.code() == "duplicate_rule");
    }
}

TEST_CASE("mock replay determinism over request sequences") {
    nlohmann::ordered_json doc = {
        {"rules",
         {{{"tag", "distill"}, {"response", "{{user_text}}+{{tag}}"}},
          {{"tag", "*"}, {"response", "fallback"}}}}};
    std::vector<PromptRequest> sequence;
    for (int i = 0; i < 16; ++i) {
        sequence.push_back(
            request_with(i % 2 ? "distill" : "revise", "request " + std::to_string(i)));
    }
    auto run = [&doc, &sequence]() {
        BackendConfig config;
        config.kind = BackendKind::mock;
        Gateway gw(config, std::make_unique<MockBackend>(MockBackend::from_rules_json(doc)),
                   no_sleep_hooks());
        std::string transcript;
        for (const auto& r : sequence) {
            CompletionResult res = gw.complete(r);
            transcript += res.text + "|" + std::to_string(res.prompt_tokens) + "|" +
                          std::to_string(res.completion_tokens) + "\n";
        }
        return transcript;
    };
    CHECK(run() == run());
}

TEST_CASE("http backend: missing API key fails at construction") {
    unsetenv("SCRIBE_TEST_MISSING_KEY");
    BackendConfig config;
    config.kind = BackendKind::http;
    config.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
    config.api_key_env = "SCRIBE_TEST_MISSING_KEY";
    try {
        HttpBackend backend(config);
        FAIL("expected auth_missing");
    } catch (const Error& e) {
        CHECK(e.code() == "auth_missing");
        CHECK(e.kind() == ErrorKind::config);
    }
}

TEST_CASE("http backend against a scripted server: 429 twice then success") {
    setenv("SCRIBE_TEST_KEY", "sekrit", 1);

    httplib::Server server;
    std::atomic<int> hits{0};
    std::string seen_auth;
    std::string seen_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        int n = ++hits;
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        if (n <= 2) {
            res.status = 429;
            res.set_content("slow down", "text/plain");
            return;
        }
        nlohmann::ordered_json reply = {
            {"choices",
             {{{"message", {{"role", "assistant"}, {"content", "scripted reply"}}}}}},
            {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 7}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread server_thread([&server] { server.listen_after_bind(); });
    server.wait_until_ready();

    BackendConfig config;
    config.kind = BackendKind::http;
    config.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    config.api_key_env = "SCRIBE_TEST_KEY";
    config.model_name = "test-model";
    config.max_retries = 3;
    Gateway gw(config, std::make_unique<HttpBackend>(config), no_sleep_hooks());

    CompletionResult result = gw.complete(request_with("distill", "ping"));
    CHECK(result.text == "scripted reply");
    CHECK(result.attempt_count == 3);
    CHECK(result.prompt_tokens == 11);
    CHECK(result.completion_tokens == 7);
    CHECK(seen_auth == "Bearer sekrit");
    // De-facto chat-completion request shape.
    nlohmann::json body = nlohmann::json::parse(seen_body);
    CHECK(body["model"] == "test-model");
    CHECK(body["messages"].is_array());
    CHECK(body["messages"].back()["role"] == "user");
    CHECK(body["messages"].back()["content"] == "ping");
    CHECK(body.contains("temperature"));
    CHECK(body.contains("max_tokens"));

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend: malformed body is a protocol error, no retry") {
    setenv("SCRIBE_TEST_KEY", "sekrit", 1);
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.set_content("{\"not\": \"a completion\"}", "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&server] { server.listen_after_bind(); });
    server.wait_until_ready();

    BackendConfig config;
    config.kind = BackendKind::http;
    config.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
    config.api_key_env = "SCRIBE_TEST_KEY";
    Gateway gw(config, std::make_unique<HttpBackend>(config), no_sleep_hooks());

    try {
        gw.complete(request_with("distill", "ping"));
        FAIL("expected protocol_error");
    } catch (const Error& e) {
        CHECK(e.code() == "protocol_error");
    }
    CHECK(hits.load() == 1);

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend: network failure after final retry") {
    setenv("SCRIBE_TEST_KEY", "sekrit", 1);
    BackendConfig config;
    config.kind = BackendKind::http;
    // Port 1 refuses connections.
    config.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
    config.api_key_env = "SCRIBE_TEST_KEY";
    config.max_retries = 1;
    config.timeout_ms = 500;
    Gateway gw(config, std::make_unique<HttpBackend>(config), no_sleep_hooks());
    try {
        gw.complete(request_with("distill", "ping"));
        FAIL("expected network_failure");
    } catch (const Error& e) {
        CHECK(e.code() == "network_failure");
    }
}

TEST_CASE("backend config validation") {
    BackendConfig http;
    http.kind = BackendKind::http;
    CHECK_THROWS_AS(http.validate(), Error); // no endpoint, no key env
    http.endpoint_url = "http://x/y";
    CHECK_THROWS_AS(http.validate(), Error);
    http.api_key_env = "KEY";
    CHECK_NOTHROW(http.validate());

    BackendConfig bad;
    bad.max_in_flight = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}
