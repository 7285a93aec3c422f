#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>

namespace scribe {

// Backend-agnostic token estimate: characters / 4, rounded up.
std::int64_t estimate_tokens(std::string_view text);

struct PromptRequest {
    std::string system_text;
    std::string user_text;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::string tag; // pipeline stage label, e.g. "distill", "section:methods"
};

struct CompletionResult {
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::string backend_id;
    std::int64_t latency_ms = 0;
    int attempt_count = 1;
};

enum class BackendKind { http, mock };

struct BackendConfig {
    BackendKind kind = BackendKind::mock;
    std::string endpoint_url; // http only
    std::string model_name = "default-model";
    std::string api_key_env; // http only; name of the env var holding the key
    int timeout_ms = 30000;
    int max_retries = 3;
    int max_in_flight = 4;
    std::optional<std::int64_t> token_budget; // cumulative cap per run
    std::string mock_rules_path; // mock only; empty selects the built-in echo rules

    void validate() const; // throws config_error
};

// Synchronized cumulative token accounting. Reservations are taken before a
// request goes out and settled (or released) when it completes, so
// concurrent callers can never collectively overrun the budget.
class TokenLedger {
public:
    explicit TokenLedger(std::optional<std::int64_t> budget = std::nullopt)
        : budget_(budget) {}

    void reserve(std::int64_t n); // throws budget_error
    void settle(std::int64_t reserved, std::int64_t prompt, std::int64_t completion);
    void release(std::int64_t reserved);

    std::int64_t spent_prompt() const;
    std::int64_t spent_completion() const;
    std::int64_t spent_total() const;
    std::optional<std::int64_t> budget() const { return budget_; }

private:
    mutable std::mutex mu_;
    std::optional<std::int64_t> budget_;
    std::int64_t reserved_ = 0;
    std::int64_t prompt_ = 0;
    std::int64_t completion_ = 0;
};

// One attempt against a concrete backend.
struct SendOutcome {
    enum class Status { ok, retryable, fatal };
    Status status = Status::ok;
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::string error_code;
    std::string error_message;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual SendOutcome send(const PromptRequest& request) = 0;
    virtual std::string id() const = 0;
};

struct GatewayHooks {
    // Injectable for tests: backoff sleeper and the jitter draw in [0,1].
    std::function<void(std::chrono::milliseconds)> sleep;
    std::function<double()> jitter01;
};

// Uniform entry point for all LLM calls: retries with exponential backoff and
// full jitter, caps in-flight requests, and debits the token ledger.
class Gateway {
public:
    Gateway(BackendConfig config, std::unique_ptr<Backend> backend, GatewayHooks hooks = {});

    // Throws budget_error before any backend activity when the reservation
    // (prompt estimate + max_tokens) does not fit the remaining budget.
    CompletionResult complete(const PromptRequest& request);

    const TokenLedger& ledger() const { return ledger_; }
    const BackendConfig& config() const { return config_; }
    std::string backend_id() const { return backend_->id(); }

    void register_tag(const std::string& tag);

private:
    void backoff(int attempt);

    BackendConfig config_;
    std::unique_ptr<Backend> backend_;
    GatewayHooks hooks_;
    TokenLedger ledger_;

    std::mutex sem_mu_;
    std::condition_variable sem_cv_;
    int in_flight_ = 0;

    std::mutex tags_mu_;
    std::set<std::string> tags_;
};

// Builds the backend named by config.kind. For http backends the API key
// environment variable is resolved here, before any request is made.
std::unique_ptr<Gateway> make_gateway(const BackendConfig& config, GatewayHooks hooks = {});

} // namespace scribe
