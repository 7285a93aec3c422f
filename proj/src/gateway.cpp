#include "scribe/gateway.hpp"

#include <random>
#include <thread>

#include "scribe/errors.hpp"
#include "scribe/http_backend.hpp"
#include "scribe/mock_backend.hpp"

namespace scribe {

namespace {

constexpr std::int64_t kBackoffBaseMs = 500;

const std::set<std::string>& default_tags() {
    static const std::set<std::string> tags = {
        "augment",           "distill",          "reconstruct",
        "revise",            "section:title",    "section:abstract",
        "section:keywords",  "section:introduction", "section:methods",
        "section:results",   "section:discussion"};
    return tags;
}

double default_jitter01() {
    thread_local std::mt19937 rng(std::random_device{}());
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

} // namespace

std::int64_t estimate_tokens(std::string_view text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

void BackendConfig::validate() const {
    if (kind == BackendKind::http) {
        if (endpoint_url.empty()) {
            throw config_error("invalid_backend", "http backend requires endpoint_url");
        }
        if (api_key_env.empty()) {
            throw config_error("invalid_backend", "http backend requires api_key_env");
        }
    }
    if (timeout_ms <= 0) throw config_error("invalid_backend", "timeout_ms must be > 0");
    if (max_retries < 0) throw config_error("invalid_backend", "max_retries must be >= 0");
    if (max_in_flight < 1) throw config_error("invalid_backend", "max_in_flight must be >= 1");
    if (token_budget && *token_budget <= 0) {
        throw config_error("invalid_backend", "token_budget must be > 0 when set");
    }
}

void TokenLedger::reserve(std::int64_t n) {
    std::lock_guard<std::mutex> lock(mu_);
    if (budget_ && prompt_ + completion_ + reserved_ + n > *budget_) {
        throw budget_error("token budget exhausted: budget " + std::to_string(*budget_) +
                           ", spent " + std::to_string(prompt_ + completion_) + ", reserved " +
                           std::to_string(reserved_) + ", requested " + std::to_string(n));
    }
    reserved_ += n;
}

void TokenLedger::settle(std::int64_t reserved, std::int64_t prompt, std::int64_t completion) {
    std::lock_guard<std::mutex> lock(mu_);
    reserved_ -= reserved;
    std::int64_t actual = prompt + completion;
    if (budget_ && actual > reserved) {
        // Never debit past the reservation; the budget bound stays exact.
        double scale = static_cast<double>(reserved) / static_cast<double>(actual);
        prompt = static_cast<std::int64_t>(prompt * scale);
        completion = reserved - prompt;
    }
    prompt_ += prompt;
    completion_ += completion;
}

void TokenLedger::release(std::int64_t reserved) {
    std::lock_guard<std::mutex> lock(mu_);
    reserved_ -= reserved;
}

std::int64_t TokenLedger::spent_prompt() const {
    std::lock_guard<std::mutex> lock(mu_);
    return prompt_;
}
std::int64_t TokenLedger::spent_completion() const {
    std::lock_guard<std::mutex> lock(mu_);
    return completion_;
}
std::int64_t TokenLedger::spent_total() const {
    std::lock_guard<std::mutex> lock(mu_);
    return prompt_ + completion_;
}

Gateway::Gateway(BackendConfig config, std::unique_ptr<Backend> backend, GatewayHooks hooks)
    : config_(std::move(config)),
      backend_(std::move(backend)),
      hooks_(std::move(hooks)),
      ledger_(config_.token_budget),
      tags_(default_tags()) {
    if (!hooks_.sleep) {
        hooks_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
    if (!hooks_.jitter01) hooks_.jitter01 = default_jitter01;
}

void Gateway::register_tag(const std::string& tag) {
    std::lock_guard<std::mutex> lock(tags_mu_);
    tags_.insert(tag);
}

void Gateway::backoff(int attempt) {
    // Full jitter over base * 2^(attempt-1).
    double ceiling = static_cast<double>(kBackoffBaseMs) * static_cast<double>(1LL << (attempt - 1));
    auto delay = std::chrono::milliseconds(
        static_cast<std::int64_t>(hooks_.jitter01() * ceiling));
    hooks_.sleep(delay);
}

CompletionResult Gateway::complete(const PromptRequest& request) {
    if (request.user_text.empty()) {
        throw internal_error("empty_request", "PromptRequest.user_text must be non-empty");
    }
    if (request.max_tokens <= 0) {
        throw internal_error("bad_request", "PromptRequest.max_tokens must be > 0");
    }
    {
        std::lock_guard<std::mutex> lock(tags_mu_);
        if (!tags_.count(request.tag)) {
            throw internal_error("unregistered_tag", "unknown stage tag: " + request.tag);
        }
    }

    const std::int64_t reservation =
        estimate_tokens(request.system_text) + estimate_tokens(request.user_text) +
        request.max_tokens;
    ledger_.reserve(reservation);

    // In-flight cap, held through retries.
    {
        std::unique_lock<std::mutex> lock(sem_mu_);
        sem_cv_.wait(lock, [&] { return in_flight_ < config_.max_in_flight; });
        ++in_flight_;
    }
    auto release_slot = [&] {
        std::lock_guard<std::mutex> lock(sem_mu_);
        --in_flight_;
        sem_cv_.notify_one();
    };

    const auto started = std::chrono::steady_clock::now();
    try {
        for (int attempt = 1;; ++attempt) {
            SendOutcome outcome = backend_->send(request);
            if (outcome.status == SendOutcome::Status::ok) {
                CompletionResult result;
                result.text = std::move(outcome.text);
                result.prompt_tokens = outcome.prompt_tokens;
                result.completion_tokens = outcome.completion_tokens;
                result.backend_id = backend_->id();
                result.attempt_count = attempt;
                result.latency_ms =
                    config_.kind == BackendKind::mock
                        ? 0
                        : std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - started)
                              .count();
                ledger_.settle(reservation, result.prompt_tokens, result.completion_tokens);
                release_slot();
                return result;
            }
            if (outcome.status == SendOutcome::Status::fatal) {
                throw gateway_error(outcome.error_code.empty() ? "protocol_error"
                                                               : outcome.error_code,
                                    outcome.error_message);
            }
            if (attempt > config_.max_retries) {
                throw gateway_error("network_failure",
                                    "request failed after " + std::to_string(attempt) +
                                        " attempts: " + outcome.error_message);
            }
            backoff(attempt);
        }
    } catch (...) {
        ledger_.release(reservation);
        release_slot();
        throw;
    }
}

std::unique_ptr<Gateway> make_gateway(const BackendConfig& config, GatewayHooks hooks) {
    config.validate();
    std::unique_ptr<Backend> backend;
    if (config.kind == BackendKind::mock) {
        if (config.mock_rules_path.empty()) {
            backend = std::make_unique<MockBackend>();
        } else {
            backend = std::make_unique<MockBackend>(
                MockBackend::from_rules_file(config.mock_rules_path));
        }
    } else {
        backend = std::make_unique<HttpBackend>(config);
    }
    return std::make_unique<Gateway>(config, std::move(backend), std::move(hooks));
}

} // namespace scribe
