#include "scribe/http_backend.hpp"

#include <cstdlib>

#include "httplib.h"
#include "json.hpp"

#include "scribe/errors.hpp"

namespace scribe {

namespace {

// scheme://host[:port]/path -> (scheme://host[:port], /path)
void split_url(const std::string& url, std::string& base, std::string& path) {
    size_t scheme = url.find("://");
    size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
    size_t slash = url.find('/', host_start);
    if (slash == std::string::npos) {
        base = url;
        path = "/";
    } else {
        base = url.substr(0, slash);
        path = url.substr(slash);
    }
}

bool retryable_status(int status) {
    return status == 408 || status == 429 || (status >= 500 && status < 600);
}

} // namespace

HttpBackend::HttpBackend(const BackendConfig& config) : config_(config) {
    const char* key = config_.api_key_env.empty() ? nullptr : std::getenv(config_.api_key_env.c_str());
    if (!key || !*key) {
        throw config_error("auth_missing", "environment variable " + config_.api_key_env +
                                               " is not set (required for http backend)");
    }
    api_key_ = key;
    split_url(config_.endpoint_url, base_url_, path_);
}

std::string HttpBackend::id() const {
    return "http:" + config_.model_name;
}

SendOutcome HttpBackend::send(const PromptRequest& request) {
    nlohmann::ordered_json body;
    body["model"] = config_.model_name;
    body["messages"] = nlohmann::ordered_json::array();
    if (!request.system_text.empty()) {
        body["messages"].push_back({{"role", "system"}, {"content", request.system_text}});
    }
    body["messages"].push_back({{"role", "user"}, {"content", request.user_text}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;

    httplib::Client client(base_url_);
    client.set_connection_timeout(0, config_.timeout_ms * 1000LL);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    client.set_write_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};

    SendOutcome outcome;
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
        outcome.status = SendOutcome::Status::retryable;
        outcome.error_code = "network_failure";
        outcome.error_message = "transport error: " + httplib::to_string(res.error());
        return outcome;
    }
    if (res->status < 200 || res->status >= 300) {
        if (retryable_status(res->status)) {
            outcome.status = SendOutcome::Status::retryable;
            outcome.error_code = "network_failure";
        } else {
            outcome.status = SendOutcome::Status::fatal;
            outcome.error_code = "http_error";
        }
        outcome.error_message = "http status " + std::to_string(res->status);
        return outcome;
    }

    nlohmann::json doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() ||
        doc["choices"].empty() || !doc["choices"][0].contains("message") ||
        !doc["choices"][0]["message"].contains("content") ||
        !doc["choices"][0]["message"]["content"].is_string()) {
        outcome.status = SendOutcome::Status::fatal;
        outcome.error_code = "protocol_error";
        outcome.error_message = "malformed completion response body";
        return outcome;
    }
    outcome.status = SendOutcome::Status::ok;
    outcome.text = doc["choices"][0]["message"]["content"].get<std::string>();
    if (doc.contains("usage") && doc["usage"].is_object()) {
        outcome.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
        outcome.completion_tokens = doc["usage"].value("completion_tokens", 0);
    }
    if (outcome.prompt_tokens == 0) {
        outcome.prompt_tokens =
            estimate_tokens(request.system_text) + estimate_tokens(request.user_text);
    }
    if (outcome.completion_tokens == 0) {
        outcome.completion_tokens = estimate_tokens(outcome.text);
    }
    return outcome;
}

} // namespace scribe
