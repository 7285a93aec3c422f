#pragma once

#include <string>

#include "scribe/gateway.hpp"

namespace scribe {

// Chat-completion HTTP backend: POSTs the de-facto JSON shape
// {model, messages, temperature, max_tokens} and reads the first choice's
// message content. Bearer token comes from the environment variable named in
// the config; a missing key fails at construction, before any request.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(const BackendConfig& config); // throws config_error("auth_missing")

    SendOutcome send(const PromptRequest& request) override;
    std::string id() const override;

private:
    BackendConfig config_;
    std::string base_url_; // scheme://host[:port]
    std::string path_;
    std::string api_key_;
};

} // namespace scribe
