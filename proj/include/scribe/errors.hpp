#pragma once

#include <stdexcept>
#include <string>

namespace scribe {

// Broad failure categories; the CLI maps each to a distinct exit code.
enum class ErrorKind {
    config,   // bad configuration, missing secrets, malformed rule tables
    input,    // bad or vanished input data
    gateway,  // backend/network/protocol failures
    budget,   // token budget exhausted
    internal, // contract violations, should-not-happen
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message)
        : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const { return kind_; }

    // Stable machine-readable identifier, e.g. "root_not_found".
    const std::string& code() const { return code_; }

private:
    ErrorKind kind_;
    std::string code_;
};

inline Error config_error(std::string code, const std::string& msg) {
    return Error(ErrorKind::config, std::move(code), msg);
}
inline Error input_error(std::string code, const std::string& msg) {
    return Error(ErrorKind::input, std::move(code), msg);
}
inline Error gateway_error(std::string code, const std::string& msg) {
    return Error(ErrorKind::gateway, std::move(code), msg);
}
inline Error budget_error(const std::string& msg) {
    return Error(ErrorKind::budget, "budget_exceeded", msg);
}
inline Error internal_error(std::string code, const std::string& msg) {
    return Error(ErrorKind::internal, std::move(code), msg);
}

} // namespace scribe
