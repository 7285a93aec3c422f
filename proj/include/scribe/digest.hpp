#pragma once

#include <string>
#include <string_view>

namespace scribe {

// Hex-encoded SHA-256 of the given bytes, prefixed "sha256:".
std::string sha256_hex(std::string_view bytes);

// Short 12-hex-digit form, convenient for labels and log lines.
std::string short_digest(std::string_view bytes);

} // namespace scribe
