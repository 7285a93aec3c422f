#include "scribe/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace scribe {

namespace {

std::string to_hex(const unsigned char* data, size_t len) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (size_t i = 0; i < len; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0xF]);
    }
    return out;
}

} // namespace

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int md_len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &md_len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 digest failed");
    }
    return "sha256:" + to_hex(md.data(), md_len);
}

std::string short_digest(std::string_view bytes) {
    return sha256_hex(bytes).substr(7, 12);
}

} // namespace scribe
