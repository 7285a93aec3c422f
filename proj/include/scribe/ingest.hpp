#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace scribe {

// File selection rules for a repository scan.
struct IngestRules {
    std::vector<std::string> include_extensions = {".py"};
    std::vector<std::string> exclude_dirs = {".git", "__pycache__", ".venv", "node_modules"};
    std::uint64_t max_file_bytes = 1024 * 1024;
    bool follow_symlinks = false;

    void validate() const; // throws config_error on empty extensions / zero size cap
};

struct FileRecord {
    std::string path; // repository-relative, '/'-separated
    std::uint64_t byte_size = 0;
    std::string content_hash; // sha256 of raw bytes
    std::uint64_t line_count = 0;
};

struct SkippedFile {
    std::string path;
    std::string reason; // "size" | "unreadable" | "decode"
};

struct RepoInventory {
    std::string root; // absolute path
    std::vector<FileRecord> files; // sorted byte-wise by path
    std::vector<SkippedFile> skipped;
    std::uint64_t total_lines = 0;
};

// Text of one ingested file, decoded as UTF-8 with U+FFFD replacement.
struct SourceText {
    std::string path;
    std::string text;
    bool lossy = false; // replacement characters were inserted
};

// Lines are LF-terminated; a final unterminated fragment counts as one line.
std::uint64_t count_lines(std::string_view bytes);

// Walk root and build a deterministic inventory under the given rules.
// Throws input_error("root_not_found" | "not_a_directory").
RepoInventory scan_repository(const std::filesystem::path& root, const IngestRules& rules);

// Re-read one inventoried file. Throws input_error("file_vanished") when the
// file is gone or its bytes no longer match record.content_hash.
SourceText read_source(const FileRecord& record, const std::filesystem::path& root);

nlohmann::ordered_json inventory_to_json(const RepoInventory& inv);
RepoInventory inventory_from_json(const nlohmann::ordered_json& j);

} // namespace scribe
