#include "scribe/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "scribe/digest.hpp"
#include "scribe/errors.hpp"

namespace fs = std::filesystem;

namespace scribe {

namespace {

bool has_included_extension(const std::string& name, const IngestRules& rules) {
    for (const auto& ext : rules.include_extensions) {
        if (name.size() >= ext.size() &&
            name.compare(name.size() - ext.size(), ext.size(), ext) == 0) {
            return true;
        }
    }
    return false;
}

std::string read_file_bytes(const fs::path& p, bool& ok) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        ok = false;
        return {};
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    ok = !in.bad();
    return buf.str();
}

// Replace invalid UTF-8 sequences with U+FFFD. Plain byte-level scan: a
// malformed lead/continuation byte yields one replacement character.
std::string decode_utf8_lossy(std::string_view bytes, bool& lossy) {
    static const char* replacement = "\xEF\xBF\xBD";
    std::string out;
    out.reserve(bytes.size());
    lossy = false;
    size_t i = 0;
    const size_t n = bytes.size();
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(bytes[i]);
        size_t len = 0;
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
            len = 2;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
        } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
            len = 4;
        } else {
            out += replacement;
            lossy = true;
            ++i;
            continue;
        }
        if (i + len > n) {
            out += replacement;
            lossy = true;
            ++i;
            continue;
        }
        bool valid = true;
        for (size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(bytes[i + k]) & 0xC0) != 0x80) {
                valid = false;
                break;
            }
        }
        if (valid) {
            out.append(bytes.substr(i, len));
            i += len;
        } else {
            out += replacement;
            lossy = true;
            ++i;
        }
    }
    return out;
}

std::string relative_slash_path(const fs::path& p, const fs::path& root) {
    std::string rel = p.lexically_relative(root).generic_string();
    return rel;
}

void walk(const fs::path& dir, const fs::path& root, const IngestRules& rules,
          std::set<fs::path>& visited_real_dirs, RepoInventory& inv) {
    std::error_code ec;
    // Directory iteration order is OS-dependent; sort so that alias
    // resolution under follow_symlinks is stable across platforms.
    std::vector<fs::directory_entry> entries;
    for (fs::directory_iterator it(dir, fs::directory_options::skip_permission_denied, ec), end;
         it != end; it.increment(ec)) {
        if (ec) break;
        entries.push_back(*it);
    }
    std::sort(entries.begin(), entries.end(),
              [](const fs::directory_entry& a, const fs::directory_entry& b) {
                  return a.path().filename().string() < b.path().filename().string();
              });
    for (const fs::directory_entry& entry : entries) {
        const fs::path& p = entry.path();
        std::error_code sec;
        bool is_symlink = fs::is_symlink(fs::symlink_status(p, sec));
        if (is_symlink && !rules.follow_symlinks) continue;

        if (entry.is_directory(sec)) {
            std::string name = p.filename().string();
            if (std::find(rules.exclude_dirs.begin(), rules.exclude_dirs.end(), name) !=
                rules.exclude_dirs.end()) {
                continue;
            }
            if (rules.follow_symlinks) {
                // Track real paths so symlink cycles terminate.
                fs::path real = fs::weakly_canonical(p, sec);
                if (!sec && !visited_real_dirs.insert(real).second) continue;
            }
            walk(p, root, rules, visited_real_dirs, inv);
            continue;
        }
        if (!entry.is_regular_file(sec)) continue;

        std::string name = p.filename().string();
        if (!has_included_extension(name, rules)) continue;

        std::string rel = relative_slash_path(p, root);
        std::uint64_t size = entry.file_size(sec);
        if (sec) {
            inv.skipped.push_back({rel, "unreadable"});
            continue;
        }
        if (size > rules.max_file_bytes) {
            inv.skipped.push_back({rel, "size"});
            continue;
        }
        bool ok = true;
        std::string bytes = read_file_bytes(p, ok);
        if (!ok) {
            inv.skipped.push_back({rel, "unreadable"});
            continue;
        }
        // A NUL byte marks binary content masquerading under a source suffix.
        if (bytes.find('\0') != std::string::npos) {
            inv.skipped.push_back({rel, "decode"});
            continue;
        }
        FileRecord rec;
        rec.path = rel;
        rec.byte_size = bytes.size();
        rec.content_hash = sha256_hex(bytes);
        rec.line_count = count_lines(bytes);
        inv.files.push_back(std::move(rec));
    }
}

} // namespace

void IngestRules::validate() const {
    if (include_extensions.empty()) {
        throw config_error("invalid_rules", "include_extensions must be non-empty");
    }
    if (max_file_bytes == 0) {
        throw config_error("invalid_rules", "max_file_bytes must be > 0");
    }
}

std::uint64_t count_lines(std::string_view bytes) {
    if (bytes.empty()) return 0;
    std::uint64_t n = 0;
    for (char c : bytes) {
        if (c == '\n') ++n;
    }
    if (bytes.back() != '\n') ++n;
    return n;
}

RepoInventory scan_repository(const fs::path& root, const IngestRules& rules) {
    rules.validate();
    std::error_code ec;
    if (!fs::exists(root, ec)) {
        throw input_error("root_not_found", "no such path: " + root.string());
    }
    if (!fs::is_directory(root, ec)) {
        throw input_error("not_a_directory", "not a directory: " + root.string());
    }

    RepoInventory inv;
    inv.root = fs::absolute(root).lexically_normal().string();

    std::set<fs::path> visited;
    if (rules.follow_symlinks) {
        visited.insert(fs::weakly_canonical(root, ec));
    }
    walk(root, root, rules, visited, inv);

    auto by_path = [](const auto& a, const auto& b) { return a.path < b.path; };
    std::sort(inv.files.begin(), inv.files.end(), by_path);
    std::sort(inv.skipped.begin(), inv.skipped.end(), by_path);

    inv.total_lines = 0;
    for (const auto& f : inv.files) inv.total_lines += f.line_count;
    return inv;
}

SourceText read_source(const FileRecord& record, const fs::path& root) {
    fs::path p = root / fs::path(record.path);
    bool ok = true;
    std::string bytes = read_file_bytes(p, ok);
    std::error_code ec;
    if (!ok || !fs::exists(p, ec)) {
        throw input_error("file_vanished", "file removed since scan: " + record.path);
    }
    std::string hash = sha256_hex(bytes);
    if (hash != record.content_hash) {
        throw input_error("file_vanished", "content changed since scan: " + record.path +
                                               " (expected " + record.content_hash + ", got " +
                                               hash + ")");
    }
    SourceText st;
    st.path = record.path;
    st.text = decode_utf8_lossy(bytes, st.lossy);
    return st;
}

nlohmann::ordered_json inventory_to_json(const RepoInventory& inv) {
    nlohmann::ordered_json j;
    j["root"] = inv.root;
    j["files"] = nlohmann::ordered_json::array();
    for (const auto& f : inv.files) {
        j["files"].push_back({{"path", f.path},
                              {"byte_size", f.byte_size},
                              {"content_hash", f.content_hash},
                              {"line_count", f.line_count}});
    }
    j["skipped"] = nlohmann::ordered_json::array();
    for (const auto& s : inv.skipped) {
        j["skipped"].push_back({{"path", s.path}, {"reason", s.reason}});
    }
    j["total_lines"] = inv.total_lines;
    return j;
}

RepoInventory inventory_from_json(const nlohmann::ordered_json& j) {
    RepoInventory inv;
    inv.root = j.at("root").get<std::string>();
    for (const auto& f : j.at("files")) {
        FileRecord rec;
        rec.path = f.at("path").get<std::string>();
        rec.byte_size = f.at("byte_size").get<std::uint64_t>();
        rec.content_hash = f.at("content_hash").get<std::string>();
        rec.line_count = f.at("line_count").get<std::uint64_t>();
        inv.files.push_back(std::move(rec));
    }
    for (const auto& s : j.at("skipped")) {
        inv.skipped.push_back(
            {s.at("path").get<std::string>(), s.at("reason").get<std::string>()});
    }
    inv.total_lines = j.at("total_lines").get<std::uint64_t>();
    return inv;
}

} // namespace scribe
