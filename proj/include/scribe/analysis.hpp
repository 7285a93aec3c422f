#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "scribe/ingest.hpp"

namespace scribe {

enum class UnitKind { module, cls, function, method };

enum class ParseStatus { clean, recovered, opaque };

struct CodeUnit {
    UnitKind kind = UnitKind::module;
    std::string name;
    std::string qualified_name; // dotted path from file root; "#N" ordinal on redefinition
    std::string signature;      // parameter list as written, parens included; "" for modules
    std::optional<std::string> docstring;
    int start_line = 1; // inclusive, 1-based
    int end_line = 1;
    int nesting_depth = 0;
};

struct CodeSummary {
    std::string file;
    std::vector<CodeUnit> units; // source order; empty when opaque
    std::vector<std::string> imports;
    std::uint64_t loc = 0;
    std::uint64_t comment_lines = 0;   // comment-only plus trailing-comment lines
    std::uint64_t docstring_lines = 0; // lines spanned by docstring literals
    double comment_density = 0.0;      // (comment + docstring) / loc, 0 when loc == 0
    ParseStatus parse_status = ParseStatus::clean;
};

const char* to_string(UnitKind k);
const char* to_string(ParseStatus s);

// Total function: any text yields a valid summary; failures are encoded in
// parse_status, never thrown.
CodeSummary parse_source(const SourceText& text, const std::string& path);

double comment_density(const CodeSummary& summary);

// Deterministic plain-text outline of a summary (no LLM involvement).
std::string to_outline(const CodeSummary& summary);

// Number of top-level comma-separated items in a unit signature.
int parameter_count(const std::string& signature);

// Comment-stripping normalization: drops comment-only lines, trailing
// comments, and docstrings; collapses blank-line runs; strips trailing
// whitespace. Two texts that differ only in comments normalize equal.
std::string strip_comments_normalized(const std::string& text);

nlohmann::ordered_json summary_to_json(const CodeSummary& s);

} // namespace scribe
