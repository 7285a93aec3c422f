#pragma once

// Internal line-level scanner for subject-language (Python) source. Produces
// physical-line classifications and logical statement lines with a lightweight
// token stream; analysis.cpp builds code units on top of this.

#include <cstdint>
#include <string>
#include <vector>

namespace scribe::pyscan {

enum class TokKind { name, keyword, number, str, op, error };

struct Token {
    TokKind kind;
    std::string text;
};

struct PhysLine {
    bool blank = false;
    bool has_code = false;     // any non-comment content, string interiors included
    bool has_comment = false;
    int comment_col = -1;      // byte offset of the '#' starting the comment, -1 if none
    bool in_docstring = false; // marked by the unit builder
};

// One statement: physical lines joined across bracket/backslash/string
// continuations.
struct LogicalLine {
    int first_line = 1; // 1-based
    int last_line = 1;
    int indent = 0;     // leading whitespace width, tabs expanded to multiples of 8
    std::vector<Token> tokens;
    std::string raw; // physical lines joined with '\n'
    bool tokenize_error = false;
};

struct ScanResult {
    std::vector<PhysLine> lines; // index 0 is physical line 1
    std::vector<LogicalLine> logical;
    std::uint64_t loc = 0;
};

ScanResult scan(const std::string& text);

bool is_keyword(const std::string& s);

// True for tokens that can act as an operand boundary on the left/right of a
// juxtaposition check (names, literals, closing brackets).
bool ends_operand(const Token& t);
bool starts_operand(const Token& t);

} // namespace scribe::pyscan
