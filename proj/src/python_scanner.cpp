#include "python_scanner.hpp"

#include <cctype>
#include <set>

namespace scribe::pyscan {

namespace {

bool is_ident_start(unsigned char c) {
    return std::isalpha(c) || c == '_' || c >= 0x80;
}
bool is_ident_cont(unsigned char c) {
    return std::isalnum(c) || c == '_' || c >= 0x80;
}

bool is_string_prefix(const std::string& s) {
    if (s.empty() || s.size() > 2) return false;
    for (char c : s) {
        char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (l != 'r' && l != 'b' && l != 'f' && l != 'u') return false;
    }
    return true;
}

bool valid_number_literal(const std::string& num) {
    bool hex = num.size() > 1 && (num[1] == 'x' || num[1] == 'X');
    for (size_t k = 0; k < num.size(); ++k) {
        char c = num[k];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '_' || c == '.') continue;
        if (hex && std::isxdigit(static_cast<unsigned char>(c))) continue;
        if (k == 1 && (c == 'x' || c == 'X' || c == 'o' || c == 'O' || c == 'b' || c == 'B'))
            continue;
        if (c == 'e' || c == 'E' || c == 'j' || c == 'J') continue;
        return false;
    }
    return true;
}

const std::set<std::string>& multi_char_ops() {
    static const std::set<std::string> ops = {
        "**=", "//=", ">>=", "<<=", "...", "!=", ">=", "<=", "==", "->", ":=",
        "+=", "-=", "*=", "/=", "%=",  "@=", "&=", "|=", "^=", "**", "//",
        ">>", "<<"};
    return ops;
}

class Scanner {
public:
    explicit Scanner(const std::string& text) : text_(text) {}

    ScanResult run() {
        split_lines();
        result_.loc = phys_.size();
        result_.lines.resize(phys_.size());

        for (size_t li = 0; li < phys_.size(); ++li) {
            scan_physical_line(li);
        }
        if (cur_active_) {
            if (str_active_) {
                push_token(TokKind::error, "<unterminated-string>");
                str_active_ = false;
            }
            finish_logical(static_cast<int>(phys_.size()));
        }
        return std::move(result_);
    }

private:
    void split_lines() {
        size_t start = 0;
        // A UTF-8 BOM is not part of the first token.
        if (text_.size() >= 3 && text_.compare(0, 3, "\xEF\xBB\xBF") == 0) start = 3;
        while (start <= text_.size()) {
            size_t nl = text_.find('\n', start);
            std::string line;
            if (nl == std::string::npos) {
                if (start >= text_.size()) break;
                line = text_.substr(start);
                start = text_.size() + 1;
            } else {
                line = text_.substr(start, nl - start);
                start = nl + 1;
            }
            if (!line.empty() && line.back() == '\r') line.pop_back();
            phys_.push_back(std::move(line));
            if (nl == std::string::npos) break;
        }
    }

    static int indent_width(const std::string& s, size_t* first_nonws) {
        int w = 0;
        size_t i = 0;
        for (; i < s.size(); ++i) {
            if (s[i] == ' ') {
                ++w;
            } else if (s[i] == '\t') {
                w = (w / 8 + 1) * 8;
            } else if (s[i] == '\f') {
                // ignored
            } else {
                break;
            }
        }
        *first_nonws = i;
        return w;
    }

    void begin_logical(int line_no, int indent) {
        cur_ = LogicalLine{};
        cur_.first_line = line_no;
        cur_.indent = indent;
        cur_active_ = true;
    }

    void finish_logical(int line_no) {
        cur_.last_line = line_no;
        for (const auto& t : cur_.tokens) {
            if (t.kind == TokKind::error) {
                cur_.tokenize_error = true;
                break;
            }
        }
        result_.logical.push_back(std::move(cur_));
        cur_active_ = false;
        bracket_depth_ = 0;
        backslash_cont_ = false;
    }

    void push_token(TokKind k, std::string text) {
        cur_.tokens.push_back(Token{k, std::move(text)});
    }

    // Recovery probe: a column-0 definition or import can only start a new
    // top-level statement, so an unclosed bracket above it is an error.
    static bool starts_toplevel_statement(const std::string& s) {
        if (s.empty() || s[0] == ' ' || s[0] == '\t') return false;
        if (s[0] == '@') return true;
        for (const char* kw : {"def ", "class ", "import ", "from "}) {
            if (s.rfind(kw, 0) == 0) return true;
        }
        return false;
    }

    void scan_physical_line(size_t li) {
        const std::string& s = phys_[li];
        PhysLine& pl = result_.lines[li];
        const int line_no = static_cast<int>(li) + 1;
        size_t pos = 0;

        if (cur_active_ && bracket_depth_ > 0 && !str_active_ && !backslash_cont_ &&
            starts_toplevel_statement(s)) {
            push_token(TokKind::error, "<unclosed-bracket>");
            finish_logical(line_no - 1);
        }

        if (!cur_active_) {
            size_t first = 0;
            int indent = indent_width(s, &first);
            pos = first;
            if (pos >= s.size()) {
                pl.blank = true;
                return;
            }
            if (s[pos] == '#') {
                pl.has_comment = true;
                pl.comment_col = static_cast<int>(pos);
                return;
            }
            begin_logical(line_no, indent);
            cur_.raw = s;
        } else {
            backslash_cont_ = false;
            if (str_active_) pl.has_code = true; // string interior
            cur_.raw += "\n";
            cur_.raw += s;
        }

        scan_chars(s, pos, pl);

        if (str_active_ && !str_triple_) {
            // Single-quoted string left open at end of line: recover.
            push_token(TokKind::error, "<unterminated-string>");
            str_active_ = false;
            str_buf_.clear();
        }
        bool continues = str_active_ || bracket_depth_ > 0 || backslash_cont_;
        if (!continues && cur_active_) finish_logical(line_no);
    }

    void scan_chars(const std::string& s, size_t start, PhysLine& pl) {
        size_t i = start;
        const size_t n = s.size();
        while (i < n) {
            char c = s[i];
            if (str_active_) {
                pl.has_code = true;
                if (c == '\\' && i + 1 < n) {
                    str_buf_ += s.substr(i, 2);
                    i += 2;
                    continue;
                }
                if (c == str_quote_) {
                    if (!str_triple_) {
                        ++i;
                        push_token(TokKind::str, str_buf_);
                        str_buf_.clear();
                        str_active_ = false;
                        continue;
                    }
                    if (i + 3 <= n && s[i + 1] == str_quote_ && s[i + 2] == str_quote_) {
                        i += 3;
                        push_token(TokKind::str, str_buf_);
                        str_buf_.clear();
                        str_active_ = false;
                        continue;
                    }
                }
                str_buf_ += c;
                ++i;
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\f' || c == '\r') {
                ++i;
                continue;
            }
            if (c == '#') {
                pl.has_comment = true;
                pl.comment_col = static_cast<int>(i);
                return;
            }
            pl.has_code = true;
            if (c == '"' || c == '\'') {
                open_string(s, i);
                continue;
            }
            if (is_ident_start(static_cast<unsigned char>(c))) {
                size_t j = i;
                while (j < n && is_ident_cont(static_cast<unsigned char>(s[j]))) ++j;
                std::string word = s.substr(i, j - i);
                if (j < n && (s[j] == '"' || s[j] == '\'') && is_string_prefix(word)) {
                    i = j;
                    open_string(s, i);
                    continue;
                }
                push_token(is_keyword(word) ? TokKind::keyword : TokKind::name, word);
                i = j;
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
                size_t j = i;
                while (j < n && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' ||
                                 s[j] == '.')) {
                    ++j;
                }
                std::string num = s.substr(i, j - i);
                push_token(valid_number_literal(num) ? TokKind::number : TokKind::error, num);
                i = j;
                continue;
            }
            if (c == '\\') {
                size_t j = i + 1;
                while (j < n && (s[j] == ' ' || s[j] == '\t' || s[j] == '\r')) ++j;
                if (j >= n) {
                    backslash_cont_ = true;
                    return;
                }
                push_token(TokKind::error, "\\");
                ++i;
                continue;
            }
            if (c == '(' || c == '[' || c == '{') {
                ++bracket_depth_;
                push_token(TokKind::op, std::string(1, c));
                ++i;
                continue;
            }
            if (c == ')' || c == ']' || c == '}') {
                if (bracket_depth_ > 0) {
                    --bracket_depth_;
                    push_token(TokKind::op, std::string(1, c));
                } else {
                    push_token(TokKind::error, std::string(1, c));
                }
                ++i;
                continue;
            }
            bool matched = false;
            for (size_t len = 3; len >= 2; --len) {
                if (i + len <= n && multi_char_ops().count(s.substr(i, len))) {
                    push_token(TokKind::op, s.substr(i, len));
                    i += len;
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
            if (std::string("+-*/%@&|^~<>=.,:;").find(c) != std::string::npos) {
                push_token(TokKind::op, std::string(1, c));
                ++i;
                continue;
            }
            push_token(TokKind::error, std::string(1, c));
            ++i;
        }
    }

    void open_string(const std::string& s, size_t& i) {
        char q = s[i];
        bool triple = i + 2 < s.size() && s[i + 1] == q && s[i + 2] == q;
        str_active_ = true;
        str_quote_ = q;
        str_triple_ = triple;
        str_buf_.clear();
        i += triple ? 3 : 1;
    }

    const std::string& text_;
    std::vector<std::string> phys_;
    ScanResult result_;

    LogicalLine cur_;
    bool cur_active_ = false;
    bool str_active_ = false;
    char str_quote_ = '"';
    bool str_triple_ = false;
    std::string str_buf_;
    int bracket_depth_ = 0;
    bool backslash_cont_ = false;
};

} // namespace

bool is_keyword(const std::string& s) {
    static const std::set<std::string> kw = {
        "False",  "None",   "True",    "and",      "as",       "assert", "async",
        "await",  "break",  "class",   "continue", "def",      "del",    "elif",
        "else",   "except", "finally", "for",      "from",     "global", "if",
        "import", "in",     "is",      "lambda",   "nonlocal", "not",    "or",
        "pass",   "raise",  "return",  "try",      "while",    "with",   "yield"};
    return kw.count(s) > 0;
}

bool ends_operand(const Token& t) {
    switch (t.kind) {
        case TokKind::name:
        case TokKind::number:
        case TokKind::str:
            return true;
        case TokKind::keyword:
            return t.text == "True" || t.text == "False" || t.text == "None";
        case TokKind::op:
            return t.text == ")" || t.text == "]" || t.text == "}" || t.text == "...";
        default:
            return false;
    }
}

bool starts_operand(const Token& t) {
    switch (t.kind) {
        case TokKind::name:
        case TokKind::number:
        case TokKind::str:
            return true;
        case TokKind::keyword:
            return t.text == "True" || t.text == "False" || t.text == "None";
        default:
            return false;
    }
}

ScanResult scan(const std::string& text) {
    return Scanner(text).run();
}

} // namespace scribe::pyscan
