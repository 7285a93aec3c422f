#include "scribe/analysis.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "python_scanner.hpp"

namespace scribe {

namespace {

using pyscan::LogicalLine;
using pyscan::PhysLine;
using pyscan::ScanResult;
using pyscan::TokKind;
using pyscan::Token;

bool is_op(const Token& t, const char* text) {
    return t.kind == TokKind::op && t.text == text;
}
bool is_kw(const Token& t, const char* text) {
    return t.kind == TokKind::keyword && t.text == text;
}

// Index of the first ':' outside brackets, or -1.
int top_level_colon(const std::vector<Token>& toks) {
    int depth = 0;
    for (size_t i = 0; i < toks.size(); ++i) {
        const Token& t = toks[i];
        if (t.kind == TokKind::op) {
            if (t.text == "(" || t.text == "[" || t.text == "{") ++depth;
            else if (t.text == ")" || t.text == "]" || t.text == "}") --depth;
            else if (t.text == ":" && depth == 0) return static_cast<int>(i);
        } else if (t.kind == TokKind::keyword && t.text == "lambda" && depth == 0) {
            // the lambda's ':' is not a statement header colon; skip to it
            for (++i; i < toks.size(); ++i) {
                if (toks[i].kind == TokKind::op) {
                    if (toks[i].text == "(" || toks[i].text == "[" || toks[i].text == "{") ++depth;
                    else if (toks[i].text == ")" || toks[i].text == "]" || toks[i].text == "}") --depth;
                    else if (toks[i].text == ":" && depth == 0) break;
                }
            }
        }
    }
    return -1;
}

bool string_only_statement(const std::vector<Token>& toks) {
    if (toks.empty()) return false;
    for (const auto& t : toks) {
        if (t.kind != TokKind::str) return false;
    }
    return true;
}

// Lightweight validity check: rejects juxtaposed operands ("the cat sat"),
// dangling operators, and tokenizer errors. Keyword operators (and, or, in,
// is, not, if, else, for, lambda, await) separate operands like any operator.
bool plausible_statement(const std::vector<Token>& toks, bool compound_header) {
    if (toks.empty()) return false;
    for (size_t i = 0; i < toks.size(); ++i) {
        if (toks[i].kind == TokKind::error) return false;
        if (i + 1 < toks.size()) {
            const Token& a = toks[i];
            const Token& b = toks[i + 1];
            if (pyscan::ends_operand(a) && pyscan::starts_operand(b)) {
                if (a.kind == TokKind::str && b.kind == TokKind::str) continue; // implicit concat
                return false;
            }
        }
    }
    const Token& last = toks.back();
    if (last.kind == TokKind::op) {
        static const std::set<std::string> ok_enders = {")", "]", "}", ",", ";", "...", ":"};
        if (!ok_enders.count(last.text)) return false;
        if (last.text == ":" && !compound_header) return false; // bare "name:" is not a statement
    }
    return true;
}

struct Block {
    int body_indent = 0;      // indent of statements directly in this block
    int unit_index = -1;      // -1 for plain (if/for/...) blocks
    bool expects_docstring = false;
};

struct PendingBlock {
    bool active = false;
    int header_indent = 0;
    int unit_index = -1;
    bool expects_docstring = false;
};

class UnitBuilder {
public:
    UnitBuilder(const ScanResult& scan, const std::string& path)
        : scan_(scan), path_(path) {}

    void run(CodeSummary& out) {
        make_module_unit();
        blocks_.push_back(Block{0, 0, true});

        for (const auto& ll : scan_.logical) {
            if (ll.tokens.empty()) continue; // stray whitespace artifacts
            handle_dedent(ll);
            process_statement(ll);
            last_stmt_end_ = ll.last_line;
        }
        if (pending_.active) ++errors_; // header promised a block, file ended
        close_all();

        finalize(out);
    }

    int error_count() const { return errors_; }
    int plausible_count() const { return plausible_; }

private:
    void make_module_unit() {
        CodeUnit mod;
        mod.kind = UnitKind::module;
        std::string stem = path_;
        size_t slash = stem.find_last_of('/');
        if (slash != std::string::npos) stem = stem.substr(slash + 1);
        size_t dot = stem.find_last_of('.');
        if (dot != std::string::npos && dot > 0) stem = stem.substr(0, dot);
        if (stem.empty()) stem = "module";
        mod.name = stem;
        mod.qualified_name = stem;
        mod.nesting_depth = 0;
        mod.start_line = 1;
        mod.end_line = static_cast<int>(std::max<std::uint64_t>(scan_.loc, 1));
        units_.push_back(std::move(mod));
        unit_path_.clear();
    }

    void handle_dedent(const LogicalLine& ll) {
        if (pending_.active) {
            if (ll.indent > pending_.header_indent) {
                blocks_.push_back(
                    Block{ll.indent, pending_.unit_index, pending_.expects_docstring});
                pending_.active = false;
                return;
            }
            // Header promised a block, none came.
            ++errors_;
            pending_.active = false;
        }
        while (blocks_.size() > 1 && ll.indent < blocks_.back().body_indent) {
            pop_block();
        }
        if (ll.indent != blocks_.back().body_indent) {
            // Unindent to a level that matches no open block (or an indent
            // with no preceding header). Recover in the nearest block.
            ++errors_;
        }
    }

    void pop_block() {
        Block b = blocks_.back();
        blocks_.pop_back();
        if (b.unit_index > 0) {
            units_[b.unit_index].end_line = last_stmt_end_;
            if (!unit_path_.empty()) unit_path_.pop_back();
        }
    }

    void close_all() {
        while (blocks_.size() > 1) pop_block();
    }

    int enclosing_unit() const {
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
            if (it->unit_index >= 0) return it->unit_index;
        }
        return 0;
    }

    void process_statement(const LogicalLine& ll) {
        const auto& toks = ll.tokens;
        size_t k = 0;
        bool is_async = is_kw(toks[0], "async");
        if (is_async && toks.size() > 1) k = 1;

        if (k < toks.size() && (is_kw(toks[k], "def") || is_kw(toks[k], "class"))) {
            handle_def_or_class(ll, k, is_kw(toks[k], "class"));
            blocks_.back().expects_docstring = false;
            return;
        }
        if (is_kw(toks[0], "import") || is_kw(toks[0], "from")) {
            handle_import(toks);
            blocks_.back().expects_docstring = false;
            ++plausible_;
            return;
        }

        int colon = top_level_colon(toks);
        bool compound = false;
        if (!toks.empty()) {
            const Token& t0 = toks[0];
            compound = is_kw(t0, "if") || is_kw(t0, "elif") || is_kw(t0, "else") ||
                       is_kw(t0, "for") || is_kw(t0, "while") || is_kw(t0, "try") ||
                       is_kw(t0, "except") || is_kw(t0, "finally") || is_kw(t0, "with") ||
                       is_kw(t0, "async") ||
                       ((t0.kind == TokKind::name && (t0.text == "match" || t0.text == "case")) &&
                        colon >= 0);
        }
        if (compound && colon < 0) {
            ++errors_;
            blocks_.back().expects_docstring = false;
            return;
        }
        if (compound && colon == static_cast<int>(toks.size()) - 1) {
            // Block header; body statements belong to a plain block.
            if (plausible_statement(toks, true)) ++plausible_;
            else ++errors_;
            pending_ = PendingBlock{true, ll.indent, -1, false};
            blocks_.back().expects_docstring = false;
            return;
        }

        if (string_only_statement(toks) && blocks_.back().expects_docstring) {
            int ui = blocks_.back().unit_index;
            if (ui >= 0 && !units_[ui].docstring.has_value()) {
                units_[ui].docstring = toks[0].text;
                for (int line = ll.first_line; line <= ll.last_line; ++line) {
                    docstring_lines_.push_back(line);
                }
            }
            blocks_.back().expects_docstring = false;
            ++plausible_;
            return;
        }

        blocks_.back().expects_docstring = false;
        if (plausible_statement(toks, compound)) ++plausible_;
        else ++errors_;
    }

    void handle_def_or_class(const LogicalLine& ll, size_t k, bool is_class) {
        const auto& toks = ll.tokens;
        // def NAME ( params ) [-> ann] :   /   class NAME [( bases )] :
        if (k + 1 >= toks.size() || toks[k + 1].kind != TokKind::name) {
            ++errors_;
            return;
        }
        int colon = top_level_colon(toks);
        if (colon < 0) {
            ++errors_;
            return;
        }
        std::string name = toks[k + 1].text;
        bool has_parens = k + 2 < toks.size() && is_op(toks[k + 2], "(");
        if (!is_class && !has_parens) {
            ++errors_;
            return;
        }
        for (const auto& t : toks) {
            if (t.kind == TokKind::error) {
                ++errors_;
                return;
            }
        }

        CodeUnit unit;
        unit.kind = is_class ? UnitKind::cls
                             : (units_[enclosing_unit()].kind == UnitKind::cls ? UnitKind::method
                                                                               : UnitKind::function);
        unit.name = name;
        std::string qual;
        for (const auto& part : unit_path_) qual += part + ".";
        qual += name;
        unit.qualified_name = qual;
        unit.signature = has_parens ? extract_signature(ll.raw) : "";
        unit.start_line = ll.first_line;
        unit.end_line = ll.last_line;
        unit.nesting_depth = static_cast<int>(unit_path_.size()) + 1;

        int idx = static_cast<int>(units_.size());
        units_.push_back(std::move(unit));
        ++plausible_;

        bool inline_body = colon != static_cast<int>(toks.size()) - 1;
        if (inline_body) return;
        unit_path_.push_back(name);
        pending_ = PendingBlock{true, ll.indent, idx, true};
    }

    // Text between the header's outer parens, whitespace runs collapsed.
    static std::string extract_signature(const std::string& raw) {
        size_t open = std::string::npos;
        int depth = 0;
        char quote = 0;
        for (size_t i = 0; i < raw.size(); ++i) {
            char c = raw[i];
            if (quote) {
                if (c == '\\') ++i;
                else if (c == quote) quote = 0;
                continue;
            }
            if (c == '"' || c == '\'') {
                quote = c;
                continue;
            }
            if (c == '(') {
                if (depth == 0 && open == std::string::npos) open = i;
                ++depth;
            } else if (c == ')') {
                --depth;
                if (depth == 0 && open != std::string::npos) {
                    std::string inner = raw.substr(open + 1, i - open - 1);
                    std::string collapsed;
                    bool in_ws = false;
                    for (char ic : inner) {
                        if (ic == ' ' || ic == '\t' || ic == '\n' || ic == '\r') {
                            in_ws = true;
                            continue;
                        }
                        if (in_ws && !collapsed.empty()) collapsed += ' ';
                        in_ws = false;
                        collapsed += ic;
                    }
                    return "(" + collapsed + ")";
                }
            }
        }
        return "()";
    }

    void handle_import(const std::vector<Token>& toks) {
        if (is_kw(toks[0], "from")) {
            std::string mod;
            size_t i = 1;
            for (; i < toks.size() && !is_kw(toks[i], "import"); ++i) {
                if (toks[i].kind == TokKind::name) mod += toks[i].text;
                else if (is_op(toks[i], ".")) mod += ".";
                else if (is_op(toks[i], "...")) mod += "...";
            }
            if (!mod.empty()) add_import(mod);
            return;
        }
        // import a.b as x, c
        std::string mod;
        bool in_as = false;
        for (size_t i = 1; i < toks.size(); ++i) {
            const Token& t = toks[i];
            if (is_op(t, ",")) {
                if (!mod.empty()) add_import(mod);
                mod.clear();
                in_as = false;
            } else if (is_kw(t, "as")) {
                in_as = true;
            } else if (!in_as && t.kind == TokKind::name) {
                mod += t.text;
            } else if (!in_as && is_op(t, ".")) {
                mod += ".";
            }
        }
        if (!mod.empty()) add_import(mod);
    }

    void add_import(const std::string& name) {
        if (std::find(imports_.begin(), imports_.end(), name) == imports_.end()) {
            imports_.push_back(name);
        }
    }

    void finalize(CodeSummary& out) {
        // Redefined qualified names get an ordinal suffix.
        std::map<std::string, int> seen;
        for (auto& u : units_) {
            int n = ++seen[u.qualified_name];
            if (n > 1) u.qualified_name += "#" + std::to_string(n);
        }
        out.units = std::move(units_);
        out.imports = std::move(imports_);
    }

public:
    const std::vector<int>& marked_docstring_lines() const { return docstring_lines_; }

private:
    const ScanResult& scan_;
    const std::string& path_;
    std::vector<CodeUnit> units_;
    std::vector<std::string> unit_path_; // enclosing unit names, module excluded
    std::vector<std::string> imports_;
    std::vector<Block> blocks_;
    PendingBlock pending_;
    std::vector<int> docstring_lines_;
    int last_stmt_end_ = 1;
    int errors_ = 0;
    int plausible_ = 0;
};

std::string first_sentence(const std::string& doc) {
    // First line up to the first sentence end; collapse inner whitespace.
    std::string out;
    for (size_t i = 0; i < doc.size(); ++i) {
        char c = doc[i];
        if (c == '\n') break;
        out += c;
        if ((c == '.' || c == '!' || c == '?') &&
            (i + 1 >= doc.size() || doc[i + 1] == ' ' || doc[i + 1] == '\n')) {
            break;
        }
    }
    // trim
    size_t b = out.find_first_not_of(" \t");
    size_t e = out.find_last_not_of(" \t");
    if (b == std::string::npos) return "";
    return out.substr(b, e - b + 1);
}

} // namespace

const char* to_string(UnitKind k) {
    switch (k) {
        case UnitKind::module: return "module";
        case UnitKind::cls: return "class";
        case UnitKind::function: return "function";
        case UnitKind::method: return "method";
    }
    return "unknown";
}

const char* to_string(ParseStatus s) {
    switch (s) {
        case ParseStatus::clean: return "clean";
        case ParseStatus::recovered: return "recovered";
        case ParseStatus::opaque: return "opaque";
    }
    return "unknown";
}

CodeSummary parse_source(const SourceText& text, const std::string& path) {
    ScanResult scan = pyscan::scan(text.text);

    CodeSummary summary;
    summary.file = path;
    summary.loc = scan.loc;

    UnitBuilder builder(scan, path);
    builder.run(summary);

    // Mark docstring lines, then count line classes. Docstring wins over
    // comment when a line carries both.
    std::vector<bool> in_doc(scan.lines.size(), false);
    for (int line : builder.marked_docstring_lines()) {
        if (line >= 1 && line <= static_cast<int>(in_doc.size())) in_doc[line - 1] = true;
    }
    summary.docstring_lines = 0;
    summary.comment_lines = 0;
    for (size_t i = 0; i < scan.lines.size(); ++i) {
        if (in_doc[i]) {
            ++summary.docstring_lines;
        } else if (scan.lines[i].has_comment) {
            ++summary.comment_lines;
        }
    }

    int non_module_units = static_cast<int>(summary.units.size()) - 1;
    if (builder.error_count() == 0) {
        summary.parse_status = ParseStatus::clean;
    } else if (non_module_units > 0 || builder.plausible_count() > 0) {
        summary.parse_status = ParseStatus::recovered;
    } else {
        summary.parse_status = ParseStatus::opaque;
        summary.units.clear();
        summary.docstring_lines = 0; // no units, no docstrings
        summary.comment_lines = 0;
        for (const auto& pl : scan.lines) {
            if (pl.has_comment) ++summary.comment_lines;
        }
    }

    summary.comment_density =
        summary.loc > 0
            ? static_cast<double>(summary.comment_lines + summary.docstring_lines) /
                  static_cast<double>(summary.loc)
            : 0.0;
    return summary;
}

double comment_density(const CodeSummary& summary) {
    return summary.comment_density;
}

std::string to_outline(const CodeSummary& summary) {
    std::ostringstream out;
    if (summary.parse_status == ParseStatus::opaque) {
        out << summary.file << ": unparsed file of " << summary.loc << " lines\n";
        return out.str();
    }
    for (const auto& u : summary.units) {
        if (u.kind == UnitKind::module) {
            out << "module " << summary.file << " [" << summary.loc << " lines]";
            if (u.docstring) {
                std::string s = first_sentence(*u.docstring);
                if (!s.empty()) out << ": " << s;
            }
            out << "\n";
            continue;
        }
        for (int i = 0; i < u.nesting_depth; ++i) out << "  ";
        out << to_string(u.kind) << " " << u.qualified_name << u.signature << " [lines "
            << u.start_line << "-" << u.end_line << "]";
        if (u.docstring) {
            std::string s = first_sentence(*u.docstring);
            if (!s.empty()) out << ": " << s;
        }
        out << "\n";
    }
    return out.str();
}

int parameter_count(const std::string& signature) {
    if (signature.size() < 2) return 0;
    std::string inner = signature.substr(1, signature.size() - 2);
    // trim
    size_t b = inner.find_first_not_of(" \t");
    if (b == std::string::npos) return 0;
    int depth = 0;
    int count = 1;
    char quote = 0;
    for (size_t i = 0; i < inner.size(); ++i) {
        char c = inner[i];
        if (quote) {
            if (c == '\\') ++i;
            else if (c == quote) quote = 0;
            continue;
        }
        if (c == '"' || c == '\'') quote = c;
        else if (c == '(' || c == '[' || c == '{') ++depth;
        else if (c == ')' || c == ']' || c == '}') --depth;
        else if (c == ',' && depth == 0) ++count;
    }
    return count;
}

std::string strip_comments_normalized(const std::string& text) {
    ScanResult scan = pyscan::scan(text);
    CodeSummary summary;
    summary.file = "x";
    summary.loc = scan.loc;
    UnitBuilder builder(scan, summary.file);
    builder.run(summary);

    std::vector<bool> in_doc(scan.lines.size(), false);
    for (int line : builder.marked_docstring_lines()) {
        if (line >= 1 && line <= static_cast<int>(in_doc.size())) in_doc[line - 1] = true;
    }

    // Re-split physical lines the same way the scanner does.
    std::vector<std::string> phys;
    {
        size_t start = 0;
        while (start <= text.size()) {
            size_t nl = text.find('\n', start);
            if (nl == std::string::npos) {
                if (start < text.size()) phys.push_back(text.substr(start));
                break;
            }
            std::string line = text.substr(start, nl - start);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            phys.push_back(std::move(line));
            start = nl + 1;
        }
    }

    std::vector<std::string> kept;
    bool last_blank = false;
    for (size_t i = 0; i < phys.size() && i < scan.lines.size(); ++i) {
        if (in_doc[i]) continue; // docstring line
        const PhysLine& pl = scan.lines[i];
        std::string line = phys[i];
        if (pl.has_comment) {
            if (!pl.has_code) continue; // comment-only line
            if (pl.comment_col >= 0 && pl.comment_col <= static_cast<int>(line.size())) {
                line = line.substr(0, pl.comment_col);
            }
        }
        size_t end = line.find_last_not_of(" \t\r");
        line = end == std::string::npos ? "" : line.substr(0, end + 1);
        bool blank = line.empty();
        if (blank) {
            if (last_blank || kept.empty()) continue; // collapse runs, trim leading
            kept.push_back("");
            last_blank = true;
        } else {
            kept.push_back(line);
            last_blank = false;
        }
    }
    while (!kept.empty() && kept.back().empty()) kept.pop_back();

    std::string out;
    for (size_t i = 0; i < kept.size(); ++i) {
        out += kept[i];
        if (i + 1 < kept.size()) out += '\n';
    }
    return out;
}

nlohmann::ordered_json summary_to_json(const CodeSummary& s) {
    nlohmann::ordered_json j;
    j["file"] = s.file;
    j["units"] = nlohmann::ordered_json::array();
    for (const auto& u : s.units) {
        nlohmann::ordered_json ju;
        ju["kind"] = to_string(u.kind);
        ju["name"] = u.name;
        ju["qualified_name"] = u.qualified_name;
        ju["signature"] = u.signature;
        if (u.docstring) ju["docstring"] = *u.docstring;
        ju["line_span"] = {u.start_line, u.end_line};
        ju["nesting_depth"] = u.nesting_depth;
        j["units"].push_back(std::move(ju));
    }
    j["imports"] = s.imports;
    j["loc"] = s.loc;
    j["comment_lines"] = s.comment_lines;
    j["docstring_lines"] = s.docstring_lines;
    j["comment_density"] = s.comment_density;
    j["parse_status"] = to_string(s.parse_status);
    return j;
}

} // namespace scribe
