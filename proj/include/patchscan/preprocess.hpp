#pragma once

// Source-text normalization: comment stripping, whitespace collapsing, the
// meaningful-statement filter, statement/file classification and context
// keyword extraction.

#include "patchscan/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace patchscan {

enum class StatementKind { Assignment, Declaration, ControlFlow, Return, CallOrExpr, PreprocessorOrImport, Other };

inline std::string_view to_string(StatementKind k) {
    switch (k) {
    case StatementKind::Assignment: return "Assignment";
    case StatementKind::Declaration: return "Declaration";
    case StatementKind::ControlFlow: return "ControlFlow";
    case StatementKind::Return: return "Return";
    case StatementKind::CallOrExpr: return "CallOrExpr";
    case StatementKind::PreprocessorOrImport: return "PreprocessorOrImport";
    case StatementKind::Other: return "Other";
    }
    return "Other";
}

struct FileClass {
    enum Kind { CSource, CHeader, Go, Other };
    Kind kind = Other;
    std::string ext; // lower-cased, with the dot; only meaningful for Other

    friend bool operator==(const FileClass& a, const FileClass& b) {
        return a.kind == b.kind && (a.kind != Other || a.ext == b.ext);
    }
};

inline FileClass classify_file(std::string_view path) {
    auto slash = path.find_last_of('/');
    auto base = slash == std::string_view::npos ? path : path.substr(slash + 1);
    auto dot = base.find_last_of('.');
    std::string ext;
    if (dot != std::string_view::npos && dot != 0) ext = std::string(base.substr(dot));
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });

    if (ext == ".c" || ext == ".cc" || ext == ".cpp" || ext == ".cxx") return {FileClass::CSource, {}};
    if (ext == ".h" || ext == ".hpp" || ext == ".hh") return {FileClass::CHeader, {}};
    if (ext == ".go") return {FileClass::Go, {}};
    return {FileClass::Other, ext};
}

struct NormalizedLine {
    std::string raw;
    std::string norm;
    std::string path;
    int line_no = 0;
    StatementKind kind = StatementKind::Other;

    friend bool operator==(const NormalizedLine&, const NormalizedLine&) = default;
};

struct ContextKeyword {
    std::string keyword;
    NormalizedLine source_line;
};

namespace detail {

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

inline bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }

inline bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

inline std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
    }
    return out;
}

inline bool is_bracket_only(std::string_view norm) {
    return std::all_of(norm.begin(), norm.end(), [](char c) {
        return c == '{' || c == '}' || c == '(' || c == ')' || c == '[' || c == ']' || c == ';' || c == ' ';
    });
}

// Removes comments from one physical line, carrying block-comment and
// raw-string state across lines. Comments are replaced by a single space so
// tokens on either side never fuse.
class CommentStripper {
public:
    explicit CommentStripper(FileClass fc)
        : hash_comments_(fc.kind == FileClass::Other), backtick_strings_(fc.kind == FileClass::Go) {}

    std::string strip(std::string_view line) {
        std::string out;
        out.reserve(line.size());
        std::size_t i = 0;
        const std::size_t n = line.size();
        char quote = 0;
        while (i < n) {
            char c = line[i];
            if (in_block_) {
                if (c == '*' && i + 1 < n && line[i + 1] == '/') {
                    in_block_ = false;
                    out.push_back(' ');
                    i += 2;
                } else {
                    ++i;
                }
                continue;
            }
            if (in_raw_) {
                out.push_back(c);
                if (c == '`') in_raw_ = false;
                ++i;
                continue;
            }
            if (quote) {
                out.push_back(c);
                if (c == '\\' && i + 1 < n) {
                    out.push_back(line[i + 1]);
                    i += 2;
                    continue;
                }
                if (c == quote) quote = 0;
                ++i;
                continue;
            }
            if (c == '"' || c == '\'') {
                quote = c;
                out.push_back(c);
                ++i;
                continue;
            }
            if (c == '`' && backtick_strings_) {
                in_raw_ = true;
                out.push_back(c);
                ++i;
                continue;
            }
            if (c == '/' && i + 1 < n && line[i + 1] == '/') break;
            if (c == '/' && i + 1 < n && line[i + 1] == '*') {
                in_block_ = true;
                out.push_back(' ');
                i += 2;
                continue;
            }
            if (c == '#' && hash_comments_) break;
            out.push_back(c);
            ++i;
        }
        return out;
    }

    bool in_block_comment() const { return in_block_; }

private:
    bool hash_comments_;
    bool backtick_strings_;
    bool in_block_ = false;
    bool in_raw_ = false;
};

inline bool starts_with_word(std::string_view s, std::string_view word) {
    if (s.substr(0, word.size()) != word) return false;
    return s.size() == word.size() || !is_ident_char(s[word.size()]);
}

// True when `norm` has an '=' outside literals and brackets that is not part
// of a comparison (==, !=, <=, >=) or an arrow (=>). Compound assignments
// (+=, <<=, :=) count.
inline bool has_top_level_assignment(std::string_view s) {
    int depth = 0;
    char quote = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (quote) {
            if (c == '\\') ++i;
            else if (c == quote) quote = 0;
            continue;
        }
        switch (c) {
        case '"':
        case '\'':
        case '`': quote = c; continue;
        case '(':
        case '[': ++depth; continue;
        case ')':
        case ']': depth = std::max(0, depth - 1); continue;
        default: break;
        }
        if (c != '=' || depth != 0) continue;
        char next = i + 1 < s.size() ? s[i + 1] : '\0';
        if (next == '=' || next == '>') {
            ++i;
            continue;
        }
        char prev = i > 0 ? s[i - 1] : '\0';
        if (prev == '!' || prev == '=') continue;
        if (prev == '<' || prev == '>') {
            // "<<=" / ">>=" are assignments, "<=" / ">=" comparisons
            char prev2 = i > 1 ? s[i - 2] : '\0';
            if (prev2 != prev) continue;
        }
        return true;
    }
    return false;
}

inline bool looks_like_declaration(std::string_view s) {
    static constexpr std::array<std::string_view, 18> qualifiers = {
        "static",   "const",    "extern",   "inline",  "virtual", "unsigned", "signed", "struct", "class",
        "enum",     "constexpr", "volatile", "mutable", "typename", "explicit", "friend", "var",    "register"};
    static constexpr std::array<std::string_view, 10> not_types = {
        "delete", "throw", "goto", "new", "break", "continue", "go", "defer", "co_return", "co_yield"};

    std::size_t i = 0;
    auto skip_ws = [&] {
        while (i < s.size() && s[i] == ' ') ++i;
    };
    auto read_ident = [&](bool allow_scope) {
        std::size_t start = i;
        if (i >= s.size() || !(is_ident_start(s[i]) || s[i] == '~')) return std::string_view{};
        ++i;
        while (i < s.size() && (is_ident_char(s[i]) || (allow_scope && (s[i] == ':' || s[i] == '~')))) ++i;
        return s.substr(start, i - start);
    };

    std::string_view type;
    for (;;) {
        skip_ws();
        auto word = read_ident(true);
        if (word.empty()) return false;
        if (std::find(qualifiers.begin(), qualifiers.end(), word) != qualifiers.end()) continue;
        if (std::find(not_types.begin(), not_types.end(), word) != not_types.end()) return false;
        type = word;
        break;
    }
    if (i < s.size() && s[i] == '<') {
        int depth = 0;
        for (; i < s.size(); ++i) {
            if (s[i] == '<') ++depth;
            else if (s[i] == '>' && --depth == 0) {
                ++i;
                break;
            } else if (s[i] == ';' || s[i] == '=') return false;
        }
        if (depth != 0) return false;
    }
    bool separated = false;
    while (i < s.size() && (s[i] == ' ' || s[i] == '*' || s[i] == '&')) {
        separated = true;
        ++i;
    }
    if (!separated) return false;
    // "const" after the pointer, e.g. "char* const p;"
    while (starts_with_word(s.substr(i), "const")) {
        i += 5;
        skip_ws();
    }
    auto name = read_ident(true);
    if (name.empty()) return false;
    skip_ws();
    if (i == s.size()) return true;
    char c = s[i];
    return c == ';' || c == '(' || c == '[' || c == '{' || c == ',' || c == ')';
}

} // namespace detail

inline StatementKind classify_statement(std::string_view norm) {
    using detail::starts_with_word;
    std::string_view s = norm;
    while (!s.empty() && (s.front() == '}' || s.front() == ' ')) s.remove_prefix(1);
    if (s.empty()) return StatementKind::Other;

    for (std::string_view kw : {"if", "else", "for", "while", "switch", "case"})
        if (starts_with_word(s, kw)) return StatementKind::ControlFlow;
    if (starts_with_word(s, "return")) return StatementKind::Return;
    if (s.front() == '#') return StatementKind::PreprocessorOrImport;
    for (std::string_view kw : {"import", "package", "using"})
        if (starts_with_word(s, kw)) return StatementKind::PreprocessorOrImport;
    if (detail::has_top_level_assignment(s)) return StatementKind::Assignment;
    if (detail::looks_like_declaration(s)) return StatementKind::Declaration;
    if (s.find('(') != std::string_view::npos || s.back() == ';' || s.back() == ',') return StatementKind::CallOrExpr;
    return StatementKind::Other;
}

inline StatementKind classify_statement(const NormalizedLine& stmt) { return classify_statement(stmt.norm); }

// Kinds only filter when both sides are known.
inline bool kinds_compatible(StatementKind a, StatementKind b) {
    return a == b || a == StatementKind::Other || b == StatementKind::Other;
}

// Keeps the meaningful statements of `lines`. `first_line_no` is the line
// number of lines[0], so a contiguous excerpt of a file can be normalized
// without reading the whole file.
inline std::vector<NormalizedLine> extract_statements(std::span<const std::string> lines, const std::string& path,
                                                      const FileClass& file_class, int first_line_no = 1,
                                                      Diagnostics* diags = nullptr) {
    std::vector<NormalizedLine> out;
    detail::CommentStripper stripper(file_class);
    for (std::size_t idx = 0; idx < lines.size(); ++idx) {
        auto norm = detail::collapse_whitespace(stripper.strip(lines[idx]));
        if (norm.empty() || detail::is_bracket_only(norm)) continue;
        NormalizedLine nl;
        nl.raw = lines[idx];
        if (!nl.raw.empty() && nl.raw.back() == '\r') nl.raw.pop_back();
        nl.kind = classify_statement(norm);
        nl.norm = std::move(norm);
        nl.path = path;
        nl.line_no = first_line_no + static_cast<int>(idx);
        out.push_back(std::move(nl));
    }
    if (stripper.in_block_comment())
        diag(diags, "UnterminatedComment", path + ": block comment not closed before end of input");
    return out;
}

inline std::vector<NormalizedLine> extract_statements(std::span<const std::string> lines, const std::string& path,
                                                      Diagnostics* diags = nullptr) {
    return extract_statements(lines, path, classify_file(path), 1, diags);
}

// Maximal runs over [A-Za-z0-9_.:].
inline std::vector<std::string_view> keyword_tokens(std::string_view text) {
    auto in_alphabet = [](char c) { return detail::is_ident_char(c) || c == '.' || c == ':'; };
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!in_alphabet(text[i])) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < text.size() && in_alphabet(text[i])) ++i;
        tokens.push_back(text.substr(start, i - start));
    }
    return tokens;
}

inline bool is_mixed_case(std::string_view token) {
    bool lower = false, upper = false;
    for (char c : token) {
        lower |= (c >= 'a' && c <= 'z');
        upper |= (c >= 'A' && c <= 'Z');
    }
    return lower && upper;
}

// The longest mixed-case token of the statement (leftmost on ties).
inline std::optional<ContextKeyword> extract_keyword(const NormalizedLine& stmt) {
    std::string_view best;
    for (auto tok : keyword_tokens(stmt.norm))
        if (is_mixed_case(tok) && tok.size() > best.size()) best = tok;
    if (best.empty()) return std::nullopt;
    return ContextKeyword{std::string(best), stmt};
}

} // namespace patchscan
