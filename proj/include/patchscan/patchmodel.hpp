#pragma once

// Security patches as hunks of deleted/added meaningful statements, with the
// UP/DOWN statement contexts used to locate clones in other repositories.

#include "patchscan/error.hpp"
#include "patchscan/gitio.hpp"
#include "patchscan/preprocess.hpp"
#include "patchscan/timeutil.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace patchscan {

enum class PatchType { DEL, ADD, CHA };

inline std::string_view to_string(PatchType t) {
    switch (t) {
    case PatchType::DEL: return "DEL";
    case PatchType::ADD: return "ADD";
    case PatchType::CHA: return "CHA";
    }
    return "CHA";
}

enum class Side { Up, Down };

inline std::string_view to_string(Side s) { return s == Side::Up ? "UP" : "DOWN"; }

struct ContextEntry {
    std::optional<ContextKeyword> keyword;
    NormalizedLine stmt;
};

struct PatchContext {
    Side side = Side::Up;
    std::vector<ContextEntry> entries;

    bool empty() const { return entries.empty(); }
    std::vector<std::string> norms() const {
        std::vector<std::string> out;
        for (const auto& e : entries) out.push_back(e.stmt.norm);
        return out;
    }
    bool has_keyword() const {
        return std::any_of(entries.begin(), entries.end(), [](const ContextEntry& e) { return e.keyword.has_value(); });
    }
};

// Half-open line range [begin, end) on one side of the diff.
struct LineRange {
    int begin = 0;
    int end = 0;
};

struct PatchHunk {
    std::string path;
    FileClass file_class;
    std::vector<NormalizedLine> dp;
    std::vector<NormalizedLine> ap;
    PatchType ptype = PatchType::CHA;
    PatchContext up_ctx{Side::Up, {}};
    PatchContext down_ctx{Side::Down, {}};
    LineRange old_range; // lines replaced in the pre-patch file
    LineRange new_range; // lines occupied in the post-patch file

    std::vector<std::string> dp_norms() const {
        std::vector<std::string> out;
        for (const auto& s : dp) out.push_back(s.norm);
        return out;
    }
    std::vector<std::string> ap_norms() const {
        std::vector<std::string> out;
        for (const auto& s : ap) out.push_back(s.norm);
        return out;
    }
    std::size_t code_len() const { return std::max(dp.size(), ap.size()); }
};

struct Patch {
    std::optional<std::string> source_sha;
    std::vector<PatchHunk> hunks;
    std::optional<UtcTime> committed_at;
};

inline PatchType classify_patch_type(const std::vector<NormalizedLine>& dp, const std::vector<NormalizedLine>& ap) {
    if (dp.empty() && ap.empty()) throw InvalidHunk("hunk has neither deleted nor added statements");
    if (ap.empty()) return PatchType::DEL;
    if (dp.empty()) return PatchType::ADD;
    return PatchType::CHA;
}

inline PatchType classify_patch_type(const PatchHunk& hunk) { return classify_patch_type(hunk.dp, hunk.ap); }

// ---------------------------------------------------------------------------
// Unified diff text

struct DiffLine {
    char tag = ' '; // ' ', '-', '+'
    std::string text;
};

struct RawHunk {
    int old_start = 0;
    int old_count = 0;
    int new_start = 0;
    int new_count = 0;
    std::vector<DiffLine> lines;
    std::size_t header_line = 0;

    // First line number each side's segment covers (git writes the line
    // before the insertion point when a side is empty).
    int old_first() const { return old_count == 0 ? old_start + 1 : old_start; }
    int new_first() const { return new_count == 0 ? new_start + 1 : new_start; }
};

struct FileDiff {
    std::string old_path; // empty for /dev/null
    std::string new_path; // empty for /dev/null
    std::string old_blob;
    std::string new_blob;
    bool binary = false;
    std::vector<RawHunk> hunks;

    const std::string& path() const { return new_path.empty() ? old_path : new_path; }
};

namespace detail {

inline bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

inline std::string strip_diff_path(std::string_view p) {
    auto tab = p.find('\t');
    if (tab != std::string_view::npos) p = p.substr(0, tab);
    while (!p.empty() && (p.back() == ' ' || p.back() == '\r')) p.remove_suffix(1);
    if (p == "/dev/null") return {};
    if (starts_with(p, "a/") || starts_with(p, "b/")) p.remove_prefix(2);
    return std::string(p);
}

inline bool parse_range(std::string_view s, int& start, int& count) {
    auto comma = s.find(',');
    auto num = [](std::string_view t, int& out) {
        if (t.empty()) return false;
        int v = 0;
        for (char c : t) {
            if (c < '0' || c > '9') return false;
            v = v * 10 + (c - '0');
        }
        out = v;
        return true;
    };
    if (comma == std::string_view::npos) {
        count = 1;
        return num(s, start);
    }
    return num(s.substr(0, comma), start) && num(s.substr(comma + 1), count);
}

inline bool is_zero_id(std::string_view id) {
    return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) { return c == '0'; });
}

} // namespace detail

// Parses `git diff`/`diff -u` output. Text outside file sections (commit
// headers, mode lines) is ignored.
inline std::vector<FileDiff> parse_unified_diff(std::string_view text) {
    using detail::starts_with;
    auto lines = split_lines(text, true);
    std::vector<FileDiff> files;
    bool git_header_open = false; // saw "diff --git" but not yet "---"

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        const std::size_t line_no = i + 1;

        if (starts_with(line, "diff --git ")) {
            files.emplace_back();
            git_header_open = true;
            std::string_view rest = std::string_view(line).substr(11);
            auto b = rest.find(" b/");
            if (b != std::string_view::npos) {
                files.back().old_path = detail::strip_diff_path(rest.substr(0, b));
                files.back().new_path = detail::strip_diff_path(rest.substr(b + 1));
            }
            continue;
        }
        if (starts_with(line, "index ") && !files.empty()) {
            std::string_view ids = std::string_view(line).substr(6);
            ids = ids.substr(0, ids.find(' '));
            auto dots = ids.find("..");
            if (dots != std::string_view::npos) {
                files.back().old_blob = std::string(ids.substr(0, dots));
                files.back().new_blob = std::string(ids.substr(dots + 2));
                if (detail::is_zero_id(files.back().old_blob)) files.back().old_blob.clear();
                if (detail::is_zero_id(files.back().new_blob)) files.back().new_blob.clear();
            }
            continue;
        }
        if (starts_with(line, "Binary files ") || starts_with(line, "GIT binary patch")) {
            if (files.empty()) throw ParseError("binary marker outside a file section", line_no);
            files.back().binary = true;
            git_header_open = false;
            continue;
        }
        if (starts_with(line, "--- ") && i + 1 < lines.size() && starts_with(lines[i + 1], "+++ ")) {
            if (!git_header_open) files.emplace_back();
            git_header_open = false;
            files.back().old_path = detail::strip_diff_path(std::string_view(line).substr(4));
            files.back().new_path = detail::strip_diff_path(std::string_view(lines[i + 1]).substr(4));
            ++i;
            continue;
        }
        if (starts_with(line, "@@")) {
            if (files.empty()) throw ParseError("hunk header before any file header", line_no);
            auto close = line.find(" @@", 2);
            if (!starts_with(line, "@@ -") || close == std::string::npos)
                throw ParseError("malformed hunk header '" + line + "'", line_no);
            std::string_view ranges = std::string_view(line).substr(4, close - 4);
            auto plus = ranges.find(" +");
            RawHunk h;
            h.header_line = line_no;
            if (plus == std::string_view::npos || !detail::parse_range(ranges.substr(0, plus), h.old_start, h.old_count) ||
                !detail::parse_range(ranges.substr(plus + 2), h.new_start, h.new_count))
                throw ParseError("malformed hunk ranges '" + line + "'", line_no);

            int old_left = h.old_count, new_left = h.new_count;
            while (old_left > 0 || new_left > 0) {
                ++i;
                if (i >= lines.size())
                    throw ParseError("hunk truncated: expected " + std::to_string(old_left) + " old and " +
                                         std::to_string(new_left) + " new lines",
                                     lines.size());
                const std::string& body = lines[i];
                char tag = body.empty() ? ' ' : body[0];
                std::string content = body.empty() ? std::string{} : body.substr(1);
                if (tag == '\\') continue; // "\ No newline at end of file"
                if (tag == ' ') {
                    --old_left;
                    --new_left;
                } else if (tag == '-') {
                    --old_left;
                } else if (tag == '+') {
                    --new_left;
                } else {
                    throw ParseError("unexpected line inside hunk: '" + body + "'", i + 1);
                }
                if (old_left < 0 || new_left < 0) throw ParseError("hunk longer than its header declares", i + 1);
                h.lines.push_back({tag, std::move(content)});
            }
            while (i + 1 < lines.size() && starts_with(lines[i + 1], "\\")) ++i;
            files.back().hunks.push_back(std::move(h));
            git_header_open = false;
            continue;
        }
    }
    return files;
}

// ---------------------------------------------------------------------------
// Hunk assembly

enum class DiffSide { Old, New };

// Supplies the complete pre- or post-patch text of a file when it is
// available; returning nullopt makes assembly fall back to the lines the diff
// itself carries.
using FileTextProvider = std::function<std::optional<std::vector<std::string>>(DiffSide, const FileDiff&)>;

struct PatchOptions {
    int c_lines = 5;
};

namespace detail {

struct ChangeBlock {
    std::size_t raw_index = 0;
    LineRange old_range;
    LineRange new_range;
    std::vector<int> del_lines;
    std::vector<int> add_lines;
};

inline std::vector<ChangeBlock> change_blocks(const FileDiff& fd) {
    std::vector<ChangeBlock> blocks;
    for (std::size_t h = 0; h < fd.hunks.size(); ++h) {
        const auto& raw = fd.hunks[h];
        int old_ln = raw.old_first();
        int new_ln = raw.new_first();
        bool open = false;
        for (const auto& dl : raw.lines) {
            if (dl.tag == ' ') {
                if (open) {
                    blocks.back().old_range.end = old_ln;
                    blocks.back().new_range.end = new_ln;
                }
                open = false;
                ++old_ln;
                ++new_ln;
                continue;
            }
            if (!open) {
                blocks.push_back({h, {old_ln, old_ln}, {new_ln, new_ln}, {}, {}});
                open = true;
            }
            if (dl.tag == '-') blocks.back().del_lines.push_back(old_ln++);
            else blocks.back().add_lines.push_back(new_ln++);
        }
        if (open) {
            blocks.back().old_range.end = old_ln;
            blocks.back().new_range.end = new_ln;
        }
    }
    return blocks;
}

// Statements of one side: either the whole file, or one list per raw hunk
// built from the hunk's own lines.
struct SideStatements {
    std::optional<std::vector<NormalizedLine>> full;
    std::vector<std::vector<NormalizedLine>> per_hunk;

    const std::vector<NormalizedLine>& for_hunk(std::size_t raw_index) const {
        return full ? *full : per_hunk.at(raw_index);
    }
};

inline SideStatements side_statements(const FileDiff& fd, DiffSide side, const FileTextProvider& provider,
                                      Diagnostics* diags) {
    const std::string& path = fd.path();
    const auto fc = classify_file(path);
    SideStatements out;
    if (provider) {
        if (auto text = provider(side, fd)) {
            out.full = extract_statements(*text, path, fc, 1, diags);
            return out;
        }
    }
    for (const auto& raw : fd.hunks) {
        std::vector<std::string> seg;
        for (const auto& dl : raw.lines)
            if (dl.tag == ' ' || dl.tag == (side == DiffSide::Old ? '-' : '+')) seg.push_back(dl.text);
        int first = side == DiffSide::Old ? raw.old_first() : raw.new_first();
        out.per_hunk.push_back(extract_statements(seg, path, fc, first, nullptr));
    }
    return out;
}

inline std::vector<NormalizedLine> pick_lines(const std::vector<NormalizedLine>& stmts, const std::vector<int>& lines) {
    std::set<int> wanted(lines.begin(), lines.end());
    std::vector<NormalizedLine> out;
    for (const auto& s : stmts)
        if (wanted.count(s.line_no)) out.push_back(s);
    return out;
}

inline int count_between(const std::vector<NormalizedLine>& stmts, int begin, int end) {
    return static_cast<int>(std::count_if(stmts.begin(), stmts.end(),
                                          [&](const NormalizedLine& s) { return s.line_no >= begin && s.line_no < end; }));
}

inline PatchContext make_context(Side side, std::vector<NormalizedLine> stmts) {
    PatchContext ctx{side, {}};
    for (auto& s : stmts) {
        auto kw = extract_keyword(s);
        ctx.entries.push_back({std::move(kw), std::move(s)});
    }
    return ctx;
}

} // namespace detail

// Fills up_ctx/down_ctx with the c_lines meaningful statements immediately
// above and below the hunk. DEL/CHA hunks read the pre-patch file, ADD hunks
// the post-patch file. `side_stmts` are that side's statements.
inline PatchHunk build_patch_context(PatchHunk hunk, const std::vector<NormalizedLine>& side_stmts, int c_lines,
                                     Diagnostics* diags = nullptr) {
    if (c_lines < 1) throw ArgumentError("c_lines must be >= 1");
    const LineRange range = hunk.ptype == PatchType::ADD ? hunk.new_range : hunk.old_range;
    std::vector<NormalizedLine> above, below;
    for (const auto& s : side_stmts) {
        if (s.line_no < range.begin) above.push_back(s);
        else if (s.line_no >= range.end && static_cast<int>(below.size()) < c_lines) below.push_back(s);
    }
    if (static_cast<int>(above.size()) > c_lines) above.erase(above.begin(), above.end() - c_lines);

    hunk.up_ctx = detail::make_context(Side::Up, std::move(above));
    hunk.down_ctx = detail::make_context(Side::Down, std::move(below));
    if (hunk.up_ctx.empty())
        diag(diags, "ContextUnavailable", hunk.path + ":" + std::to_string(range.begin) + ": no UP context");
    if (hunk.down_ctx.empty())
        diag(diags, "ContextUnavailable", hunk.path + ":" + std::to_string(range.begin) + ": no DOWN context");
    return hunk;
}

// Turns parsed file diffs into hunks. Change blocks of one file that are
// separated by fewer than 2*c_lines unchanged statements become one hunk.
inline std::vector<PatchHunk> assemble_hunks(const std::vector<FileDiff>& files, const FileTextProvider& provider,
                                             const PatchOptions& opts, Diagnostics* diags = nullptr) {
    if (opts.c_lines < 1) throw ArgumentError("c_lines must be >= 1");
    std::vector<PatchHunk> out;
    for (const auto& fd : files) {
        if (fd.binary) {
            diag(diags, "BinarySkipped", fd.path() + ": binary file change skipped");
            continue;
        }
        if (fd.hunks.empty()) continue;
        auto old_side = detail::side_statements(fd, DiffSide::Old, provider, diags);
        auto new_side = detail::side_statements(fd, DiffSide::New, provider, diags);
        const bool full = old_side.full && new_side.full;

        auto blocks = detail::change_blocks(fd);
        std::vector<std::vector<detail::ChangeBlock>> groups;
        for (auto& b : blocks) {
            if (!groups.empty()) {
                const auto& prev = groups.back().back();
                bool same_segment = full || prev.raw_index == b.raw_index;
                if (same_segment) {
                    int gap = detail::count_between(old_side.for_hunk(b.raw_index), prev.old_range.end,
                                                    b.old_range.begin);
                    if (gap < 2 * opts.c_lines) {
                        groups.back().push_back(std::move(b));
                        continue;
                    }
                }
            }
            groups.push_back({std::move(b)});
        }

        for (const auto& group : groups) {
            PatchHunk hunk;
            hunk.path = fd.path();
            hunk.file_class = classify_file(hunk.path);
            hunk.old_range = {group.front().old_range.begin, group.back().old_range.end};
            hunk.new_range = {group.front().new_range.begin, group.back().new_range.end};
            const auto raw_index = group.front().raw_index;
            for (const auto& b : group) {
                auto d = detail::pick_lines(old_side.for_hunk(b.raw_index), b.del_lines);
                auto a = detail::pick_lines(new_side.for_hunk(b.raw_index), b.add_lines);
                hunk.dp.insert(hunk.dp.end(), d.begin(), d.end());
                hunk.ap.insert(hunk.ap.end(), a.begin(), a.end());
            }
            if (hunk.dp.empty() && hunk.ap.empty()) {
                diag(diags, "EmptyHunk",
                     hunk.path + ":" + std::to_string(hunk.new_range.begin) +
                         ": hunk has no meaningful statements after normalization");
                continue;
            }
            hunk.ptype = classify_patch_type(hunk);
            const auto& ctx_side = hunk.ptype == PatchType::ADD ? new_side : old_side;
            out.push_back(build_patch_context(std::move(hunk), ctx_side.for_hunk(raw_index), opts.c_lines, diags));
        }
    }
    return out;
}

// Pre-/post-patch text straight from a commit and its first parent.
inline FileTextProvider commit_text_provider(const RepoHandle& repo, const std::string& sha,
                                             std::optional<std::string> parent) {
    return [repo, sha, parent](DiffSide side, const FileDiff& fd) -> std::optional<std::vector<std::string>> {
        const std::string& path = side == DiffSide::Old ? fd.old_path : fd.new_path;
        if (path.empty()) return std::vector<std::string>{};
        const std::optional<std::string> rev = side == DiffSide::Old ? parent : std::optional<std::string>(sha);
        if (!rev) return std::vector<std::string>{};
        try {
            return repo.read_file(*rev, path);
        } catch (const NotFound&) {
            return std::nullopt;
        }
    };
}

// Pre-/post-patch text from the blob ids on the diff's "index" lines.
inline FileTextProvider blob_text_provider(const RepoHandle& repo) {
    return [repo](DiffSide side, const FileDiff& fd) -> std::optional<std::vector<std::string>> {
        const std::string& path = side == DiffSide::Old ? fd.old_path : fd.new_path;
        if (path.empty()) return std::vector<std::string>{};
        const std::string& blob = side == DiffSide::Old ? fd.old_blob : fd.new_blob;
        if (blob.empty()) return std::nullopt;
        try {
            return repo.read_blob(blob);
        } catch (const NotFound&) {
            return std::nullopt;
        }
    };
}

inline Patch patch_from_diff_text(std::string_view diff_text, const FileTextProvider& provider,
                                  const PatchOptions& opts = {}, Diagnostics* diags = nullptr) {
    Patch patch;
    patch.hunks = assemble_hunks(parse_unified_diff(diff_text), provider, opts, diags);
    if (patch.hunks.empty()) throw InvalidHunk("patch contains no meaningful hunk");
    return patch;
}

// Unified diff text without a repository: contexts come from the diff's own
// context lines. With `source`, blob ids on the index lines are resolved there.
inline Patch parse_patch(std::string_view diff_text, const RepoHandle* source = nullptr, const PatchOptions& opts = {},
                         Diagnostics* diags = nullptr) {
    return patch_from_diff_text(diff_text, source ? blob_text_provider(*source) : FileTextProvider{}, opts, diags);
}

// The commit's change against its first parent.
inline Patch parse_patch(const RepoHandle& source, const std::string& sha, const PatchOptions& opts = {},
                         Diagnostics* diags = nullptr) {
    const auto full = source.resolve_commit(sha);
    const auto parents = source.parents(full);
    std::optional<std::string> parent;
    if (!parents.empty()) parent = parents.front();
    static const std::string empty_tree = "4b825dc642cb6eb9a060e54bf8d69288fbee4904";
    auto r = source.git({"diff", "--no-color", "--no-ext-diff", "--src-prefix=a/", "--dst-prefix=b/", "-U3",
                         parent.value_or(empty_tree), full});
    if (r.exit_code != 0) throw GitIoError("git diff failed for " + sha + ": " + r.err);

    Patch patch = patch_from_diff_text(r.out, commit_text_provider(source, full, parent), opts, diags);
    patch.source_sha = full;
    patch.committed_at = source.commit_time(full);
    return patch;
}

// ---------------------------------------------------------------------------
// Patch manifests: one "sha[:note]" per line, '#' starts a comment.

struct ManifestEntry {
    std::string sha;
    std::string note;
};

inline std::vector<ManifestEntry> parse_manifest(std::string_view text) {
    std::vector<ManifestEntry> out;
    auto lines = split_lines(text, true);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string line = lines[i];
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t");
        line = line.substr(first, last - first + 1);
        ManifestEntry e;
        auto colon = line.find(':');
        e.sha = line.substr(0, colon);
        if (colon != std::string::npos) e.note = line.substr(colon + 1);
        if (e.sha.empty() || e.sha.find_first_of(" \t") != std::string::npos)
            throw ParseError("bad manifest entry '" + lines[i] + "'", i + 1);
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace patchscan
