#pragma once

// Locating patch contexts in a target repository: keyword grep for key
// statements, boundary expansion around them, whole-context similarity, and
// extraction of the candidate code between matched contexts.

#include "patchscan/gitio.hpp"
#include "patchscan/patchmodel.hpp"
#include "patchscan/preprocess.hpp"
#include "patchscan/simcore.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace patchscan {

struct SearchOptions {
    int c_lines = 5;
    int max_candidates = 10; // 0 = unlimited
    int gap_factor = 3;      // pairing gap limit: max(gap_factor * |patch code|, min_gap)
    int min_gap = 20;
};

struct KeyStatementMatch {
    GrepHit hit;
    NormalizedLine stmt;
    double sim = 0.0;
    Side side = Side::Up;
    std::size_t ctx_index = 0; // patch-context entry whose keyword produced the hit
};

struct Boundary {
    std::string path;
    Side side = Side::Up;
    int ss_line = 0;
    int es_line = 0;

    friend bool operator==(const Boundary&, const Boundary&) = default;
};

struct CandidateContext {
    std::string path;
    Side side = Side::Up;
    int ss_line = 0;
    int es_line = 0;
    std::vector<NormalizedLine> stmts;
    double ctx_sim = 0.0;
};

struct CandidateCode {
    std::string path;
    std::vector<NormalizedLine> stmts;
    int first_line = 0; // 0 when stmts is empty
    int last_line = 0;
    std::optional<CandidateContext> paired_up;
    std::optional<CandidateContext> paired_down;

    std::vector<std::string> norms() const {
        std::vector<std::string> out;
        for (const auto& s : stmts) out.push_back(s.norm);
        return out;
    }
};

inline bool is_test_path(std::string_view path) {
    static const std::vector<std::string> blacklist = {"test", "tests", "testing", "testdata", "spec", "bench"};
    std::size_t start = 0;
    while (start <= path.size()) {
        auto slash = path.find('/', start);
        auto seg = path.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start);
        std::string lower(seg);
        std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
        if (std::find(blacklist.begin(), blacklist.end(), lower) != blacklist.end()) return true;
        if (slash == std::string_view::npos) break;
        start = slash + 1;
    }
    return false;
}

// A target repository pinned at one revision, with memoized grep results and
// per-file statement lists. Safe to share between threads.
class TargetView {
public:
    struct FileStatements {
        std::vector<NormalizedLine> stmts;
        std::unordered_map<int, std::size_t> by_line;

        const NormalizedLine* at_line(int line) const {
            auto it = by_line.find(line);
            return it == by_line.end() ? nullptr : &stmts[it->second];
        }
        std::optional<std::size_t> index_of(int line) const {
            auto it = by_line.find(line);
            if (it == by_line.end()) return std::nullopt;
            return it->second;
        }
    };

    TargetView(RepoHandle repo, std::string rev) : repo_(std::move(repo)), rev_(std::move(rev)) {}
    explicit TargetView(RepoHandle repo) : repo_(repo), rev_(repo.default_rev()) {}

    const RepoHandle& repo() const { return repo_; }
    const std::string& rev() const { return rev_; }

    std::shared_ptr<const std::vector<GrepHit>> grep(const std::string& keyword) const {
        {
            std::lock_guard lock(mu_);
            if (auto it = grep_cache_.find(keyword); it != grep_cache_.end()) return it->second;
        }
        auto hits = std::make_shared<const std::vector<GrepHit>>(repo_.grep(keyword, rev_));
        std::lock_guard lock(mu_);
        return grep_cache_.emplace(keyword, hits).first->second;
    }

    // Statements of `path` at the view's revision; nullptr if the file is absent.
    std::shared_ptr<const FileStatements> statements(const std::string& path) const {
        {
            std::lock_guard lock(mu_);
            if (auto it = file_cache_.find(path); it != file_cache_.end()) return it->second;
        }
        std::shared_ptr<const FileStatements> result;
        try {
            auto lines = repo_.read_file(rev_, path);
            auto fs = std::make_shared<FileStatements>();
            fs->stmts = extract_statements(lines, path, classify_file(path), 1, nullptr);
            for (std::size_t i = 0; i < fs->stmts.size(); ++i) fs->by_line.emplace(fs->stmts[i].line_no, i);
            result = std::move(fs);
        } catch (const NotFound&) {
        }
        std::lock_guard lock(mu_);
        return file_cache_.emplace(path, result).first->second;
    }

private:
    RepoHandle repo_;
    std::string rev_;
    mutable std::mutex mu_;
    mutable std::map<std::string, std::shared_ptr<const std::vector<GrepHit>>> grep_cache_;
    mutable std::map<std::string, std::shared_ptr<const FileStatements>> file_cache_;
};

// Greps every context keyword and keeps hits that are real statements (not
// comments), outside test code, in a file of the patch's class, of a
// compatible statement kind, and at least ks_threshold similar to the
// keyword's source statement. Sorted by descending similarity; a target line
// hit by several keywords appears once with its best score.
inline std::vector<KeyStatementMatch> find_key_statements(const TargetView& target, const PatchContext& ctx,
                                                          const FileClass& patch_class, const SimilarityParams& params,
                                                          Diagnostics* diags = nullptr) {
    if (!ctx.has_keyword()) {
        diag(diags, "NoKeywords", std::string(to_string(ctx.side)) + " context has no keyword");
        return {};
    }
    std::map<std::pair<std::string, int>, KeyStatementMatch> best;
    for (std::size_t k = 0; k < ctx.entries.size(); ++k) {
        const auto& entry = ctx.entries[k];
        if (!entry.keyword) continue;
        for (const auto& hit : *target.grep(entry.keyword->keyword)) {
            if (is_test_path(hit.path)) continue;
            if (!(classify_file(hit.path) == patch_class)) continue;
            auto file = target.statements(hit.path);
            if (!file) continue;
            const NormalizedLine* stmt = file->at_line(hit.line_no);
            if (!stmt) continue; // comment, blank or bracket-only line
            if (!kinds_compatible(stmt->kind, entry.stmt.kind)) continue;
            double sim = strsim(entry.stmt.norm, stmt->norm);
            if (sim < params.ks_threshold) continue;
            auto key = std::make_pair(hit.path, hit.line_no);
            auto it = best.find(key);
            if (it == best.end() || sim > it->second.sim)
                best[key] = KeyStatementMatch{hit, *stmt, sim, ctx.side, k};
        }
    }
    std::vector<KeyStatementMatch> out;
    for (auto& [_, m] : best) out.push_back(std::move(m));
    std::stable_sort(out.begin(), out.end(), [](const KeyStatementMatch& a, const KeyStatementMatch& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return std::tie(a.hit.path, a.hit.line_no) < std::tie(b.hit.path, b.hit.line_no);
    });
    return out;
}

// Grows a key statement into a context region. The start statement is the
// best match for the patch context's first statement among ks and the
// c_lines statements above it; the end statement likewise for the last
// statement among ks and the c_lines below. Ties go to the statement nearest
// ks.
inline std::optional<std::pair<int, int>> expand_boundary(const TargetView& target, const KeyStatementMatch& ks,
                                                          const PatchContext& patch_ctx, int c_lines,
                                                          const SimilarityParams& params) {
    if (patch_ctx.empty()) return std::nullopt;
    auto file = target.statements(ks.hit.path);
    if (!file) return std::nullopt;
    auto idx = file->index_of(ks.hit.line_no);
    if (!idx) return std::nullopt;

    const auto& stmts = file->stmts;
    const auto& first = patch_ctx.entries.front().stmt.norm;
    const auto& last = patch_ctx.entries.back().stmt.norm;
    const std::size_t lo = *idx >= static_cast<std::size_t>(c_lines) ? *idx - c_lines : 0;
    const std::size_t hi = std::min(stmts.size() - 1, *idx + static_cast<std::size_t>(c_lines));

    std::size_t ss = *idx;
    double ss_sim = -1.0;
    for (std::size_t i = *idx + 1; i-- > lo;) {
        double s = strsim(first, stmts[i].norm);
        if (s > ss_sim) {
            ss_sim = s;
            ss = i;
        }
    }
    std::size_t es = *idx;
    double es_sim = -1.0;
    for (std::size_t i = *idx; i <= hi; ++i) {
        double s = strsim(last, stmts[i].norm);
        if (s > es_sim) {
            es_sim = s;
            es = i;
        }
    }
    if (ss_sim < params.ks_threshold || es_sim < params.ks_threshold) return std::nullopt;
    return std::make_pair(stmts[ss].line_no, stmts[es].line_no);
}

// Scores each boundary region against the patch context and keeps those at
// or above t. Overlapping regions in one file collapse to the better one;
// the result is capped at max_candidates (0 = no cap), best first.
inline std::vector<CandidateContext> finalize_contexts(const TargetView& target, const std::vector<Boundary>& boundaries,
                                                       const PatchContext& patch_ctx, const SimilarityParams& params,
                                                       int max_candidates = 10) {
    if (patch_ctx.empty()) return {};
    const auto patch_norms = patch_ctx.norms();
    std::vector<CandidateContext> scored;
    for (const auto& b : boundaries) {
        auto file = target.statements(b.path);
        if (!file) continue;
        CandidateContext c{b.path, b.side, b.ss_line, b.es_line, {}, 0.0};
        for (const auto& s : file->stmts)
            if (s.line_no >= b.ss_line && s.line_no <= b.es_line) c.stmts.push_back(s);
        if (c.stmts.empty()) continue;
        std::vector<std::string> norms;
        for (const auto& s : c.stmts) norms.push_back(s.norm);
        c.ctx_sim = fragment_similarity(patch_norms, norms, params).score;
        if (c.ctx_sim >= params.t) scored.push_back(std::move(c));
    }
    std::stable_sort(scored.begin(), scored.end(), [](const CandidateContext& a, const CandidateContext& b) {
        if (a.ctx_sim != b.ctx_sim) return a.ctx_sim > b.ctx_sim;
        return std::tie(a.path, a.ss_line, a.es_line) < std::tie(b.path, b.ss_line, b.es_line);
    });
    std::vector<CandidateContext> kept;
    for (auto& c : scored) {
        bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const CandidateContext& k) {
            return k.path == c.path && k.side == c.side && c.ss_line <= k.es_line && k.ss_line <= c.es_line;
        });
        if (overlaps) continue;
        kept.push_back(std::move(c));
        if (max_candidates > 0 && static_cast<int>(kept.size()) >= max_candidates) break;
    }
    return kept;
}

namespace detail {

inline void set_span(CandidateCode& code) {
    if (code.stmts.empty()) {
        code.first_line = code.last_line = 0;
    } else {
        code.first_line = code.stmts.front().line_no;
        code.last_line = code.stmts.back().line_no;
    }
}

} // namespace detail

// Candidate code next to the located contexts: the statements strictly
// between an UP and a DOWN context, or patch_code_len statements below a lone
// UP / above a lone DOWN context.
inline CandidateCode fetch_candidate_code(const TargetView& target, const std::optional<CandidateContext>& up,
                                          const std::optional<CandidateContext>& down, std::size_t patch_code_len) {
    if (!up && !down) throw ArgumentError("fetch_candidate_code needs at least one context");
    if (up && down && up->path != down->path) throw ArgumentError("contexts are in different files");
    CandidateCode code;
    code.path = up ? up->path : down->path;
    code.paired_up = up;
    code.paired_down = down;
    auto file = target.statements(code.path);
    if (!file) return code;
    const auto& stmts = file->stmts;

    if (up && down) {
        for (const auto& s : stmts)
            if (s.line_no > up->es_line && s.line_no < down->ss_line) code.stmts.push_back(s);
    } else if (up) {
        for (const auto& s : stmts) {
            if (code.stmts.size() >= patch_code_len) break;
            if (s.line_no > up->es_line) code.stmts.push_back(s);
        }
    } else {
        std::vector<NormalizedLine> above;
        for (const auto& s : stmts)
            if (s.line_no < down->ss_line) above.push_back(s);
        auto n = std::min(above.size(), patch_code_len);
        code.stmts.assign(above.end() - static_cast<std::ptrdiff_t>(n), above.end());
    }
    detail::set_span(code);
    return code;
}

// Pairs UP with DOWN contexts in the same file (DOWN after UP, at most
// max(gap_factor * patch_code_len, min_gap) statements apart; nearest DOWN
// wins, each DOWN used once, best UP first). Every context left unpaired
// yields a single-context candidate.
inline std::vector<CandidateCode> pair_candidates(const TargetView& target, const std::vector<CandidateContext>& ups,
                                                  const std::vector<CandidateContext>& downs,
                                                  std::size_t patch_code_len, const SearchOptions& opts = {}) {
    const int max_gap = std::max(opts.gap_factor * static_cast<int>(patch_code_len), opts.min_gap);
    std::vector<bool> down_used(downs.size(), false);
    std::vector<CandidateCode> out;
    std::vector<const CandidateContext*> lone_ups;

    for (const auto& up : ups) {
        auto file = target.statements(up.path);
        std::optional<std::size_t> best;
        int best_gap = 0;
        for (std::size_t d = 0; d < downs.size(); ++d) {
            const auto& down = downs[d];
            if (down_used[d] || down.path != up.path || down.ss_line <= up.es_line) continue;
            int gap = file ? static_cast<int>(std::count_if(file->stmts.begin(), file->stmts.end(),
                                                            [&](const NormalizedLine& s) {
                                                                return s.line_no > up.es_line &&
                                                                       s.line_no < down.ss_line;
                                                            }))
                           : 0;
            if (gap > max_gap) continue;
            if (!best || gap < best_gap) {
                best = d;
                best_gap = gap;
            }
        }
        if (best) {
            down_used[*best] = true;
            out.push_back(fetch_candidate_code(target, up, downs[*best], patch_code_len));
        } else {
            lone_ups.push_back(&up);
        }
    }
    for (const auto* up : lone_ups) out.push_back(fetch_candidate_code(target, *up, std::nullopt, patch_code_len));
    for (std::size_t d = 0; d < downs.size(); ++d)
        if (!down_used[d]) out.push_back(fetch_candidate_code(target, std::nullopt, downs[d], patch_code_len));
    return out;
}

struct LocatedHunk {
    std::vector<CandidateContext> ups;
    std::vector<CandidateContext> downs;
    std::vector<CandidateCode> candidates;
};

// One patch context side: key statements -> boundaries -> finalized contexts.
inline std::vector<CandidateContext> locate_context(const TargetView& target, const PatchContext& ctx,
                                                    const FileClass& patch_class, const SimilarityParams& params,
                                                    const SearchOptions& opts, Diagnostics* diags = nullptr) {
    if (ctx.empty()) return {};
    std::vector<Boundary> boundaries;
    for (const auto& ks : find_key_statements(target, ctx, patch_class, params, diags)) {
        if (auto b = expand_boundary(target, ks, ctx, opts.c_lines, params)) {
            if (b->first > b->second) continue;
            Boundary bd{ks.hit.path, ctx.side, b->first, b->second};
            if (std::find(boundaries.begin(), boundaries.end(), bd) == boundaries.end()) boundaries.push_back(bd);
        }
    }
    return finalize_contexts(target, boundaries, ctx, params, opts.max_candidates);
}

inline LocatedHunk locate_hunk(const TargetView& target, const PatchHunk& hunk, const SimilarityParams& params,
                               const SearchOptions& opts, Diagnostics* diags = nullptr) {
    LocatedHunk out;
    out.ups = locate_context(target, hunk.up_ctx, hunk.file_class, params, opts, diags);
    out.downs = locate_context(target, hunk.down_ctx, hunk.file_class, params, opts, diags);
    if (!out.ups.empty() || !out.downs.empty())
        out.candidates = pair_candidates(target, out.ups, out.downs, hunk.code_len(), opts);
    return out;
}

} // namespace patchscan
