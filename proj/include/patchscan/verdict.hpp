#pragma once

// Patch-applied decisions for candidate code, and their aggregation into one
// status per (patch, target).

#include "patchscan/patchmodel.hpp"
#include "patchscan/search.hpp"
#include "patchscan/simcore.hpp"

#include <optional>
#include <string>
#include <vector>

namespace patchscan {

enum class Status { Vulnerable, Fixed, ContextNotFound };

inline std::string_view to_string(Status s) {
    switch (s) {
    case Status::Vulnerable: return "Vulnerable";
    case Status::Fixed: return "Fixed";
    case Status::ContextNotFound: return "ContextNotFound";
    }
    return "ContextNotFound";
}

struct CandidateJudgment {
    std::optional<double> s_del;
    std::optional<double> s_add;
    std::optional<int> fv; // 1 = patch applied, 0 = not applied, empty = undecidable
    double conf = 0.0;
    CandidateCode candidate;

    bool decided() const { return fv.has_value(); }
};

struct HunkVerdict {
    Status status = Status::ContextNotFound;
    std::optional<CandidateJudgment> winner;
};

struct Verdict {
    Status status = Status::ContextNotFound;
    double conf = 0.0;
    std::optional<CandidateJudgment> winning;
    std::size_t winning_hunk = 0;
    std::vector<HunkVerdict> per_hunk;
};

// Applies the DEL/ADD/CHA rules to already-computed similarities. Absent
// similarities are those the patch type does not use.
inline CandidateJudgment decide(PatchType ptype, std::optional<double> s_del, std::optional<double> s_add, double t) {
    CandidateJudgment j;
    j.s_del = s_del;
    j.s_add = s_add;
    switch (ptype) {
    case PatchType::DEL: {
        double s = s_del.value_or(0.0);
        j.fv = s >= t ? 0 : 1;
        j.conf = s >= t ? s - t : t - s;
        break;
    }
    case PatchType::ADD: {
        double s = s_add.value_or(0.0);
        j.fv = s >= t ? 1 : 0;
        j.conf = s >= t ? s - t : t - s;
        break;
    }
    case PatchType::CHA: {
        double d = s_del.value_or(0.0), a = s_add.value_or(0.0);
        bool del_pass = d >= t, add_pass = a >= t;
        if (del_pass && add_pass) {
            if (d >= a) {
                j.fv = 0;
                j.conf = d - t;
            } else {
                j.fv = 1;
                j.conf = a - t;
            }
        } else if (del_pass) {
            j.fv = 0;
            j.conf = d - t;
        } else if (add_pass) {
            j.fv = 1;
            j.conf = a - t;
        } else {
            j.fv.reset();
            j.conf = std::max(d, a) - t;
        }
        break;
    }
    }
    return j;
}

// Similarities are taken from the candidate's side: SIMILARITY(C, dp) and
// SIMILARITY(C, ap). Empty candidate code scores 0 against both, so a DEL
// patch reads as applied, an ADD patch as not applied and CHA as undecidable.
inline CandidateJudgment judge_candidate(const CandidateCode& candidate, const PatchHunk& hunk,
                                         const SimilarityParams& params) {
    const auto c = candidate.norms();
    auto sim = [&](const std::vector<std::string>& patch_side) -> double {
        if (c.empty() || patch_side.empty()) return 0.0;
        return fragment_similarity(c, patch_side, params).score;
    };
    std::optional<double> s_del, s_add;
    if (hunk.ptype != PatchType::ADD) s_del = sim(hunk.dp_norms());
    if (hunk.ptype != PatchType::DEL) s_add = sim(hunk.ap_norms());
    auto j = decide(hunk.ptype, s_del, s_add, params.t);
    j.candidate = candidate;
    return j;
}

namespace detail {

// Strict weak order: higher conf first, then lower path, then lower line.
inline bool better_judgment(const CandidateJudgment& a, const CandidateJudgment& b) {
    if (a.conf != b.conf) return a.conf > b.conf;
    if (a.candidate.path != b.candidate.path) return a.candidate.path < b.candidate.path;
    auto line = [](const CandidateJudgment& j) {
        if (j.candidate.first_line) return j.candidate.first_line;
        if (j.candidate.paired_up) return j.candidate.paired_up->es_line;
        if (j.candidate.paired_down) return j.candidate.paired_down->ss_line;
        return 0;
    };
    return line(a) < line(b);
}

} // namespace detail

inline HunkVerdict judge_hunk(const std::vector<CandidateJudgment>& judgments) {
    HunkVerdict hv;
    for (const auto& j : judgments) {
        if (!j.decided()) continue;
        if (!hv.winner || detail::better_judgment(j, *hv.winner)) hv.winner = j;
    }
    if (hv.winner) hv.status = *hv.winner->fv == 0 ? Status::Vulnerable : Status::Fixed;
    return hv;
}

// Vulnerable if any hunk is vulnerable, else Fixed if any hunk is fixed, else
// ContextNotFound. The reported confidence is the winning hunk's.
inline Verdict aggregate(const std::vector<std::vector<CandidateJudgment>>& judgments_per_hunk) {
    Verdict v;
    for (const auto& js : judgments_per_hunk) v.per_hunk.push_back(judge_hunk(js));

    for (Status wanted : {Status::Vulnerable, Status::Fixed}) {
        for (std::size_t h = 0; h < v.per_hunk.size(); ++h) {
            const auto& hv = v.per_hunk[h];
            if (hv.status != wanted) continue;
            if (!v.winning || detail::better_judgment(*hv.winner, *v.winning)) {
                v.winning = hv.winner;
                v.winning_hunk = h;
            }
        }
        if (v.winning) {
            v.status = wanted;
            v.conf = v.winning->conf;
            return v;
        }
    }
    return v;
}

} // namespace patchscan
