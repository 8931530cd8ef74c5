#pragma once

// Patch delay for targets that already carry the fix: blame the fixed region,
// take the earliest commit as the true fix, find its first release and count
// whole days since the source patch was committed.

#include "patchscan/error.hpp"
#include "patchscan/gitio.hpp"
#include "patchscan/search.hpp"
#include "patchscan/timeutil.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace patchscan {

class AttributionFailed : public Error {
public:
    using Error::Error;
};

struct AttributedCommit {
    std::string sha;
    UtcTime date;
};

struct FixAttribution {
    std::vector<AttributedCommit> commits; // distinct, ordered by (date, sha)
    std::string true_fix;
    UtcTime true_fix_date;
};

struct DelayRecord {
    std::string patch_sha;
    std::string target;
    std::optional<std::string> true_fix;
    std::optional<Release> release;
    std::optional<long long> delay_days;

    friend bool operator==(const DelayRecord&, const DelayRecord&) = default;
};

// Looks up the releases containing a commit. The default consults local tags;
// a remote listing can be plugged in instead.
using ReleaseLookup = std::function<std::vector<Release>(const RepoHandle&, const std::string& sha)>;

inline FixAttribution find_fix_commit(const RepoHandle& repo, const std::string& rev, const std::string& path,
                                      int first_line, int last_line) {
    std::vector<BlameEntry> entries;
    try {
        entries = repo.blame(rev, path, first_line, last_line);
    } catch (const Error& e) {
        throw AttributionFailed(std::string("blame failed: ") + e.what());
    }
    if (entries.empty()) throw AttributionFailed("blame returned no lines for " + path);

    std::map<std::string, UtcTime> distinct;
    for (const auto& e : entries)
        if (!distinct.count(e.commit_sha)) distinct.emplace(e.commit_sha, repo.commit_time(e.commit_sha));

    FixAttribution fa;
    for (const auto& [sha, date] : distinct) fa.commits.push_back({sha, date});
    std::sort(fa.commits.begin(), fa.commits.end(), [](const AttributedCommit& a, const AttributedCommit& b) {
        return std::tie(a.date, a.sha) < std::tie(b.date, b.sha);
    });
    fa.true_fix = fa.commits.front().sha;
    fa.true_fix_date = fa.commits.front().date;
    return fa;
}

// Line span to blame for a fixed candidate. An applied deletion leaves no
// lines behind, so blame has nothing to attribute.
inline std::optional<std::pair<int, int>> fix_region(const CandidateCode& code) {
    if (code.stmts.empty()) return std::nullopt;
    return std::make_pair(code.first_line, code.last_line);
}

inline std::optional<Release> earliest_release(const RepoHandle& repo, const std::string& sha,
                                               const ReleaseLookup& lookup = {}) {
    auto releases = lookup ? lookup(repo, sha) : repo.releases_containing(sha);
    if (releases.empty()) return std::nullopt;
    return *std::min_element(releases.begin(), releases.end(), [](const Release& a, const Release& b) {
        return std::tie(a.date, a.tag) < std::tie(b.date, b.tag);
    });
}

// Whole days from the source commit to the release, rounded toward negative
// infinity.
inline long long patch_delay(UtcTime source_commit_date, UtcTime release_date) {
    const long long secs = (release_date - source_commit_date).count();
    constexpr long long day = 86400;
    long long q = secs / day;
    if (secs % day != 0 && secs < 0) --q;
    return q;
}

inline DelayRecord compute_delay(const RepoHandle& target, const std::string& rev, const CandidateCode& fixed_code,
                                 const std::string& patch_sha, std::optional<UtcTime> source_date,
                                 const ReleaseLookup& lookup = {}, Diagnostics* diags = nullptr) {
    DelayRecord rec;
    rec.patch_sha = patch_sha;
    rec.target = target.name();
    auto region = fix_region(fixed_code);
    if (!region) {
        diag(diags, "AttributionFailed", fixed_code.path + ": fixed candidate has no lines to blame");
        return rec;
    }
    try {
        auto fa = find_fix_commit(target, rev, fixed_code.path, region->first, region->second);
        rec.true_fix = fa.true_fix;
        rec.release = earliest_release(target, fa.true_fix, lookup);
    } catch (const Error& e) {
        diag(diags, "AttributionFailed", e.what());
        return rec;
    }
    if (rec.release && source_date) rec.delay_days = patch_delay(*source_date, rec.release->date);
    return rec;
}

} // namespace patchscan
