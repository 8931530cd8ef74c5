#pragma once

// Read-only adapter over a local git repository. Every query shells out to
// the git executable with stable output flags; calls through one handle are
// serialized.

#include "patchscan/error.hpp"
#include "patchscan/process.hpp"
#include "patchscan/timeutil.hpp"

#include <algorithm>
#include <filesystem>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace patchscan {

struct GrepHit {
    std::string path;
    int line_no = 0;
    std::string raw_line;

    friend bool operator==(const GrepHit&, const GrepHit&) = default;
};

struct BlameEntry {
    std::string commit_sha;
    int line_no = 0;

    friend bool operator==(const BlameEntry&, const BlameEntry&) = default;
};

struct Release {
    std::string tag;
    UtcTime date;

    friend bool operator==(const Release&, const Release&) = default;
};

inline bool is_hex_sha(std::string_view s) {
    return s.size() == 40 && std::all_of(s.begin(), s.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

class RepoHandle {
public:
    explicit RepoHandle(std::filesystem::path root, std::string default_rev = "HEAD")
        : impl_(std::make_shared<Impl>()) {
        std::error_code ec;
        auto canon = std::filesystem::weakly_canonical(root, ec);
        impl_->root = ec ? root : canon;
        impl_->default_rev = std::move(default_rev);
        if (!std::filesystem::is_directory(impl_->root))
            throw GitIoError("not a directory: " + impl_->root.string());
        auto r = git({"rev-parse", "--git-dir"});
        if (r.exit_code != 0)
            throw GitIoError("not a git repository: " + impl_->root.string() + ": " + r.err);
    }

    const std::filesystem::path& root() const { return impl_->root; }
    const std::string& default_rev() const { return impl_->default_rev; }
    std::string name() const { return impl_->root.filename().string(); }

    // Raw access for callers that need a git command not wrapped below.
    ProcessResult git(const std::vector<std::string>& args) const {
        std::vector<std::string> argv{"git", "-C", impl_->root.string(), "-c", "safe.directory=*",
                                      "-c", "core.quotePath=false"};
        argv.insert(argv.end(), args.begin(), args.end());
        std::lock_guard lock(impl_->mu);
        return run_process(argv, {{"GIT_PAGER", "cat"}, {"LC_ALL", "C"}});
    }

    std::string resolve_commit(const std::string& rev) const {
        auto r = git({"rev-parse", "--verify", "--quiet", rev + "^{commit}"});
        if (r.exit_code != 0) throw NotFound("unknown revision '" + rev + "' in " + name());
        auto sha = r.out.substr(0, r.out.find('\n'));
        return sha;
    }

    std::vector<std::string> parents(const std::string& sha) const {
        auto r = git({"rev-list", "--parents", "-n", "1", resolve_commit(sha)});
        if (r.exit_code != 0) throw GitIoError("rev-list failed: " + r.err);
        std::vector<std::string> out;
        std::istringstream is(r.out);
        std::string tok;
        is >> tok; // the commit itself
        while (is >> tok) out.push_back(tok);
        return out;
    }

    // Every line at `rev` containing `keyword` as a fixed, case-sensitive
    // substring, ordered by (path, line_no).
    std::vector<GrepHit> grep(const std::string& keyword, const std::string& rev) const {
        if (keyword.empty()) throw ArgumentError("grep: empty keyword");
        auto r = git({"grep", "-n", "-F", "-I", "-z", "--full-name", "--no-color", "-e", keyword, rev, "--"});
        if (r.exit_code == 1 && r.err.empty()) return {};
        if (r.exit_code != 0) {
            if (r.err.find("bad revision") != std::string::npos ||
                r.err.find("unable to resolve") != std::string::npos)
                throw NotFound("unknown revision '" + rev + "': " + r.err);
            throw GitIoError("git grep failed in " + name() + ": " + r.err);
        }

        std::vector<GrepHit> hits;
        const std::string prefix = rev + ":";
        std::size_t pos = 0;
        const std::string& out = r.out;
        while (pos < out.size()) {
            auto z1 = out.find('\0', pos);
            auto z2 = z1 == std::string::npos ? z1 : out.find('\0', z1 + 1);
            auto nl = z2 == std::string::npos ? z2 : out.find('\n', z2 + 1);
            if (z1 == std::string::npos || z2 == std::string::npos) break;
            if (nl == std::string::npos) nl = out.size();
            GrepHit h;
            h.path = out.substr(pos, z1 - pos);
            if (h.path.compare(0, prefix.size(), prefix) == 0) h.path.erase(0, prefix.size());
            h.line_no = std::stoi(out.substr(z1 + 1, z2 - z1 - 1));
            h.raw_line = out.substr(z2 + 1, nl - z2 - 1);
            if (!h.raw_line.empty() && h.raw_line.back() == '\r') h.raw_line.pop_back();
            hits.push_back(std::move(h));
            pos = nl + 1;
        }
        std::sort(hits.begin(), hits.end(), [](const GrepHit& a, const GrepHit& b) {
            return std::tie(a.path, a.line_no) < std::tie(b.path, b.line_no);
        });
        return hits;
    }
    std::vector<GrepHit> grep(const std::string& keyword) const { return grep(keyword, default_rev()); }

    bool file_exists(const std::string& rev, const std::string& path) const {
        return git({"cat-file", "-e", rev + ":" + path}).exit_code == 0;
    }

    std::vector<std::string> read_file(const std::string& rev, const std::string& path) const {
        auto r = git({"show", "--no-textconv", rev + ":" + path});
        if (r.exit_code != 0) {
            if (!file_exists(rev, path))
                throw NotFound("'" + path + "' does not exist at " + rev + " in " + name());
            throw GitIoError("git show failed in " + name() + ": " + r.err);
        }
        return split_lines(r.out);
    }

    // Reads a blob by object id (as found on a diff "index" line).
    std::vector<std::string> read_blob(const std::string& object_id) const {
        auto r = git({"cat-file", "blob", object_id});
        if (r.exit_code != 0) throw NotFound("unknown blob " + object_id + " in " + name());
        return split_lines(r.out);
    }

    // Attributes every line in [start, end] to the last commit that changed it.
    std::vector<BlameEntry> blame(const std::string& rev, const std::string& path, int start, int end) const {
        auto length = static_cast<int>(read_file(rev, path).size());
        if (start < 1 || start > end || end > length)
            throw ArgumentError("blame range " + std::to_string(start) + "-" + std::to_string(end) +
                                " outside 1-" + std::to_string(length) + " of " + path);
        auto r = git({"blame", "--porcelain", "-l", "-L", std::to_string(start) + "," + std::to_string(end), rev,
                      "--", path});
        if (r.exit_code != 0) throw GitIoError("git blame failed in " + name() + ": " + r.err);

        std::vector<BlameEntry> entries;
        for (const auto& line : split_lines(r.out)) {
            if (line.size() < 42 || line[40] != ' ' || !is_hex_sha(std::string_view(line).substr(0, 40))) continue;
            std::istringstream is(line.substr(41));
            int orig = 0, final_line = 0;
            is >> orig >> final_line;
            entries.push_back({line.substr(0, 40), final_line});
        }
        std::sort(entries.begin(), entries.end(),
                  [](const BlameEntry& a, const BlameEntry& b) { return a.line_no < b.line_no; });
        return entries;
    }

    UtcTime commit_time(const std::string& sha) const {
        auto full = resolve_commit(sha);
        auto r = git({"show", "-s", "--format=%cI", full});
        if (r.exit_code != 0) throw GitIoError("git show failed in " + name() + ": " + r.err);
        return parse_iso8601(r.out.substr(0, r.out.find('\n')));
    }

    // Tags whose history contains `sha`, with the annotated-tag date (or the
    // tagged commit's committer date for lightweight tags), oldest first.
    std::vector<Release> releases_containing(const std::string& sha) const {
        auto full = resolve_commit(sha);
        auto r = git({"for-each-ref", "--contains", full, "--format=%(refname:short)%00%(creatordate:iso-strict)",
                      "refs/tags"});
        if (r.exit_code != 0) throw GitIoError("git for-each-ref failed in " + name() + ": " + r.err);
        std::vector<Release> out;
        for (const auto& line : split_lines(r.out)) {
            auto z = line.find('\0');
            if (z == std::string::npos) continue;
            out.push_back({line.substr(0, z), parse_iso8601(line.substr(z + 1))});
        }
        std::sort(out.begin(), out.end(),
                  [](const Release& a, const Release& b) { return std::tie(a.date, a.tag) < std::tie(b.date, b.tag); });
        return out;
    }

private:
    struct Impl {
        std::filesystem::path root;
        std::string default_rev;
        std::mutex mu;
    };
    std::shared_ptr<Impl> impl_;
};

// Free-function spellings of the handle queries.
inline std::vector<GrepHit> grep_repo(const RepoHandle& repo, const std::string& keyword, const std::string& rev) {
    return repo.grep(keyword, rev);
}
inline std::vector<std::string> read_file_at(const RepoHandle& repo, const std::string& rev, const std::string& path) {
    return repo.read_file(rev, path);
}
inline std::vector<BlameEntry> blame_lines(const RepoHandle& repo, const std::string& rev, const std::string& path,
                                           int start, int end) {
    return repo.blame(rev, path, start, end);
}
inline UtcTime commit_time(const RepoHandle& repo, const std::string& sha) { return repo.commit_time(sha); }
inline std::vector<Release> releases_containing(const RepoHandle& repo, const std::string& sha) {
    return repo.releases_containing(sha);
}

} // namespace patchscan
