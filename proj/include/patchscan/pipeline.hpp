#pragma once

// End-to-end scan: extract patch hunks, locate their contexts in each target,
// judge the candidate code, aggregate, and measure delays for fixed targets.

#include "patchscan/delay.hpp"
#include "patchscan/error.hpp"
#include "patchscan/gitio.hpp"
#include "patchscan/patchmodel.hpp"
#include "patchscan/report.hpp"
#include "patchscan/search.hpp"
#include "patchscan/simcore.hpp"
#include "patchscan/verdict.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

namespace patchscan {

inline constexpr int kExitClean = 0;
inline constexpr int kExitVulnerable = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRepoIo = 3;

struct PatchInput {
    enum Kind { Commit, DiffFile };
    Kind kind = Commit;
    std::string value; // sha or path to a unified diff
    std::string note;
};

struct TargetSpec {
    std::filesystem::path path;
    std::string rev = "HEAD";
};

// "path" or "path,rev"
inline TargetSpec parse_target_spec(const std::string& text) {
    auto comma = text.rfind(',');
    if (comma == std::string::npos) return {text, "HEAD"};
    return {text.substr(0, comma), text.substr(comma + 1)};
}

struct RunConfig {
    std::optional<std::filesystem::path> source;
    std::string source_rev = "HEAD";
    std::vector<PatchInput> patches;
    std::vector<TargetSpec> targets;
    SimilarityParams params;
    int c_lines = 5;
    int max_candidates = 10;
    int jobs = 0; // 0 = hardware concurrency
    ReleaseLookup release_lookup;

    void validate() const {
        params.validate();
        if (c_lines < 1) throw ConfigError("context lines must be >= 1");
        if (max_candidates < 0) throw ConfigError("max candidates must be >= 0");
        if (jobs < 0) throw ConfigError("jobs must be >= 0");
        if (patches.empty()) throw ConfigError("no patches given");
        for (const auto& p : patches) {
            if (p.kind == PatchInput::Commit && !source) throw ConfigError("patch " + p.value + " needs --source");
            if (p.kind == PatchInput::DiffFile && !std::filesystem::is_regular_file(p.value))
                throw ConfigError("patch file not found: " + p.value);
        }
        if (source && !std::filesystem::exists(*source)) throw ConfigError("source path not found: " + source->string());
        for (const auto& t : targets)
            if (!std::filesystem::exists(t.path)) throw ConfigError("target path not found: " + t.path.string());
    }
};

struct RunOutcome {
    int exit_code = kExitClean;
    ScanReport report;
    std::string error; // set for exit codes 2 and 3
};

namespace detail {

struct HunkTaskResult {
    LocatedHunk located;
    std::vector<CandidateJudgment> judgments;
    std::vector<std::string> diagnostics;
};

inline std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs) : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
}

inline std::vector<std::string> diag_lines(const Diagnostics& d) {
    std::vector<std::string> out;
    for (const auto& item : d.snapshot()) out.push_back(item.code + ": " + item.message);
    return out;
}

} // namespace detail

inline RunOutcome run_detect(const RunConfig& config) {
    RunOutcome outcome;
    auto& report = outcome.report;
    report.params = {config.params.r, config.params.t, config.params.ks_threshold, config.c_lines,
                     config.max_candidates};

    try {
        config.validate();
    } catch (const Error& e) {
        outcome.exit_code = kExitConfig;
        outcome.error = e.what();
        return outcome;
    }

    std::optional<RepoHandle> source;
    std::vector<RepoHandle> targets;
    try {
        if (config.source) source.emplace(*config.source, config.source_rev);
        for (const auto& t : config.targets) targets.emplace_back(t.path, t.rev);
    } catch (const Error& e) {
        outcome.exit_code = kExitRepoIo;
        outcome.error = e.what();
        return outcome;
    }

    // Target names: directory name, disambiguated on collision.
    std::deque<TargetView> views;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        std::string name = targets[i].name();
        int dup = 1;
        for (std::size_t k = 0; k < i; ++k)
            if (report.targets[k].name == name || report.targets[k].name.rfind(name + "#", 0) == 0) ++dup;
        if (dup > 1) name += "#" + std::to_string(dup);
        report.targets.push_back({name, targets[i].root().string(), config.targets[i].rev});
        views.emplace_back(targets[i], config.targets[i].rev);
    }

    const PatchOptions popts{config.c_lines};
    std::vector<Patch> patches;
    try {
        for (const auto& in : config.patches) {
            Patch p;
            PatchDescriptor d;
            d.note = in.note;
            if (in.kind == PatchInput::Commit) {
                p = parse_patch(*source, in.value, popts);
                d.id = *p.source_sha;
                d.sha = p.source_sha;
                d.committed_at = p.committed_at;
            } else {
                auto text = detail::read_text_file(in.value);
                p = parse_patch(text, source ? &*source : nullptr, popts);
                d.id = std::filesystem::path(in.value).filename().string();
            }
            d.hunks = p.hunks.size();
            report.patches.push_back(std::move(d));
            patches.push_back(std::move(p));
        }
    } catch (const GitIoError& e) {
        outcome.exit_code = kExitRepoIo;
        outcome.error = e.what();
        return outcome;
    } catch (const Error& e) {
        outcome.exit_code = kExitConfig;
        outcome.error = e.what();
        return outcome;
    }

    // Fan out over (patch hunk x target).
    struct Task {
        std::size_t patch, hunk, target;
    };
    std::vector<Task> tasks;
    for (std::size_t p = 0; p < patches.size(); ++p)
        for (std::size_t t = 0; t < views.size(); ++t)
            for (std::size_t h = 0; h < patches[p].hunks.size(); ++h) tasks.push_back({p, h, t});

    const SearchOptions sopts{config.c_lines, config.max_candidates};
    std::vector<detail::HunkTaskResult> results(tasks.size());
    detail::parallel_for(tasks.size(), config.jobs, [&](std::size_t i) {
        const auto& task = tasks[i];
        const auto& hunk = patches[task.patch].hunks[task.hunk];
        Diagnostics diags;
        auto& res = results[i];
        try {
            res.located = locate_hunk(views[task.target], hunk, config.params, sopts, &diags);
            for (const auto& c : res.located.candidates)
                res.judgments.push_back(judge_candidate(c, hunk, config.params));
        } catch (const std::exception& e) {
            diags.add(Severity::Error, "HunkFailed", e.what());
            res.located = {};
            res.judgments.clear();
        }
        res.diagnostics = detail::diag_lines(diags);
    });

    // Fan in per (patch, target), in patch-major order.
    std::size_t cursor = 0;
    for (std::size_t p = 0; p < patches.size(); ++p) {
        for (std::size_t t = 0; t < views.size(); ++t) {
            const auto& patch = patches[p];
            std::vector<std::vector<CandidateJudgment>> per_hunk;
            ResultRow row;
            row.patch = report.patches[p].id;
            row.target = report.targets[t].name;
            for (std::size_t h = 0; h < patch.hunks.size(); ++h, ++cursor) {
                auto& res = results[cursor];
                per_hunk.push_back(res.judgments);
                row.diagnostics.insert(row.diagnostics.end(), res.diagnostics.begin(), res.diagnostics.end());
            }
            Verdict v = aggregate(per_hunk);
            row.status = v.status;
            row.conf = v.conf;

            const std::size_t first = cursor - patch.hunks.size();
            for (std::size_t h = 0; h < patch.hunks.size(); ++h) {
                const auto& res = results[first + h];
                const auto& hv = v.per_hunk[h];
                HunkRow hr;
                hr.path = patch.hunks[h].path;
                hr.ptype = patch.hunks[h].ptype;
                hr.status = hv.status;
                if (hv.winner) {
                    hr.conf = hv.winner->conf;
                    hr.s_del = hv.winner->s_del;
                    hr.s_add = hv.winner->s_add;
                    if (hv.winner->candidate.paired_up) hr.up_ctx_sim = hv.winner->candidate.paired_up->ctx_sim;
                    if (hv.winner->candidate.paired_down)
                        hr.down_ctx_sim = hv.winner->candidate.paired_down->ctx_sim;
                } else {
                    if (!res.located.ups.empty()) hr.up_ctx_sim = res.located.ups.front().ctx_sim;
                    if (!res.located.downs.empty()) hr.down_ctx_sim = res.located.downs.front().ctx_sim;
                }
                hr.candidates = res.located.candidates.size();
                row.hunks.push_back(std::move(hr));
            }

            if (v.winning) {
                const auto& cand = v.winning->candidate;
                Location loc{cand.path, cand.first_line, cand.last_line};
                if (cand.stmts.empty()) {
                    if (cand.paired_up && cand.paired_down) {
                        loc.first_line = cand.paired_up->es_line;
                        loc.last_line = cand.paired_down->ss_line;
                    } else if (cand.paired_up) {
                        loc.first_line = loc.last_line = cand.paired_up->es_line;
                    } else if (cand.paired_down) {
                        loc.first_line = loc.last_line = cand.paired_down->ss_line;
                    }
                }
                row.location = loc;
                row.s_del = v.winning->s_del;
                row.s_add = v.winning->s_add;
            }

            if (v.status == Status::Fixed && v.winning) {
                Diagnostics diags;
                row.delay = compute_delay(targets[t], config.targets[t].rev, v.winning->candidate,
                                          patch.source_sha.value_or(report.patches[p].id), patch.committed_at,
                                          config.release_lookup, &diags);
                row.delay->target = row.target;
                auto extra = detail::diag_lines(diags);
                row.diagnostics.insert(row.diagnostics.end(), extra.begin(), extra.end());
            }
            if (row.status == Status::Vulnerable) outcome.exit_code = kExitVulnerable;
            report.results.push_back(std::move(row));
        }
    }
    return outcome;
}

struct OutputPaths {
    std::filesystem::path json = "report.json";
    std::optional<std::filesystem::path> csv;       // default: next to json
    std::optional<std::filesystem::path> delay_cdf; // default: next to json
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw GitIoError("cannot write " + p.string());
    out << text;
}

// Writes report.json, report.csv and (when any delay exists) delay_cdf.csv.
inline void write_report_files(const ScanReport& report, const OutputPaths& paths) {
    const auto dir = paths.json.has_parent_path() ? paths.json.parent_path() : std::filesystem::path(".");
    write_text(paths.json, emit_json(report));
    write_text(paths.csv.value_or(dir / "report.csv"), emit_csv(report));
    if (auto cdf = delay_cdf(report)) write_text(paths.delay_cdf.value_or(dir / "delay_cdf.csv"), emit_cdf_csv({*cdf}));
}

} // namespace patchscan
