#pragma once

#include "patchscan/error.hpp"
#include "patchscan/process.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace patchscan {

struct SimilarityParams {
    double r = 0.95;            // positional reward factor
    double t = 0.40;            // decision threshold
    double ks_threshold = 0.25; // key-statement / boundary threshold

    void validate() const {
        if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("r must lie in [0,1]");
        if (!(t > 0.0 && t < 1.0)) throw ConfigError("t must lie in (0,1)");
        if (!(ks_threshold > 0.0 && ks_threshold <= t)) throw ConfigError("ks_threshold must lie in (0,t]");
    }
};

struct AlignedPair {
    std::size_t i = 0; // source index
    std::size_t j = 0; // target index
    double line_sim = 0.0;
};

struct FragmentMatch {
    double score = 0.0;
    std::vector<AlignedPair> alignment;
};

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t up = row[j];
            std::size_t subst = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({up + 1, row[j - 1] + 1, subst});
            diag = up;
        }
    }
    return row[b.size()];
}

// Normalized Levenshtein similarity over bytes: 1 - lev(a,b) / max(|a|,|b|).
inline double strsim(std::string_view a, std::string_view b) {
    const auto longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

// Order-tolerant fragment similarity. Every source statement is matched to
// its most similar target statement (ties: smallest |i-j|, then smallest j);
// the match contributes strsim * r^|i-j| and the sum is averaged over |S|.
// Not symmetric: the average is taken over the source fragment.
template <typename Text = std::string>
FragmentMatch fragment_similarity(std::span<const Text> source, std::span<const Text> target,
                                  const SimilarityParams& params) {
    if (source.empty() || target.empty()) throw EmptyFragment();
    FragmentMatch m;
    m.alignment.reserve(source.size());
    double total = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
        std::size_t best_j = 0;
        double best = -1.0;
        for (std::size_t j = 0; j < target.size(); ++j) {
            double s = strsim(source[i], target[j]);
            auto dist = [&](std::size_t k) { return k > i ? k - i : i - k; };
            if (s > best || (s == best && dist(j) < dist(best_j))) {
                best = s;
                best_j = j;
            }
        }
        const auto offset = best_j > i ? best_j - i : i - best_j;
        total += best * std::pow(params.r, static_cast<double>(offset));
        m.alignment.push_back({i, best_j, best});
    }
    m.score = total / static_cast<double>(source.size());
    return m;
}

inline FragmentMatch fragment_similarity(const std::vector<std::string>& source, const std::vector<std::string>& target,
                                         const SimilarityParams& params) {
    return fragment_similarity<std::string>(std::span<const std::string>(source),
                                            std::span<const std::string>(target), params);
}

// Recomputes a score from an alignment under a (possibly different) r.
inline double rescore(const FragmentMatch& m, double r) {
    if (m.alignment.empty()) return 0.0;
    double total = 0.0;
    for (const auto& a : m.alignment) {
        const auto offset = a.j > a.i ? a.j - a.i : a.i - a.j;
        total += a.line_sim * std::pow(r, static_cast<double>(offset));
    }
    return total / static_cast<double>(m.alignment.size());
}

using FragmentPair = std::pair<std::vector<std::string>, std::vector<std::string>>;

// A fragment pair file holds the source lines, a line consisting of "---",
// then the target lines.
inline FragmentPair parse_fragment_pair(std::string_view text) {
    auto lines = split_lines(text, true);
    auto sep = std::find(lines.begin(), lines.end(), "---");
    if (sep == lines.end()) throw ParseError("fragment pair has no '---' separator", 0);
    FragmentPair pair{{lines.begin(), sep}, {sep + 1, lines.end()}};
    if (pair.first.empty() || pair.second.empty()) throw ParseError("fragment pair has an empty side", 0);
    return pair;
}

struct SweepRow {
    double r = 0.0;
    std::vector<double> scores; // ascending
};

// Scores every pair under each r; each row's scores are sorted ascending so
// they can be turned into a CDF directly.
inline std::vector<SweepRow> reward_sweep(const std::vector<FragmentPair>& pairs, const std::vector<double>& r_values,
                                          const SimilarityParams& base = {}) {
    if (pairs.empty()) throw ArgumentError("reward_sweep: no fragment pairs");
    std::vector<SweepRow> table;
    for (double r : r_values) {
        SimilarityParams p = base;
        p.r = r;
        SweepRow row{r, {}};
        for (const auto& [s, t] : pairs) row.scores.push_back(fragment_similarity(s, t, p).score);
        std::sort(row.scores.begin(), row.scores.end());
        table.push_back(std::move(row));
    }
    return table;
}

// Parses "lo:hi:step" into an inclusive grid, rounding away accumulated
// floating error so 0.15:0.95:0.10 yields exactly nine values.
inline std::vector<double> parse_r_grid(std::string_view spec) {
    auto c1 = spec.find(':');
    auto c2 = c1 == std::string_view::npos ? c1 : spec.find(':', c1 + 1);
    if (c2 == std::string_view::npos) throw ConfigError("r grid must look like lo:hi:step");
    double lo = std::strtod(std::string(spec.substr(0, c1)).c_str(), nullptr);
    double hi = std::strtod(std::string(spec.substr(c1 + 1, c2 - c1 - 1)).c_str(), nullptr);
    double step = std::strtod(std::string(spec.substr(c2 + 1)).c_str(), nullptr);
    if (!(step > 0) || lo > hi || lo < 0 || hi > 1) throw ConfigError("invalid r grid '" + std::string(spec) + "'");
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long k = 0; k <= n; ++k) out.push_back(std::round((lo + k * step) * 1e9) / 1e9);
    return out;
}

} // namespace patchscan
