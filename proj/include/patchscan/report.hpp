#pragma once

// Scan results as JSON (canonical, schema v1) and CSV, plus CDF point sets.

#include "patchscan/delay.hpp"
#include "patchscan/error.hpp"
#include "patchscan/simcore.hpp"
#include "patchscan/timeutil.hpp"
#include "patchscan/verdict.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace patchscan {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.3.0";

struct ReportParams {
    double r = 0.95;
    double t = 0.40;
    double ks_threshold = 0.25;
    int c_lines = 5;
    int max_candidates = 10;

    friend bool operator==(const ReportParams&, const ReportParams&) = default;
};

struct PatchDescriptor {
    std::string id; // commit sha or diff file name
    std::optional<std::string> sha;
    std::optional<UtcTime> committed_at;
    std::string note;
    std::size_t hunks = 0;

    friend bool operator==(const PatchDescriptor&, const PatchDescriptor&) = default;
};

struct TargetDescriptor {
    std::string name;
    std::string path;
    std::string rev;

    friend bool operator==(const TargetDescriptor&, const TargetDescriptor&) = default;
};

struct Location {
    std::string path;
    int first_line = 0;
    int last_line = 0;

    friend bool operator==(const Location&, const Location&) = default;
};

struct HunkRow {
    std::string path;
    PatchType ptype = PatchType::CHA;
    Status status = Status::ContextNotFound;
    std::optional<double> conf;
    std::optional<double> s_del;
    std::optional<double> s_add;
    std::optional<double> up_ctx_sim;
    std::optional<double> down_ctx_sim;
    std::size_t candidates = 0;

    friend bool operator==(const HunkRow&, const HunkRow&) = default;
};

struct ResultRow {
    std::string patch;
    std::string target;
    Status status = Status::ContextNotFound;
    double conf = 0.0;
    std::optional<Location> location;
    std::optional<double> s_del;
    std::optional<double> s_add;
    std::vector<HunkRow> hunks;
    std::optional<DelayRecord> delay;
    std::vector<std::string> diagnostics;

    friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct SummaryRow {
    std::string target;
    int vulnerable = 0;
    int fixed = 0;
    int context_not_found = 0;

    friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct ScanReport {
    int schema_version = kReportSchemaVersion;
    std::string tool_version = kToolVersion;
    ReportParams params;
    std::vector<PatchDescriptor> patches;
    std::vector<TargetDescriptor> targets;
    std::vector<ResultRow> results;

    friend bool operator==(const ScanReport&, const ScanReport&) = default;
};

// Per-target tallies in target order.
inline std::vector<SummaryRow> summarize(const ScanReport& report) {
    std::vector<SummaryRow> out;
    for (const auto& t : report.targets) out.push_back({t.name, 0, 0, 0});
    for (const auto& row : report.results) {
        auto it = std::find_if(out.begin(), out.end(), [&](const SummaryRow& s) { return s.target == row.target; });
        if (it == out.end()) it = out.insert(out.end(), SummaryRow{row.target, 0, 0, 0});
        switch (row.status) {
        case Status::Vulnerable: ++it->vulnerable; break;
        case Status::Fixed: ++it->fixed; break;
        case Status::ContextNotFound: ++it->context_not_found; break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

using ordered_json = nlohmann::ordered_json;

namespace detail {

template <typename T>
ordered_json opt(const std::optional<T>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const ordered_json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

inline Status status_from(const std::string& s) {
    if (s == "Vulnerable") return Status::Vulnerable;
    if (s == "Fixed") return Status::Fixed;
    if (s == "ContextNotFound") return Status::ContextNotFound;
    throw ParseError("unknown status '" + s + "'", 0);
}

inline PatchType ptype_from(const std::string& s) {
    if (s == "DEL") return PatchType::DEL;
    if (s == "ADD") return PatchType::ADD;
    if (s == "CHA") return PatchType::CHA;
    throw ParseError("unknown patch type '" + s + "'", 0);
}

inline ordered_json time_json(const std::optional<UtcTime>& t) {
    return t ? ordered_json(format_iso8601(*t)) : ordered_json(nullptr);
}

inline std::optional<UtcTime> time_from(const ordered_json& j, const char* key) {
    auto s = get_opt<std::string>(j, key);
    if (!s) return std::nullopt;
    return parse_iso8601(*s);
}

inline ordered_json delay_json(const DelayRecord& d) {
    ordered_json j;
    j["patch_sha"] = d.patch_sha;
    j["target"] = d.target;
    j["true_fix"] = opt(d.true_fix);
    j["release_tag"] = d.release ? ordered_json(d.release->tag) : ordered_json(nullptr);
    j["release_date"] = d.release ? ordered_json(format_iso8601(d.release->date)) : ordered_json(nullptr);
    j["delay_days"] = opt(d.delay_days);
    return j;
}

inline DelayRecord delay_from(const ordered_json& j) {
    DelayRecord d;
    d.patch_sha = j.at("patch_sha").get<std::string>();
    d.target = j.at("target").get<std::string>();
    d.true_fix = get_opt<std::string>(j, "true_fix");
    if (auto tag = get_opt<std::string>(j, "release_tag"))
        d.release = Release{*tag, parse_iso8601(j.at("release_date").get<std::string>())};
    d.delay_days = get_opt<long long>(j, "delay_days");
    return d;
}

} // namespace detail

inline ordered_json to_json(const ScanReport& r) {
    using detail::opt;
    ordered_json j;
    j["schema_version"] = r.schema_version;
    j["tool_version"] = r.tool_version;
    j["params"] = {{"r", r.params.r},
                   {"t", r.params.t},
                   {"ks_threshold", r.params.ks_threshold},
                   {"c_lines", r.params.c_lines},
                   {"max_candidates", r.params.max_candidates}};
    j["patches"] = ordered_json::array();
    for (const auto& p : r.patches)
        j["patches"].push_back({{"id", p.id},
                                {"sha", opt(p.sha)},
                                {"committed_at", detail::time_json(p.committed_at)},
                                {"note", p.note},
                                {"hunks", p.hunks}});
    j["targets"] = ordered_json::array();
    for (const auto& t : r.targets) j["targets"].push_back({{"name", t.name}, {"path", t.path}, {"rev", t.rev}});
    j["results"] = ordered_json::array();
    for (const auto& row : r.results) {
        ordered_json o;
        o["patch"] = row.patch;
        o["target"] = row.target;
        o["status"] = std::string(to_string(row.status));
        o["conf"] = row.conf;
        o["location"] = row.location ? ordered_json{{"path", row.location->path},
                                                    {"first_line", row.location->first_line},
                                                    {"last_line", row.location->last_line}}
                                     : ordered_json(nullptr);
        o["s_del"] = opt(row.s_del);
        o["s_add"] = opt(row.s_add);
        o["hunks"] = ordered_json::array();
        for (const auto& h : row.hunks)
            o["hunks"].push_back({{"path", h.path},
                                  {"ptype", std::string(to_string(h.ptype))},
                                  {"status", std::string(to_string(h.status))},
                                  {"conf", opt(h.conf)},
                                  {"s_del", opt(h.s_del)},
                                  {"s_add", opt(h.s_add)},
                                  {"up_ctx_sim", opt(h.up_ctx_sim)},
                                  {"down_ctx_sim", opt(h.down_ctx_sim)},
                                  {"candidates", h.candidates}});
        o["delay"] = row.delay ? detail::delay_json(*row.delay) : ordered_json(nullptr);
        o["diagnostics"] = row.diagnostics;
        j["results"].push_back(std::move(o));
    }
    j["summary"] = ordered_json::array();
    for (const auto& s : summarize(r))
        j["summary"].push_back({{"target", s.target},
                                {"vulnerable", s.vulnerable},
                                {"fixed", s.fixed},
                                {"context_not_found", s.context_not_found}});
    return j;
}

inline ScanReport report_from_json(const ordered_json& j) {
    using detail::get_opt;
    ScanReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion)
        throw ParseError("unsupported report schema " + std::to_string(r.schema_version), 0);
    r.tool_version = j.at("tool_version").get<std::string>();
    const auto& p = j.at("params");
    r.params = {p.at("r").get<double>(), p.at("t").get<double>(), p.at("ks_threshold").get<double>(),
                p.at("c_lines").get<int>(), p.at("max_candidates").get<int>()};
    for (const auto& pj : j.at("patches"))
        r.patches.push_back({pj.at("id").get<std::string>(), get_opt<std::string>(pj, "sha"),
                             detail::time_from(pj, "committed_at"), pj.at("note").get<std::string>(),
                             pj.at("hunks").get<std::size_t>()});
    for (const auto& tj : j.at("targets"))
        r.targets.push_back(
            {tj.at("name").get<std::string>(), tj.at("path").get<std::string>(), tj.at("rev").get<std::string>()});
    for (const auto& o : j.at("results")) {
        ResultRow row;
        row.patch = o.at("patch").get<std::string>();
        row.target = o.at("target").get<std::string>();
        row.status = detail::status_from(o.at("status").get<std::string>());
        row.conf = o.at("conf").get<double>();
        if (!o.at("location").is_null()) {
            const auto& l = o.at("location");
            row.location = Location{l.at("path").get<std::string>(), l.at("first_line").get<int>(),
                                    l.at("last_line").get<int>()};
        }
        row.s_del = get_opt<double>(o, "s_del");
        row.s_add = get_opt<double>(o, "s_add");
        for (const auto& h : o.at("hunks")) {
            HunkRow hr;
            hr.path = h.at("path").get<std::string>();
            hr.ptype = detail::ptype_from(h.at("ptype").get<std::string>());
            hr.status = detail::status_from(h.at("status").get<std::string>());
            hr.conf = get_opt<double>(h, "conf");
            hr.s_del = get_opt<double>(h, "s_del");
            hr.s_add = get_opt<double>(h, "s_add");
            hr.up_ctx_sim = get_opt<double>(h, "up_ctx_sim");
            hr.down_ctx_sim = get_opt<double>(h, "down_ctx_sim");
            hr.candidates = h.at("candidates").get<std::size_t>();
            row.hunks.push_back(std::move(hr));
        }
        if (!o.at("delay").is_null()) row.delay = detail::delay_from(o.at("delay"));
        row.diagnostics = o.at("diagnostics").get<std::vector<std::string>>();
        r.results.push_back(std::move(row));
    }
    return r;
}

inline std::string emit_json(const ScanReport& r) { return to_json(r).dump(2) + "\n"; }

inline ScanReport parse_report(std::string_view text) {
    try {
        return report_from_json(ordered_json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid report JSON: ") + e.what(), 0);
    }
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

template <typename T>
std::string csv_opt(const std::optional<T>& v) {
    if (!v) return {};
    if constexpr (std::is_floating_point_v<T>) return fmt_double(*v);
    else if constexpr (std::is_arithmetic_v<T>) return std::to_string(*v);
    else return csv_field(*v);
}

} // namespace detail

// Flat projection of the result rows.
inline std::string emit_csv(const ScanReport& r) {
    using detail::csv_field;
    std::ostringstream os;
    os << "patch,target,status,conf,path,first_line,last_line,s_del,s_add,true_fix,release_tag,release_date,"
          "delay_days\n";
    for (const auto& row : r.results) {
        os << csv_field(row.patch) << ',' << csv_field(row.target) << ',' << to_string(row.status) << ','
           << detail::fmt_double(row.conf) << ',';
        if (row.location)
            os << csv_field(row.location->path) << ',' << row.location->first_line << ',' << row.location->last_line;
        else
            os << ",,";
        os << ',' << detail::csv_opt(row.s_del) << ',' << detail::csv_opt(row.s_add) << ',';
        if (row.delay) {
            os << detail::csv_opt(row.delay->true_fix) << ',';
            if (row.delay->release)
                os << csv_field(row.delay->release->tag) << ',' << format_iso8601(row.delay->release->date);
            else
                os << ',';
            os << ',' << detail::csv_opt(row.delay->delay_days);
        } else {
            os << ",,,";
        }
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// CDF point sets

struct CdfSeries {
    std::string label;
    std::vector<double> values;    // ascending, distinct
    std::vector<double> fractions; // strictly increasing, last == 1.0
};

// Empirical CDF (v_(i), i/n) with duplicate values collapsed to their last
// (highest) fraction.
inline CdfSeries emit_cdf(std::vector<double> values, std::string label) {
    if (values.empty()) throw ArgumentError("emit_cdf: no values for '" + label + "'");
    std::sort(values.begin(), values.end());
    CdfSeries cdf{std::move(label), {}, {}};
    const auto n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        double frac = static_cast<double>(i + 1) / n;
        if (!cdf.values.empty() && cdf.values.back() == values[i]) cdf.fractions.back() = frac;
        else {
            cdf.values.push_back(values[i]);
            cdf.fractions.push_back(frac);
        }
    }
    return cdf;
}

// "label,value,cum_fraction" rows; for the r-sweep the label is r.
inline std::string emit_cdf_csv(const std::vector<CdfSeries>& series, const std::string& label_column = "label") {
    std::ostringstream os;
    os << label_column << ",value,cum_fraction\n";
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.values.size(); ++i)
            os << detail::csv_field(s.label) << ',' << detail::fmt_double(s.values[i]) << ','
               << detail::fmt_double(s.fractions[i]) << '\n';
    return os.str();
}

inline std::vector<CdfSeries> sweep_cdfs(const std::vector<SweepRow>& sweep) {
    std::vector<CdfSeries> out;
    for (const auto& row : sweep) {
        std::ostringstream label;
        label << row.r;
        out.push_back(emit_cdf(row.scores, label.str()));
    }
    return out;
}

// Delay days of every Fixed row that has one; nullopt when there are none.
inline std::optional<CdfSeries> delay_cdf(const ScanReport& r) {
    std::vector<double> days;
    for (const auto& row : r.results)
        if (row.status == Status::Fixed && row.delay && row.delay->delay_days)
            days.push_back(static_cast<double>(*row.delay->delay_days));
    if (days.empty()) return std::nullopt;
    return emit_cdf(std::move(days), "delay_days");
}

} // namespace patchscan
