#include "patchscan/report.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace patchscan;

namespace {

ScanReport sample_report() {
    ScanReport r;
    r.params = {0.95, 0.4, 0.25, 5, 10};
    r.patches.push_back({"a2714a5c69", std::string("a2714a5c69"), parse_iso8601("2019-08-10T09:30:00Z"),
                         "CVE-2018-17144", 2});
    r.patches.push_back({"local.diff", std::nullopt, std::nullopt, "", 1});
    r.targets.push_back({"qtum", "/repos/qtum", "HEAD"});
    r.targets.push_back({"dogecoin", "/repos/doge,coin", "v1.14"});

    ResultRow fixed;
    fixed.patch = "a2714a5c69";
    fixed.target = "qtum";
    fixed.status = Status::Fixed;
    fixed.conf = 0.6;
    fixed.location = Location{"src/qt/bitcoin.cpp", 204, 208};
    fixed.s_del = 0.31;
    fixed.s_add = 1.0;
    fixed.hunks.push_back({"src/qt/bitcoin.cpp", PatchType::CHA, Status::Fixed, 0.6, 0.31, 1.0, 0.9, 0.85, 2});
    fixed.hunks.push_back(
        {"src/qt/bitcoin.cpp", PatchType::ADD, Status::ContextNotFound, std::nullopt, std::nullopt, std::nullopt,
         std::nullopt, std::nullopt, 0});
    fixed.delay = DelayRecord{"a2714a5c69", "qtum", std::string("a2714a5c69"),
                              Release{"mainnet-ignition-v0.19.0", parse_iso8601("2020-02-22T11:00:00Z")}, 196};
    r.results.push_back(fixed);

    ResultRow vuln;
    vuln.patch = "local.diff";
    vuln.target = "dogecoin";
    vuln.status = Status::Vulnerable;
    vuln.conf = 0.1234567890123;
    vuln.location = Location{"src/val \"x\".cpp", 6, 6};
    vuln.s_del = 1.0;
    vuln.diagnostics = {"NoKeywords: DOWN context has no keyword"};
    r.results.push_back(vuln);

    ResultRow missing;
    missing.patch = "local.diff";
    missing.target = "qtum";
    r.results.push_back(missing);
    return r;
}

// Minimal RFC 4180 reader for checking the writer's quoting.
std::vector<std::vector<std::string>> read_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows(1);
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            rows.back().push_back(field);
            field.clear();
        } else if (c == '\n') {
            rows.back().push_back(field);
            field.clear();
            rows.emplace_back();
        } else {
            field += c;
        }
    }
    rows.pop_back();
    return rows;
}

} // namespace

TEST(ReportJson, RoundTrip) {
    auto r = sample_report();
    auto text = emit_json(r);
    EXPECT_EQ(parse_report(text), r);
    EXPECT_EQ(emit_json(parse_report(text)), text);
}

TEST(ReportJson, Shape) {
    auto j = to_json(sample_report());
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_EQ(j["results"][0]["status"], "Fixed");
    EXPECT_EQ(j["results"][0]["delay"]["release_date"], "2020-02-22T11:00:00Z");
    EXPECT_EQ(j["results"][0]["delay"]["delay_days"], 196);
    EXPECT_TRUE(j["results"][2]["location"].is_null());
    EXPECT_TRUE(j["results"][2]["delay"].is_null());
    EXPECT_EQ(j["patches"][0]["committed_at"], "2019-08-10T09:30:00Z");
    ASSERT_EQ(j["summary"].size(), 2u);
    EXPECT_EQ(j["summary"][0]["target"], "qtum");
    EXPECT_EQ(j["summary"][0]["fixed"], 1);
    EXPECT_EQ(j["summary"][0]["context_not_found"], 1);
    EXPECT_EQ(j["summary"][1]["vulnerable"], 1);
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    EXPECT_EQ(keys, (std::vector<std::string>{"schema_version", "tool_version", "params", "patches", "targets",
                                              "results", "summary"}));
}

TEST(ReportJson, RejectsBadInput) {
    EXPECT_THROW(parse_report("{"), ParseError);
    auto j = to_json(sample_report());
    j["schema_version"] = 7;
    EXPECT_THROW(parse_report(j.dump()), ParseError);
    auto k = to_json(sample_report());
    k["results"][0]["status"] = "Maybe";
    EXPECT_THROW(parse_report(k.dump()), ParseError);
}

TEST(ReportJsonProperty, RandomReportsRoundTrip) {
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        ScanReport r;
        r.params.r = std::abs(u(rng));
        r.targets.push_back({"t" + std::to_string(k), "/x", "HEAD"});
        for (int n = static_cast<int>(rng() % 5); n > 0; --n) {
            ResultRow row;
            row.patch = "p" + std::to_string(rng() % 100);
            row.target = r.targets[0].name;
            row.status = static_cast<Status>(rng() % 3);
            row.conf = u(rng);
            if (rng() % 2) row.s_del = u(rng);
            if (rng() % 2) row.location = Location{"a,\"b\"\n.cpp", 1, 2};
            if (rng() % 2)
                row.delay = DelayRecord{"p", "t", std::nullopt, std::nullopt,
                                        static_cast<long long>(rng() % 1000) - 500};
            r.results.push_back(row);
        }
        EXPECT_EQ(parse_report(emit_json(r)), r);
    }
}

TEST(ReportCsv, ColumnsAndQuoting) {
    auto rows = read_csv(emit_csv(sample_report()));
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"patch", "target", "status", "conf", "path", "first_line",
                                                 "last_line", "s_del", "s_add", "true_fix", "release_tag",
                                                 "release_date", "delay_days"}));
    for (const auto& row : rows) EXPECT_EQ(row.size(), 13u);
    EXPECT_EQ(rows[1][2], "Fixed");
    EXPECT_EQ(rows[1][4], "src/qt/bitcoin.cpp");
    EXPECT_EQ(rows[1][5], "204");
    EXPECT_EQ(rows[1][10], "mainnet-ignition-v0.19.0");
    EXPECT_EQ(rows[1][11], "2020-02-22T11:00:00Z");
    EXPECT_EQ(rows[1][12], "196");
    EXPECT_EQ(rows[2][4], "src/val \"x\".cpp");
    EXPECT_DOUBLE_EQ(std::stod(rows[2][3]), 0.1234567890123);
    EXPECT_EQ(rows[2][8], "");
    EXPECT_EQ(rows[3][2], "ContextNotFound");
    EXPECT_EQ(rows[3][4], "");
}

TEST(Cdf, DuplicatesCollapse) {
    auto cdf = emit_cdf({4, 2, 1, 2}, "x");
    EXPECT_EQ(cdf.values, (std::vector<double>{1, 2, 4}));
    EXPECT_EQ(cdf.fractions, (std::vector<double>{0.25, 0.75, 1.0}));
    EXPECT_THROW(emit_cdf({}, "empty"), ArgumentError);
}

TEST(CdfProperty, MonotoneAndEndsAtOne) {
    std::mt19937_64 rng(62);
    for (int k = 0; k < 300; ++k) {
        std::vector<double> v;
        for (int n = 1 + static_cast<int>(rng() % 40); n > 0; --n) v.push_back(static_cast<double>(rng() % 10));
        auto cdf = emit_cdf(v, "p");
        ASSERT_EQ(cdf.values.size(), cdf.fractions.size());
        EXPECT_DOUBLE_EQ(cdf.fractions.back(), 1.0);
        for (std::size_t i = 1; i < cdf.values.size(); ++i) {
            EXPECT_LT(cdf.values[i - 1], cdf.values[i]);
            EXPECT_LT(cdf.fractions[i - 1], cdf.fractions[i]);
        }
        // each fraction counts the values at or below its point
        for (std::size_t i = 0; i < cdf.values.size(); ++i) {
            auto le = std::count_if(v.begin(), v.end(), [&](double x) { return x <= cdf.values[i]; });
            EXPECT_DOUBLE_EQ(cdf.fractions[i], static_cast<double>(le) / static_cast<double>(v.size()));
        }
    }
}

TEST(Cdf, CsvAndSweepAndDelay) {
    auto csv = emit_cdf_csv({emit_cdf({1, 2}, "0.95")}, "r");
    EXPECT_EQ(csv, "r,value,cum_fraction\n0.95,1,0.5\n0.95,2,1\n");

    std::vector<SweepRow> sweep(2);
    sweep[0].r = 0.15;
    sweep[0].scores = {0.2, 0.4};
    sweep[1].r = 0.95;
    sweep[1].scores = {0.9};
    auto series = sweep_cdfs(sweep);
    ASSERT_EQ(series.size(), 2u);
    EXPECT_EQ(series[0].label, "0.15");
    EXPECT_EQ(series[1].label, "0.95");

    auto r = sample_report();
    auto d = delay_cdf(r);
    ASSERT_TRUE(d);
    EXPECT_EQ(d->values, (std::vector<double>{196}));
    r.results[0].status = Status::Vulnerable;
    EXPECT_FALSE(delay_cdf(r));
}
