#include "patchscan/fixtures.hpp"
#include "patchscan/gitio.hpp"
#include "patchscan/preprocess.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace patchscan;
using testing_support::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

CorpusSpec corpus() { return parse_corpus_spec(slurp(std::filesystem::path(PATCHSCAN_FIXTURE_DIR) / "corpus.json")); }

CorpusSpec subset(const std::vector<std::string>& names) {
    auto spec = corpus();
    std::vector<FixtureCase> keep;
    for (const auto& c : spec.cases)
        if (std::find(names.begin(), names.end(), c.name) != names.end()) keep.push_back(c);
    spec.cases = keep;
    return spec;
}

const FixtureCase& find_case(const CorpusSpec& spec, const std::string& name) {
    for (const auto& c : spec.cases)
        if (c.name == name) return c;
    throw std::runtime_error("no case " + name);
}

struct Token {
    bool ident;
    std::string text;
};

std::vector<Token> tokenize(const std::string& line) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto is_id = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    while (i < line.size()) {
        std::size_t j = i;
        bool id = is_id(line[i]);
        while (j < line.size() && is_id(line[j]) == id) ++j;
        out.push_back({id, line.substr(i, j - i)});
        i = j;
    }
    return out;
}

std::string spec_with(const std::string& cases_json, const std::string& lines_json = R"([" a();", "-b();", "+c();"])") {
    return R"({"templates": {"t": {"path": "a.cpp", "lines": )" + lines_json + R"(}}, "cases": )" + cases_json + "}";
}

} // namespace

TEST(CorpusSpecFile, ThirtyCasesTenPerType) {
    auto spec = corpus();
    EXPECT_EQ(spec.templates.size(), 10u);
    ASSERT_EQ(spec.cases.size(), 30u);
    int per_type[4] = {0, 0, 0, 0};
    for (const auto& c : spec.cases) {
        ++per_type[c.clone_type];
        if (c.clone_type >= 2) {
            EXPECT_FALSE(c.rename.empty()) << c.name;
        }
        if (c.clone_type == 3) {
            EXPECT_FALSE(c.ops.empty()) << c.name;
        }
    }
    EXPECT_EQ(per_type[1], 10);
    EXPECT_EQ(per_type[2], 10);
    EXPECT_EQ(per_type[3], 10);
}

TEST(CorpusSpecFile, TemplatesHaveFullContexts) {
    auto spec = corpus();
    bool saw_go = false, saw_cpp = false;
    for (const auto& [id, t] : spec.templates) {
        auto items = detail::template_items(t);
        auto old_side = detail::render(items, false);
        auto stmts = extract_statements(old_side, t.path);
        std::size_t first_change = 0, last_change = 0, line = 0;
        for (const auto& it : items) {
            if (it.in_old) ++line;
            if (!(it.in_old && it.in_new)) {
                if (!first_change) first_change = line + (it.in_old ? 0 : 1);
                last_change = line;
            }
        }
        int above = 0, below = 0;
        for (const auto& s : stmts) {
            if (static_cast<std::size_t>(s.line_no) < first_change) ++above;
            if (static_cast<std::size_t>(s.line_no) > last_change) ++below;
        }
        EXPECT_GE(above, 5) << id;
        EXPECT_GE(below, 5) << id;
        saw_go |= classify_file(t.path).kind == FileClass::Go;
        saw_cpp |= classify_file(t.path).kind == FileClass::CSource;
    }
    EXPECT_TRUE(saw_go);
    EXPECT_TRUE(saw_cpp);
}

TEST(CorpusSpecParse, Errors) {
    EXPECT_THROW(parse_corpus_spec("{"), ConfigError);
    EXPECT_THROW(parse_corpus_spec(R"({"cases": []})"), ConfigError);
    EXPECT_THROW(parse_corpus_spec(spec_with(R"([{"name": "x", "template": "nope"}])")), ConfigError);
    EXPECT_THROW(parse_corpus_spec(spec_with(R"([{"name": "x", "template": "t", "clone": 4}])")), ConfigError);
    EXPECT_THROW(parse_corpus_spec(spec_with(R"([{"name": "a/b", "template": "t"}])")), ConfigError);
    EXPECT_THROW(parse_corpus_spec(spec_with("[]", R"(["a();"])")), ConfigError);
    EXPECT_THROW(parse_corpus_spec(R"({"dates": {"fork": "soon"}, "templates": {}, "cases": []})"), ConfigError);
    auto ok = parse_corpus_spec(spec_with(R"([{"name": "x", "template": "t"}])"));
    EXPECT_EQ(ok.cases.size(), 1u);
}

TEST(ApplyOps, EditsAndErrors) {
    FixtureTemplate t{"a.cpp", {" one();", " two();", "-old();", "+new();", " three();"}, "m"};
    auto items = detail::template_items(t);
    auto swapped = detail::render(detail::apply_ops(items, {"swap 1 2"}, "c"), false);
    EXPECT_EQ(swapped, (std::vector<std::string>{"two();", "one();", "old();", "three();"}));
    auto inserted = detail::render(detail::apply_ops(items, {"insert 0 top();", "insert 2 mid();"}, "c"), true);
    EXPECT_EQ(inserted, (std::vector<std::string>{"top();", "one();", "two();", "mid();", "new();", "three();"}));
    auto deleted = detail::render(detail::apply_ops(items, {"delete 4", "swap 1 2"}, "c"), false);
    EXPECT_EQ(deleted, (std::vector<std::string>{"two();", "one();", "old();"}));
    EXPECT_THROW(detail::apply_ops(items, {"swap 1 3"}, "c"), ConfigError);
    EXPECT_THROW(detail::apply_ops(items, {"delete 9"}, "c"), ConfigError);
    EXPECT_THROW(detail::apply_ops(items, {"delete 1", "swap 1 2"}, "c"), ConfigError);
    EXPECT_THROW(detail::apply_ops(items, {"rotate 1"}, "c"), ConfigError);
    EXPECT_THROW(detail::apply_ops(items, {"swap x"}, "c"), ConfigError);
}

TEST(RenameIdentifiers, WholeWordsOnly) {
    std::map<std::string, std::string> m{{"pos", "cursor"}, {"n", "count"}};
    EXPECT_EQ(detail::rename_identifiers("pos += n; npos = pos2; s.pos", m), "cursor += count; npos = pos2; s.cursor");
    EXPECT_EQ(detail::rename_identifiers("x", {}), "x");
}

TEST(Filler, DeterministicAndParseable) {
    auto a = generate_filler_file(7, 3, 20);
    EXPECT_EQ(a, generate_filler_file(7, 3, 20));
    EXPECT_NE(a, generate_filler_file(7, 4, 20));
    EXPECT_NE(a, generate_filler_file(8, 3, 20));
    auto stmts = extract_statements(a, "m.cpp");
    EXPECT_GE(stmts.size(), 20u * 7);
    EXPECT_EQ(a.size(), 7u + 20u * 12);
}

class GeneratedCorpus : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new TempDir;
        spec_ = new CorpusSpec(subset({"t1_merkle", "t2_gorpc", "t3_wallet", "t3_goblock"}));
        cases_ = new std::vector<GeneratedCase>(gen_fixtures(*spec_, dir_->path()));
    }
    static void TearDownTestSuite() {
        delete cases_;
        delete spec_;
        delete dir_;
    }

    static const GeneratedCase& gcase(const std::string& name) {
        for (const auto& c : *cases_)
            if (c.name == name) return c;
        throw std::runtime_error("missing " + name);
    }
    static std::vector<std::string> target_file(const GeneratedCase& c, std::size_t variant, const std::string& rev) {
        return RepoHandle(c.targets.at(variant).path).read_file(rev, c.target_path);
    }
    static std::vector<std::string> source_file(const GeneratedCase& c, const std::string& rev) {
        return RepoHandle(c.source).read_file(rev, c.path);
    }

    static TempDir* dir_;
    static CorpusSpec* spec_;
    static std::vector<GeneratedCase>* cases_;
};

TempDir* GeneratedCorpus::dir_ = nullptr;
CorpusSpec* GeneratedCorpus::spec_ = nullptr;
std::vector<GeneratedCase>* GeneratedCorpus::cases_ = nullptr;

TEST_F(GeneratedCorpus, TypeOneIsByteIdentical) {
    const auto& c = gcase("t1_merkle");
    EXPECT_EQ(target_file(c, 0, "HEAD"), source_file(c, c.patch_sha + "~1"));
    EXPECT_EQ(target_file(c, 1, "HEAD"), source_file(c, c.patch_sha));
    EXPECT_EQ(target_file(c, 1, "HEAD~1"), source_file(c, c.patch_sha + "~1"));
}

TEST_F(GeneratedCorpus, TypeTwoChangesOnlyIdentifiers) {
    const auto& c = gcase("t2_gorpc");
    const auto& rename = find_case(*spec_, "t2_gorpc").rename;
    for (auto [variant, rev] : {std::pair<std::size_t, std::string>{0, c.patch_sha + "~1"}, {1, c.patch_sha}}) {
        auto src = source_file(c, rev);
        auto dst = target_file(c, variant, "HEAD");
        ASSERT_EQ(src.size(), dst.size());
        int renamed = 0;
        for (std::size_t i = 0; i < src.size(); ++i) {
            auto a = tokenize(src[i]), b = tokenize(dst[i]);
            ASSERT_EQ(a.size(), b.size()) << src[i];
            for (std::size_t k = 0; k < a.size(); ++k) {
                EXPECT_EQ(a[k].ident, b[k].ident);
                if (a[k].text == b[k].text) continue;
                ASSERT_TRUE(a[k].ident) << src[i];
                ASSERT_TRUE(rename.count(a[k].text)) << a[k].text;
                EXPECT_EQ(rename.at(a[k].text), b[k].text);
                ++renamed;
            }
        }
        EXPECT_GT(renamed, 0);
    }
}

TEST_F(GeneratedCorpus, TypeThreeAppliesStatementEdits) {
    const auto& c = gcase("t3_wallet");
    const auto& fc = find_case(*spec_, "t3_wallet");
    auto src = source_file(c, c.patch_sha + "~1");
    auto dst = target_file(c, 0, "HEAD");
    int inserts = 0, deletes = 0, swaps = 0;
    for (const auto& op : fc.ops) {
        inserts += op.rfind("insert", 0) == 0;
        deletes += op.rfind("delete", 0) == 0;
        swaps += op.rfind("swap", 0) == 0;
    }
    EXPECT_EQ(static_cast<int>(dst.size()), static_cast<int>(src.size()) + inserts - deletes);
    // every target line is a renamed source line or an inserted one
    std::multiset<std::string> renamed_src;
    for (const auto& l : src) renamed_src.insert(detail::rename_identifiers(l, fc.rename));
    int foreign = 0;
    for (const auto& l : dst) {
        auto it = renamed_src.find(l);
        if (it == renamed_src.end()) ++foreign;
        else renamed_src.erase(it);
    }
    EXPECT_EQ(foreign, inserts);
    EXPECT_EQ(static_cast<int>(renamed_src.size()), deletes);
    EXPECT_GT(swaps, 0);
    std::vector<std::string> in_order;
    for (const auto& l : src) in_order.push_back(detail::rename_identifiers(l, fc.rename));
    EXPECT_NE(dst, in_order);
}

TEST_F(GeneratedCorpus, HistoryAndTags) {
    for (const auto& c : *cases_) {
        RepoHandle src(c.source);
        EXPECT_EQ(src.commit_time(c.patch_sha), spec_->source_fix);
        ASSERT_EQ(c.targets.size(), 2u);
        RepoHandle vuln(c.targets[0].path), fixed(c.targets[1].path);
        EXPECT_EQ(c.targets[0].expected, "Vulnerable");
        EXPECT_EQ(c.targets[1].expected, "Fixed");
        auto rel = fixed.releases_containing(c.targets[1].fix_commit);
        ASSERT_EQ(rel.size(), 1u);
        EXPECT_EQ(rel[0].tag, spec_->release_tag);
        EXPECT_EQ(rel[0].date, spec_->release);
        EXPECT_EQ(c.targets[1].expected_delay_days, 196);
        EXPECT_TRUE(vuln.file_exists("HEAD", "tests/" + base_name(c.target_path)));
        EXPECT_TRUE(vuln.file_exists("HEAD", replace_extension(c.target_path, ".h")));
    }
}

TEST_F(GeneratedCorpus, ManifestAndDeterminism) {
    auto manifest = nlohmann::json::parse(slurp(dir_->path() / "manifest.json"));
    ASSERT_EQ(manifest["cases"].size(), cases_->size());
    EXPECT_EQ(manifest["cases"][0]["targets"][1]["expected_delay_days"], 196);
    EXPECT_TRUE(manifest["cases"][0]["targets"][0]["fix_commit"].is_null());

    TempDir again;
    auto second = gen_fixtures(*spec_, again.path());
    ASSERT_EQ(second.size(), cases_->size());
    for (std::size_t i = 0; i < second.size(); ++i) {
        EXPECT_EQ(second[i].patch_sha, (*cases_)[i].patch_sha);
        EXPECT_EQ(second[i].targets[1].fix_commit, (*cases_)[i].targets[1].fix_commit);
    }
}
