#pragma once

#include "patchscan/fixtures.hpp"
#include "patchscan/timeutil.hpp"

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testing_support {

class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "patchscan-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline patchscan::UtcTime at(const char* iso) { return patchscan::parse_iso8601(iso); }

inline std::string random_string(std::mt19937_64& rng, std::size_t max_len, std::string_view alphabet = "abcdxyz _;()") {
    std::size_t len = rng() % (max_len + 1);
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
    return s;
}

inline std::vector<std::string> random_fragment(std::mt19937_64& rng, std::size_t max_lines, std::size_t max_len) {
    std::size_t n = 1 + rng() % max_lines;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(random_string(rng, max_len));
    return out;
}

} // namespace testing_support

namespace testing_support {

// Reconstruction of a fork's src/qt/bitcoin.cpp history whose blame over
// lines 201-211 attributes commits like this:
// base (201-203), ctor_members (209, 211), node_member (210),
// fix (204, 206-208) and rename (205, which the fix originally added).
struct BlameFixture {
    std::filesystem::path source;
    std::filesystem::path target;
    std::string path = "src/qt/bitcoin.cpp";
    std::string base, ctor_members, node_member, fix, rename;
    std::string release_tag = "mainnet-ignition-v0.19.0";
    patchscan::UtcTime fix_date = patchscan::parse_iso8601("2019-08-10T09:30:00Z");
    patchscan::UtcTime release_date = patchscan::parse_iso8601("2020-02-22T11:00:00Z");
};

inline std::vector<std::string> blame_fixture_prefix() {
    std::vector<std::string> l{"#include <qt/bitcoin.h>", "", "#include <qt/bitcoingui.h>",
                               "#include <qt/clientmodel.h>", "#include <qt/guiconstants.h>", ""};
    int fn = 0;
    while (l.size() < 188) {
        auto n = std::to_string(fn++);
        l.push_back("static void InitParameterInteraction" + n + "(interfaces::Node& node)");
        l.push_back("{");
        l.push_back("    int nWorkQueue" + n + " = node.getArg(\"-rpcworkqueue\", " + n + ");");
        l.push_back("    if (nWorkQueue" + n + " > MAX_QUEUE) {");
        l.push_back("        node.softSetArg(\"-rpcworkqueue" + n + "\", MAX_QUEUE);");
        l.push_back("    }");
        l.push_back("}");
        l.push_back("");
    }
    while (l.size() < 191) l.push_back("");
    for (const char* s : {"void BitcoinCore::shutdown()", "{", "    try {", "        qDebug() << __func__ << \": Running Shutdown in thread\";",
                          "        m_node.appShutdown();", "        qDebug() << __func__ << \": Shutdown finished\";",
                          "        Q_EMIT shutdownResult();", "    } catch (const std::exception& e) {",
                          "        handleRunawayException(&e);"})
        l.push_back(s);
    // lines 201-203
    l.push_back("    }");
    l.push_back("}");
    l.push_back("");
    return l;
}

inline std::vector<std::string> blame_fixture_suffix() {
    return {"    pollShutdownTimer(nullptr),",
            "    returnValue(0),",
            "    platformStyle(nullptr)",
            "{",
            "    setQuitOnLastWindowClosed(false);",
            "}",
            "",
            "void BitcoinApplication::setupPlatformStyle()",
            "{",
            "    std::string platformName;",
            "    platformName = gArgs.GetArg(\"-uiplatform\", BitcoinGUI::DEFAULT_UIPLATFORM);",
            "    platformStyle = PlatformStyle::instantiate(QString::fromStdString(platformName));",
            "    if (!platformStyle)",
            "        platformStyle = PlatformStyle::instantiate(\"other\");",
            "    assert(platformStyle);",
            "}"};
}

inline BlameFixture build_blame_fixture(const std::filesystem::path& dir) {
    using patchscan::GitWriter;
    BlameFixture f;
    f.source = dir / "bitcoin";
    f.target = dir / "qtum";
    const auto prefix = blame_fixture_prefix();
    const auto suffix = blame_fixture_suffix();
    auto file = [&](std::vector<std::string> middle) {
        auto all = prefix;
        all.insert(all.end(), middle.begin(), middle.end());
        all.insert(all.end(), suffix.begin(), suffix.end());
        return all;
    };
    const std::string old_sig = "BitcoinApplication::BitcoinApplication(interfaces::Node& node, int& argc, char** argv):";
    const std::string old_qapp = "    QApplication(argc, argv),";
    const std::string new_sig = "BitcoinApplication::BitcoinApplication(interfaces::Node& node):";
    const std::string new_qapp = "    QApplication(qt_argc, const_cast<char **>(&qt_argv)),";

    GitWriter up(f.source);
    up.write(f.path, file({old_sig, old_qapp}));
    f.base = up.commit("Split BitcoinApplication from BitcoinGUI", at("2017-03-01T12:00:00Z"));
    up.write(f.path, file({old_sig, old_qapp, "    coreThread(nullptr),", "    optionsModel(nullptr),"}));
    f.ctor_members = up.commit("Initialize members in the constructor", at("2018-04-02T12:00:00Z"));
    up.write(f.path, file({old_sig, old_qapp, "    coreThread(nullptr),", "    m_node(node),", "    optionsModel(nullptr),"}));
    f.node_member = up.commit("Keep a node reference in the application", at("2018-09-15T12:00:00Z"));
    up.write(f.path, file({"static int qt_argc = 1;", "static const char* qt_argv = \"bitcoin-qt\";", "", new_sig,
                           new_qapp, "    coreThread(nullptr),", "    m_node(node),", "    optionsModel(nullptr),"}));
    f.fix = up.commit("qt: Do not pass command line arguments to QApplication", f.fix_date);

    auto fork = GitWriter::clone_of(f.source, f.target);
    fork.tag("mainnet-ignition-v0.18.3", at("2019-07-01T00:00:00Z"), true, f.node_member);
    fork.write("doc/release-notes.md", {"Qtum 0.19 release notes"});
    fork.commit("Prepare 0.19 release", at("2020-02-20T08:00:00Z"));
    fork.tag(f.release_tag, f.release_date);
    fork.write(f.path, file({"static int qt_argc = 1;", "static const char* qt_argv = \"qtum-qt\";", "", new_sig,
                             new_qapp, "    coreThread(nullptr),", "    m_node(node),", "    optionsModel(nullptr),"}));
    f.rename = fork.commit("Rename the Qt application to qtum-qt", at("2020-06-26T12:00:00Z"));
    fork.tag("mainnet-ignition-v0.20.0", at("2020-08-01T00:00:00Z"), false);
    return f;
}

} // namespace testing_support

namespace testing_support {

// Merkle-root check hunk of an upstream validation.cpp and its clone in a
// fork. The fork file holds one statement per line so its line numbers are
// statement numbers: UP key statement at 5 with boundary (3,5), candidate
// code at 6, DOWN key statement at 9 with boundary (7,11).
struct SearchFixture {
    std::filesystem::path source;
    std::filesystem::path target;
    std::string patch_sha;
    std::string path = "src/validation.cpp";
};

inline std::vector<std::string> search_fixture_source(bool patched) {
    return {"bool CheckBlock(const CBlock& block, CValidationState& state, bool fCheckPOW, bool fCheckMerkleRoot)",
            "{",
            "    // These are checks that are independent of context.",
            "    if (block.fChecked)",
            "        return true;",
            "",
            "    // Check that the header is valid (particularly PoW).",
            "    if (!CheckBlockHeader(block, state, fCheckPOW))",
            "        return false;",
            "",
            "    // Check the merkle root.",
            "    if (fCheckMerkleRoot) {",
            "        bool mutated;",
            "        uint256 hashMerkleRoot2 = BlockMerkleRoot(block, &mutated);",
            patched ? "        if (mutated || block.hashMerkleRoot != hashMerkleRoot2)"
                    : "        if (block.hashMerkleRoot != hashMerkleRoot2)",
            "            return state.DoS(100, false, REJECT_INVALID, \"bad-txnmrklroot\", true, \"hashMerkleRoot mismatch\");",
            "",
            "        // Check for merkle tree malleability (CVE-2012-2459)",
            "        if (mutated)",
            "            return state.DoS(100, false, REJECT_INVALID, \"bad-txns-duplicate\", true, \"duplicate transaction\");",
            "    }",
            "",
            "    // Size limits",
            "    if (block.vtx.empty() || block.vtx.size() > MAX_BLOCK_BASE_SIZE)",
            "        return state.DoS(100, false, REJECT_INVALID, \"bad-blk-length\", false, \"size limits failed\");",
            "",
            "    // First transaction must be coinbase, the rest must not be",
            "    if (block.vtx.empty() || !block.vtx[0]->IsCoinBase())",
            "        return state.DoS(100, false, REJECT_INVALID, \"bad-cb-missing\", false, \"first tx is not coinbase\");",
            "",
            "    return true;",
            "}"};
}

inline std::vector<std::string> search_fixture_fork(bool patched) {
    return {"bool CheckBlock(const CBlock& block, CValidationState& state, bool fCheckPOW, bool fCheckMerkleRoot) {",
            "    if (block.fChecked) return true;",
            "    if (!CheckBlockHeader(block, state, fCheckPOW, block.IsAuxpow())) return false;",
            "    bool mutated;",
            "    uint256 hashMerkleRoot2 = BlockMerkleRoot(block, &mutated);",
            patched ? "    if (mutated || block.hashMerkleRoot != hashMerkleRoot2)"
                    : "    if (block.hashMerkleRoot != hashMerkleRoot2)",
            "        return state.DoS(100, false, REJECT_INVALID, \"bad-txnmrklroot\", true, \"merkle root mismatch\");",
            "    if (mutated)",
            "        return state.DoS(100, false, REJECT_INVALID, \"bad-txns-duplicate\", true, \"duplicate transaction\");",
            "    if (block.vtx.empty() || block.vtx.size() > MAX_BLOCK_SIZE || ::GetSerializeSize(block, SER_NETWORK, PROTOCOL_VERSION) > MAX_BLOCK_SIZE)",
            "        return state.DoS(100, false, REJECT_INVALID, \"bad-blk-length\", false, \"size limits exceeded\");",
            "    if (block.vtx.empty() || !block.vtx[0].IsCoinBase())",
            "        return state.DoS(100, false, REJECT_INVALID, \"bad-cb-missing\", false, \"first tx is not coinbase\");",
            "    for (unsigned int i = 1; i < block.vtx.size(); i++)",
            "        if (block.vtx[i].IsCoinBase())",
            "            return state.DoS(100, false, REJECT_INVALID, \"bad-cb-multiple\", false, \"more than one coinbase\");",
            "    return true;",
            "}"};
}

inline SearchFixture build_search_fixture(const std::filesystem::path& dir, bool fork_patched = false) {
    using patchscan::GitWriter;
    SearchFixture f;
    f.source = dir / "bitcoin";
    f.target = dir / "dogecoin";
    GitWriter up(f.source);
    up.write(f.path, search_fixture_source(false));
    up.commit("Add CheckBlock", at("2016-01-01T00:00:00Z"));
    up.write(f.path, search_fixture_source(true));
    f.patch_sha = up.commit("Reject mutated blocks before the merkle comparison", at("2019-08-10T00:00:00Z"));

    GitWriter fork(f.target);
    fork.write(f.path, search_fixture_fork(false));
    // copies that the search must never report
    fork.write("src/test/validation_tests.cpp", search_fixture_fork(false));
    fork.write("src/validation.h", search_fixture_fork(false));
    fork.commit("Import validation", at("2017-01-01T00:00:00Z"));
    if (fork_patched) {
        fork.write(f.path, search_fixture_fork(true));
        fork.commit("Backport mutated-block check", at("2019-09-01T00:00:00Z"));
        fork.tag("v1.14.3", at("2019-10-01T00:00:00Z"));
    }
    return f;
}

} // namespace testing_support
