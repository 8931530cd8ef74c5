#pragma once

// Deterministic git fixture corpora: a source repository with a patch commit
// and, per case, a vulnerable and a patched target holding a Type-1, Type-2
// or Type-3 clone of the patched file.

#include "patchscan/error.hpp"
#include "patchscan/gitio.hpp"
#include "patchscan/process.hpp"
#include "patchscan/timeutil.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace patchscan {

// Writes commits into a fresh repository with pinned identities and dates,
// isolated from the user's git configuration.
class GitWriter {
public:
    explicit GitWriter(std::filesystem::path dir, bool init = true) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
        if (init) run({"init", "-q", "-b", "main"});
    }

    // A fork: full clone of `upstream` sharing its history.
    static GitWriter clone_of(const std::filesystem::path& upstream, const std::filesystem::path& dir) {
        auto r = run_process({"git", "clone", "-q", "--no-hardlinks", upstream.string(), dir.string()},
                             {{"GIT_CONFIG_NOSYSTEM", "1"}, {"GIT_CONFIG_GLOBAL", "/dev/null"}});
        if (r.exit_code != 0) throw GitIoError("fixture clone failed: " + r.err);
        return GitWriter(dir, false);
    }

    const std::filesystem::path& dir() const { return dir_; }

    void write(const std::string& rel, const std::vector<std::string>& lines) const {
        std::string text;
        for (const auto& l : lines) text += l + "\n";
        write_raw(rel, text);
    }

    void write_raw(const std::string& rel, const std::string& text) const {
        auto p = dir_ / rel;
        std::filesystem::create_directories(p.parent_path());
        std::ofstream out(p, std::ios::binary);
        if (!out) throw GitIoError("cannot write fixture file " + p.string());
        out << text;
    }

    void remove(const std::string& rel) const { std::filesystem::remove(dir_ / rel); }

    std::string commit(const std::string& message, UtcTime when) const {
        run({"add", "-A"});
        run({"commit", "-q", "--allow-empty", "--no-verify", "-m", message}, when);
        return head();
    }

    std::string head() const {
        auto r = run({"rev-parse", "HEAD"});
        return r.substr(0, r.find('\n'));
    }

    // Annotated tags carry `when` as tagger date; lightweight tags none.
    void tag(const std::string& name, UtcTime when, bool annotated = true, const std::string& target = "HEAD") const {
        if (annotated) run({"tag", "-a", name, "-m", "release " + name, target}, when);
        else run({"tag", name, target});
    }

    std::string run(const std::vector<std::string>& args, std::optional<UtcTime> when = std::nullopt) const {
        std::vector<std::string> argv{"git", "-C", dir_.string(), "-c", "user.name=Fixture Author",
                                      "-c", "user.email=fixtures@example.org", "-c", "commit.gpgsign=false",
                                      "-c", "tag.gpgsign=false", "-c", "core.autocrlf=false"};
        argv.insert(argv.end(), args.begin(), args.end());
        std::map<std::string, std::string> env{{"GIT_CONFIG_NOSYSTEM", "1"}, {"GIT_CONFIG_GLOBAL", "/dev/null"},
                                               {"LC_ALL", "C"}};
        if (when) {
            auto stamp = "@" + std::to_string(to_unix(*when)) + " +0000";
            env["GIT_AUTHOR_DATE"] = stamp;
            env["GIT_COMMITTER_DATE"] = stamp;
        }
        auto r = run_process(argv, env);
        if (r.exit_code != 0) throw GitIoError("fixture git " + args.front() + " failed: " + r.err);
        return r.out;
    }

private:
    std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Corpus model

// A patched file as diff-prefixed lines: ' ' unchanged, '-' only before the
// patch, '+' only after it.
struct FixtureTemplate {
    std::string path;
    std::vector<std::string> lines;
    std::string message = "Fix vulnerability";
};

struct FixtureCase {
    std::string name;
    std::string template_id;
    int clone_type = 1;
    std::map<std::string, std::string> rename; // Type-2
    std::vector<std::string> ops;              // Type-3: "swap A B", "insert K text", "delete K"
    std::string target_path;                   // defaults to the template path
    int filler_files = -1;                     // -1 = corpus default
    int filler_functions = -1;
};

struct CorpusSpec {
    UtcTime source_base = parse_iso8601("2019-01-01T00:00:00Z");
    UtcTime source_fix = parse_iso8601("2019-08-10T00:00:00Z");
    UtcTime fork = parse_iso8601("2019-03-01T00:00:00Z");
    UtcTime target_fix = parse_iso8601("2019-10-01T00:00:00Z");
    UtcTime release = parse_iso8601("2020-02-22T00:00:00Z");
    std::string release_tag = "v1.0.0";
    bool decoys = true;
    int filler_files = 0;
    int filler_functions = 0;
    std::map<std::string, FixtureTemplate> templates;
    std::vector<FixtureCase> cases;
};

struct GeneratedTarget {
    std::string variant; // "vulnerable" | "patched"
    std::filesystem::path path;
    std::string expected; // "Vulnerable" | "Fixed"
    std::string fix_commit;
    std::string release_tag;
    std::optional<long long> expected_delay_days;
};

struct GeneratedCase {
    std::string name;
    int clone_type = 1;
    std::string template_id;
    std::filesystem::path source;
    std::string patch_sha;
    std::string path;        // patched file in the source
    std::string target_path; // clone location in the targets
    std::vector<GeneratedTarget> targets;
};

inline CorpusSpec parse_corpus_spec(std::string_view text) {
    using nlohmann::json;
    CorpusSpec spec;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("corpus spec is not valid JSON: ") + e.what());
    }
    try {
        if (j.contains("dates")) {
            const auto& d = j["dates"];
            auto date = [&](const char* key, UtcTime& dst) {
                if (d.contains(key)) dst = parse_iso8601(d[key].get<std::string>());
            };
            date("source_base", spec.source_base);
            date("source_fix", spec.source_fix);
            date("fork", spec.fork);
            date("target_fix", spec.target_fix);
            date("release", spec.release);
        }
        spec.release_tag = j.value("release_tag", spec.release_tag);
        spec.decoys = j.value("decoys", spec.decoys);
        if (j.contains("filler")) {
            spec.filler_files = j["filler"].value("files", 0);
            spec.filler_functions = j["filler"].value("functions_per_file", 0);
        }
        for (const auto& [id, tj] : j.at("templates").items()) {
            FixtureTemplate t;
            t.path = tj.at("path").get<std::string>();
            t.lines = tj.at("lines").get<std::vector<std::string>>();
            t.message = tj.value("message", t.message);
            for (const auto& l : t.lines)
                if (l.empty() || (l[0] != ' ' && l[0] != '-' && l[0] != '+'))
                    throw ConfigError("template " + id + ": line without ' ', '-' or '+' prefix: '" + l + "'");
            spec.templates.emplace(id, std::move(t));
        }
        for (const auto& cj : j.at("cases")) {
            FixtureCase c;
            c.name = cj.at("name").get<std::string>();
            c.template_id = cj.at("template").get<std::string>();
            c.clone_type = cj.value("clone", 1);
            if (cj.contains("rename")) c.rename = cj["rename"].get<std::map<std::string, std::string>>();
            if (cj.contains("ops")) c.ops = cj["ops"].get<std::vector<std::string>>();
            c.target_path = cj.value("target_path", std::string{});
            if (cj.contains("filler")) {
                c.filler_files = cj["filler"].value("files", 0);
                c.filler_functions = cj["filler"].value("functions_per_file", 0);
            }
            if (c.clone_type < 1 || c.clone_type > 3) throw ConfigError("case " + c.name + ": clone must be 1, 2 or 3");
            if (!spec.templates.count(c.template_id))
                throw ConfigError("case " + c.name + ": unknown template '" + c.template_id + "'");
            if (c.name.empty() || c.name.find('/') != std::string::npos)
                throw ConfigError("case name must be a plain directory name");
            spec.cases.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("corpus spec: ") + e.what());
    } catch (const ArgumentError& e) {
        throw ConfigError(std::string("corpus spec: ") + e.what());
    }
    return spec;
}

namespace detail {

struct TemplateItem {
    std::string text;
    bool in_old = true;
    bool in_new = true;
};

inline std::vector<TemplateItem> template_items(const FixtureTemplate& t) {
    std::vector<TemplateItem> items;
    for (const auto& l : t.lines) items.push_back({l.substr(1), l[0] != '+', l[0] != '-'});
    return items;
}

inline std::vector<std::string> render(const std::vector<TemplateItem>& items, bool new_side) {
    std::vector<std::string> out;
    for (const auto& it : items)
        if (new_side ? it.in_new : it.in_old) out.push_back(it.text);
    return out;
}

// Whole-identifier substitution.
inline std::string rename_identifiers(const std::string& line, const std::map<std::string, std::string>& rename) {
    if (rename.empty()) return line;
    std::string out;
    std::size_t i = 0;
    auto ident_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
    auto ident_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    while (i < line.size()) {
        if (ident_start(line[i]) && (i == 0 || !ident_char(line[i - 1]))) {
            std::size_t j = i;
            while (j < line.size() && ident_char(line[j])) ++j;
            auto word = line.substr(i, j - i);
            auto it = rename.find(word);
            out += it == rename.end() ? word : it->second;
            i = j;
        } else {
            out += line[i++];
        }
    }
    return out;
}

// Applies Type-3 edits. Line numbers refer to the original pre-patch file and
// may only name lines the patch leaves unchanged.
inline std::vector<TemplateItem> apply_ops(std::vector<TemplateItem> items, const std::vector<std::string>& ops,
                                           const std::string& case_name) {
    // stable ids for original old-side lines
    std::vector<std::size_t> old_to_item;
    for (std::size_t i = 0; i < items.size(); ++i)
        if (items[i].in_old) old_to_item.push_back(i);
    std::vector<int> id_of(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) id_of[i] = static_cast<int>(i);
    int next_id = static_cast<int>(items.size());

    auto position_of = [&](int id) -> std::size_t {
        for (std::size_t i = 0; i < id_of.size(); ++i)
            if (id_of[i] == id) return i;
        throw ConfigError("case " + case_name + ": op refers to a deleted line");
    };
    auto common_id = [&](long line) -> int {
        if (line < 1 || static_cast<std::size_t>(line) > old_to_item.size())
            throw ConfigError("case " + case_name + ": op line " + std::to_string(line) + " out of range");
        std::size_t item = old_to_item[line - 1];
        if (!items[item].in_new)
            throw ConfigError("case " + case_name + ": op line " + std::to_string(line) + " is changed by the patch");
        return static_cast<int>(item);
    };

    for (const auto& op : ops) {
        std::istringstream is(op);
        std::string verb;
        is >> verb;
        if (verb == "swap") {
            long a = 0, b = 0;
            if (!(is >> a >> b)) throw ConfigError("case " + case_name + ": bad op '" + op + "'");
            auto pa = position_of(common_id(a)), pb = position_of(common_id(b));
            std::swap(items[pa], items[pb]);
            std::swap(id_of[pa], id_of[pb]);
        } else if (verb == "insert") {
            long after = 0;
            if (!(is >> after)) throw ConfigError("case " + case_name + ": bad op '" + op + "'");
            std::string text;
            std::getline(is, text);
            if (!text.empty() && text.front() == ' ') text.erase(0, 1);
            std::size_t pos = after == 0 ? 0 : position_of(common_id(after)) + 1;
            items.insert(items.begin() + static_cast<std::ptrdiff_t>(pos), TemplateItem{text, true, true});
            id_of.insert(id_of.begin() + static_cast<std::ptrdiff_t>(pos), next_id++);
        } else if (verb == "delete") {
            long line = 0;
            if (!(is >> line)) throw ConfigError("case " + case_name + ": bad op '" + op + "'");
            auto pos = position_of(common_id(line));
            items.erase(items.begin() + static_cast<std::ptrdiff_t>(pos));
            id_of.erase(id_of.begin() + static_cast<std::ptrdiff_t>(pos));
        } else {
            throw ConfigError("case " + case_name + ": unknown op '" + op + "'");
        }
    }
    return items;
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace detail

// Synthetic C++ translation unit of `functions` small functions; content is a
// pure function of (seed, index).
inline std::vector<std::string> generate_filler_file(std::uint64_t seed, int index, int functions) {
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(index + 1)));
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
    static const std::vector<std::string> verbs = {"Compute", "Update", "Validate", "Process", "Check", "Apply",
                                                   "Merge",   "Encode", "Decode",   "Flush",   "Load",  "Store"};
    static const std::vector<std::string> nouns = {"Block",  "Header", "Tx",     "Peer",   "Coin", "Script",
                                                   "Wallet", "Chain",  "Mempool", "Output", "Fee",  "Index"};
    static const std::vector<std::string> types = {"int", "int64_t", "uint32_t", "size_t", "bool"};

    std::vector<std::string> out;
    out.push_back("// generated module " + std::to_string(index));
    out.push_back("#include <cstdint>");
    out.push_back("#include <vector>");
    out.push_back("");
    out.push_back("namespace gen" + std::to_string(index) + " {");
    out.push_back("");
    for (int f = 0; f < functions; ++f) {
        const auto fname = verbs[pick(verbs.size())] + nouns[pick(nouns.size())] + "_" + std::to_string(index) + "_" +
                           std::to_string(f);
        const auto& ty = types[pick(types.size())];
        const auto k = std::to_string(1 + pick(97));
        out.push_back("static " + ty + " " + fname + "(int nInput, const std::vector<int>& vData)");
        out.push_back("{");
        out.push_back("    int64_t nAccum = " + k + ";");
        out.push_back("    for (size_t i = 0; i < vData.size(); ++i) {");
        switch (pick(3)) {
        case 0: out.push_back("        nAccum += vData[i] * " + k + ";"); break;
        case 1: out.push_back("        nAccum ^= (vData[i] << " + std::to_string(pick(16)) + ");"); break;
        default: out.push_back("        nAccum = nAccum * 31 + vData[i];"); break;
        }
        out.push_back("    }");
        out.push_back("    if (nAccum > nInput) {");
        out.push_back("        nAccum -= nInput / " + k + ";");
        out.push_back("    }");
        out.push_back("    return static_cast<" + ty + ">(nAccum);");
        out.push_back("}");
        out.push_back("");
    }
    out.push_back("} // namespace gen" + std::to_string(index));
    return out;
}

inline std::string replace_extension(const std::string& path, const std::string& ext) {
    auto slash = path.find_last_of('/');
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + ext;
    return path.substr(0, dot) + ext;
}

inline std::string base_name(const std::string& path) {
    auto slash = path.find_last_of('/');
    return slash == std::string::npos ? path : path.substr(slash + 1);
}

// Builds every case under out_dir/<case>/{source,vulnerable,patched} and
// writes out_dir/manifest.json. Existing repositories at those paths are
// replaced.
inline std::vector<GeneratedCase> gen_fixtures(const CorpusSpec& spec, const std::filesystem::path& out_dir) {
    std::vector<GeneratedCase> generated;
    std::filesystem::create_directories(out_dir);
    for (const auto& c : spec.cases) {
        const auto& tmpl = spec.templates.at(c.template_id);
        GeneratedCase g;
        g.name = c.name;
        g.clone_type = c.clone_type;
        g.template_id = c.template_id;
        g.path = tmpl.path;
        g.target_path = c.target_path.empty() ? tmpl.path : c.target_path;

        const auto case_dir = out_dir / c.name;
        for (const char* sub : {"source", "vulnerable", "patched"}) std::filesystem::remove_all(case_dir / sub);

        const auto items = detail::template_items(tmpl);
        const int filler_files = c.filler_files >= 0 ? c.filler_files : spec.filler_files;
        const int filler_functions = c.filler_functions >= 0 ? c.filler_functions : spec.filler_functions;
        const auto seed = detail::fnv1a(c.name);

        // source: base import, then the fix
        {
            GitWriter src(case_dir / "source");
            src.write(tmpl.path, detail::render(items, false));
            src.write("README", {"source project"});
            src.commit("Initial import", spec.source_base);
            src.write(tmpl.path, detail::render(items, true));
            g.patch_sha = src.commit(tmpl.message, spec.source_fix);
            g.source = src.dir();
        }

        auto target_items = items;
        if (c.clone_type == 2)
            for (auto& it : target_items) it.text = detail::rename_identifiers(it.text, c.rename);
        if (c.clone_type == 3) {
            target_items = detail::apply_ops(target_items, c.ops, c.name);
            for (auto& it : target_items) it.text = detail::rename_identifiers(it.text, c.rename);
        }
        const auto vuln_lines = detail::render(target_items, false);
        const auto fixed_lines = detail::render(target_items, true);

        auto populate_fork = [&](GitWriter& w) {
            w.write(g.target_path, vuln_lines);
            w.write("README", {"forked project " + c.name});
            if (spec.decoys) {
                // stale copies the search must ignore
                w.write("tests/" + base_name(g.target_path), vuln_lines);
                w.write(replace_extension(g.target_path, ".h"), vuln_lines);
            }
            for (int f = 0; f < filler_files; ++f)
                w.write("src/gen/module_" + std::to_string(f) + ".cpp", generate_filler_file(seed, f, filler_functions));
            return w.commit("Fork from upstream", spec.fork);
        };

        {
            GitWriter v(case_dir / "vulnerable");
            populate_fork(v);
            v.tag("v0.1.0", spec.fork);
            g.targets.push_back({"vulnerable", v.dir(), "Vulnerable", {}, {}, std::nullopt});
        }
        {
            GitWriter p(case_dir / "patched");
            populate_fork(p);
            p.tag("v0.1.0", spec.fork);
            p.write(g.target_path, fixed_lines);
            auto fix = p.commit("Backport: " + tmpl.message, spec.target_fix);
            p.tag(spec.release_tag, spec.release);
            GeneratedTarget t{"patched", p.dir(), "Fixed", fix, spec.release_tag, std::nullopt};
            long long secs = (spec.release - spec.source_fix).count();
            t.expected_delay_days = secs >= 0 ? secs / 86400 : -((-secs + 86399) / 86400);
            g.targets.push_back(std::move(t));
        }
        generated.push_back(std::move(g));
    }

    nlohmann::ordered_json manifest;
    manifest["cases"] = nlohmann::ordered_json::array();
    for (const auto& g : generated) {
        nlohmann::ordered_json cj;
        cj["name"] = g.name;
        cj["clone"] = g.clone_type;
        cj["template"] = g.template_id;
        cj["source"] = g.source.string();
        cj["patch_sha"] = g.patch_sha;
        cj["path"] = g.path;
        cj["target_path"] = g.target_path;
        cj["targets"] = nlohmann::ordered_json::array();
        for (const auto& t : g.targets) {
            nlohmann::ordered_json tj;
            tj["variant"] = t.variant;
            tj["path"] = t.path.string();
            tj["expected"] = t.expected;
            tj["fix_commit"] = t.fix_commit.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(t.fix_commit);
            tj["release_tag"] = t.release_tag.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(t.release_tag);
            tj["expected_delay_days"] =
                t.expected_delay_days ? nlohmann::ordered_json(*t.expected_delay_days) : nlohmann::ordered_json(nullptr);
            cj["targets"].push_back(std::move(tj));
        }
        manifest["cases"].push_back(std::move(cj));
    }
    std::ofstream(out_dir / "manifest.json") << manifest.dump(2) << "\n";
    return generated;
}

} // namespace patchscan
