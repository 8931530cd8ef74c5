#include "patchscan/patchscan.hpp"
#include "patchscan/remote.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace patchscan;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Values from the file fill options not given on the command line.
void apply_config_file(CLI::App& cmd, const std::string& path) {
    CLI::ConfigINI ini;
    for (const auto& item : ini.from_file(path)) {
        if (item.name == "++" || item.name == "--") continue; // section markers
        if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == cmd.get_name()))
            throw ConfigError("config key " + item.fullname() + " does not belong to " + cmd.get_name());
        std::string name = item.name;
        std::replace(name.begin(), name.end(), '_', '-');
        if (name == "config") throw ConfigError("config files cannot include other config files");
        CLI::Option* opt = cmd.get_option_no_throw("--" + name);
        if (!opt) throw ConfigError("unknown config key '" + item.name + "'");
        if (opt->count() > 0) continue;
        opt->add_result(item.inputs);
        opt->run_callback();
    }
}

struct DetectArgs {
    std::string source;
    std::string source_rev = "HEAD";
    std::vector<std::string> patches;
    std::vector<std::string> patch_files;
    std::string manifest;
    std::vector<std::string> targets;
    double r = 0.95;
    double t = 0.40;
    double ks = 0.25;
    int c_lines = 5;
    int max_candidates = 10;
    int jobs = 0;
    std::string out = "report.json";
    bool remote = false;
    std::string release_url;
    std::string release_cache;
    bool quiet = false;
};

int run_detect_cmd(const DetectArgs& a) {
    RunConfig cfg;
    try {
        if (!a.source.empty()) cfg.source = a.source;
        cfg.source_rev = a.source_rev;
        for (const auto& sha : a.patches) cfg.patches.push_back({PatchInput::Commit, sha, {}});
        if (!a.manifest.empty())
            for (auto& e : parse_manifest(slurp(a.manifest))) cfg.patches.push_back({PatchInput::Commit, e.sha, e.note});
        for (const auto& f : a.patch_files) cfg.patches.push_back({PatchInput::DiffFile, f, {}});
        for (const auto& t : a.targets) cfg.targets.push_back(parse_target_spec(t));
        cfg.params = {a.r, a.t, a.ks};
        cfg.c_lines = a.c_lines;
        cfg.max_candidates = a.max_candidates;
        cfg.jobs = a.jobs;
        if (a.remote) {
            if (a.release_url.empty()) throw ConfigError("--remote-releases needs --release-url");
            RemoteReleaseOptions ro{a.release_url, std::nullopt};
            if (!a.release_cache.empty()) ro.cache_dir = a.release_cache;
            cfg.release_lookup = make_remote_release_lookup(ro);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    auto outcome = run_detect(cfg);
    if (outcome.exit_code == kExitConfig || outcome.exit_code == kExitRepoIo) {
        std::cerr << "error: " << outcome.error << "\n";
        return outcome.exit_code;
    }
    try {
        write_report_files(outcome.report, {a.out, std::nullopt, std::nullopt});
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRepoIo;
    }
    if (!a.quiet) {
        for (const auto& row : outcome.report.results) {
            std::cout << row.patch.substr(0, 12) << "  " << row.target << "  " << to_string(row.status);
            if (row.location) std::cout << "  " << row.location->path << ":" << row.location->first_line;
            if (row.delay && row.delay->delay_days) std::cout << "  delay=" << *row.delay->delay_days << "d";
            std::cout << "\n";
        }
    }
    return outcome.exit_code;
}

int run_sweep_cmd(const std::string& pairs_dir, const std::string& grid, const std::string& out) {
    std::vector<FragmentPair> pairs;
    std::vector<double> rs;
    try {
        rs = parse_r_grid(grid);
        if (!fs::is_directory(pairs_dir)) throw ConfigError("pairs directory not found: " + pairs_dir);
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(pairs_dir))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            try {
                pairs.push_back(parse_fragment_pair(slurp(f)));
            } catch (const ParseError& e) {
                throw ConfigError(f.string() + ": " + e.what());
            }
        }
        if (pairs.empty()) throw ConfigError("no fragment pairs in " + pairs_dir);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    auto sweep = reward_sweep(pairs, rs);
    try {
        write_text(out, emit_cdf_csv(sweep_cdfs(sweep), "r"));
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRepoIo;
    }
    for (const auto& row : sweep) {
        double sum = 0;
        for (double s : row.scores) sum += s;
        std::cout << "r=" << row.r << "  mean=" << sum / static_cast<double>(row.scores.size()) << "\n";
    }
    return kExitClean;
}

int run_gen_cmd(const std::string& spec_path, const std::string& out) {
    CorpusSpec spec;
    try {
        spec = parse_corpus_spec(slurp(spec_path));
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    try {
        auto cases = gen_fixtures(spec, out);
        std::cout << "generated " << cases.size() << " cases in " << out << "\n";
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRepoIo;
    }
    return kExitClean;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Find unpatched clones of upstream fixes in forked repositories"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    DetectArgs d;
    auto* detect = app.add_subcommand("detect", "Check targets for the presence of source patches");
    std::string config_path;
    detect->add_option("--config", config_path, "Flat key = value file with option defaults")
        ->check(CLI::ExistingFile);
    detect->add_option("--source", d.source, "Source repository");
    detect->add_option("--source-rev", d.source_rev, "Source revision");
    detect->add_option("--patch", d.patches, "Patch commit in the source repository");
    detect->add_option("--patch-file", d.patch_files, "Unified diff file");
    detect->add_option("--manifest", d.manifest, "File listing patch commits, one sha[:note] per line");
    detect->add_option("--target", d.targets, "Target repository as path[,rev]");
    detect->add_option("--r", d.r, "Positional reward factor")->capture_default_str();
    detect->add_option("--t", d.t, "Decision threshold")->capture_default_str();
    detect->add_option("--ks-threshold", d.ks, "Key statement threshold")->capture_default_str();
    detect->add_option("--context-lines", d.c_lines, "Context statements per side")->capture_default_str();
    detect->add_option("--max-candidates", d.max_candidates, "Candidate contexts kept per side")->capture_default_str();
    detect->add_option("--jobs", d.jobs, "Worker threads, 0 for all cores")->capture_default_str();
    detect->add_option("--out", d.out, "JSON report path; CSV files go next to it")->capture_default_str();
    detect->add_flag("--remote-releases", d.remote, "Look releases up over HTTP instead of local tags");
    detect->add_option("--release-url", d.release_url, "Release listing URL template with {repo} and {sha}");
    detect->add_option("--release-cache", d.release_cache, "Directory caching release listings");
    detect->add_flag("-q,--quiet", d.quiet, "Do not print result rows");

    std::string pairs_dir, grid = "0.15:0.95:0.10", sweep_out = "rsweep_cdf.csv";
    auto* sweep = app.add_subcommand("sweep-r", "Score fragment pairs across reward factors and emit CDFs");
    sweep->add_option("--pairs", pairs_dir, "Directory of fragment pair files")->required();
    sweep->add_option("--r", grid, "Grid lo:hi:step")->capture_default_str();
    sweep->add_option("--out", sweep_out, "CDF CSV path")->capture_default_str();

    std::string spec_path, gen_out;
    auto* gen = app.add_subcommand("gen-fixtures", "Build planted-clone git fixtures from a corpus file");
    gen->add_option("--spec", spec_path, "Corpus JSON")->required();
    gen->add_option("--out", gen_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    if (*detect) {
        try {
            if (!config_path.empty()) apply_config_file(*detect, config_path);
            if (d.targets.empty()) throw ConfigError("--target is required");
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kExitConfig;
        }
        return run_detect_cmd(d);
    }
    if (*sweep) return run_sweep_cmd(pairs_dir, grid, sweep_out);
    return run_gen_cmd(spec_path, gen_out);
}
