#pragma once

// Release lookup over HTTP for repositories whose releases are not tagged
// locally. The endpoint returns a JSON array of {"tag_name", "published_at"}
// objects; responses are cached on disk keyed by URL.
//
// HTTPS needs CPPHTTPLIB_OPENSSL_SUPPORT defined before inclusion.

#include "patchscan/delay.hpp"
#include "patchscan/error.hpp"
#include "patchscan/gitio.hpp"
#include "patchscan/timeutil.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace patchscan {

struct RemoteReleaseOptions {
    std::string url_template;                // "{sha}" and "{repo}" are substituted
    std::optional<std::filesystem::path> cache_dir;
    int timeout_seconds = 20;
};

inline std::string expand_url_template(std::string tmpl, const std::string& repo, const std::string& sha) {
    auto sub = [&](const std::string& key, const std::string& value) {
        for (auto pos = tmpl.find(key); pos != std::string::npos; pos = tmpl.find(key, pos + value.size()))
            tmpl.replace(pos, key.size(), value);
    };
    sub("{sha}", sha);
    sub("{repo}", repo);
    return tmpl;
}

inline std::vector<Release> parse_release_listing(const std::string& body) {
    std::vector<Release> out;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw GitIoError(std::string("release listing is not JSON: ") + e.what());
    }
    if (!j.is_array()) throw GitIoError("release listing is not a JSON array");
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("tag_name") || !item.contains("published_at")) continue;
        if (!item["published_at"].is_string()) continue;
        try {
            out.push_back({item["tag_name"].get<std::string>(), parse_iso8601(item["published_at"].get<std::string>())});
        } catch (const ArgumentError&) {
        }
    }
    std::sort(out.begin(), out.end(),
              [](const Release& a, const Release& b) { return std::tie(a.date, a.tag) < std::tie(b.date, b.tag); });
    return out;
}

namespace detail {

inline std::string url_cache_key(const std::string& url) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : url) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string http_get(const std::string& url, int timeout_seconds) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("release URL needs a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    if (!client.is_valid()) throw ConfigError("unsupported release URL: " + url);
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);
    client.set_follow_location(true);
    auto res = client.Get(path, {{"Accept", "application/json"}});
    if (!res) throw GitIoError("release lookup failed for " + url + ": " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw GitIoError("release lookup for " + url + " returned HTTP " + std::to_string(res->status));
    return res->body;
}

} // namespace detail

inline ReleaseLookup make_remote_release_lookup(RemoteReleaseOptions opts) {
    if (opts.url_template.empty()) throw ConfigError("remote release URL template is empty");
    return [opts](const RepoHandle& repo, const std::string& sha) {
        auto full = repo.resolve_commit(sha);
        auto url = expand_url_template(opts.url_template, repo.name(), full);
        std::optional<std::filesystem::path> cached;
        if (opts.cache_dir) {
            cached = *opts.cache_dir / (detail::url_cache_key(url) + ".json");
            std::ifstream in(*cached, std::ios::binary);
            if (in) {
                std::ostringstream ss;
                ss << in.rdbuf();
                return parse_release_listing(ss.str());
            }
        }
        auto body = detail::http_get(url, opts.timeout_seconds);
        auto releases = parse_release_listing(body);
        if (cached) {
            std::filesystem::create_directories(cached->parent_path());
            std::ofstream(*cached, std::ios::binary) << body;
        }
        return releases;
    };
}

} // namespace patchscan
