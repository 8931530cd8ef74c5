#pragma once

#include "patchscan/error.hpp"

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

namespace patchscan {

using UtcTime = std::chrono::sys_seconds;

// Parses strict ISO-8601 as printed by git (%cI, creatordate:iso-strict):
// "YYYY-MM-DDTHH:MM:SS" followed by "Z" or "+HH:MM"/"-HH:MM". The result is
// normalized to UTC.
inline UtcTime parse_iso8601(std::string_view text) {
    using namespace std::chrono;
    auto fail = [&] { return ArgumentError("bad ISO-8601 timestamp: '" + std::string(text) + "'"); };
    if (text.size() < 19) throw fail();

    auto digits = [&](std::size_t pos, std::size_t n) {
        int v = 0;
        for (std::size_t i = pos; i < pos + n; ++i) {
            if (i >= text.size() || text[i] < '0' || text[i] > '9') throw fail();
            v = v * 10 + (text[i] - '0');
        }
        return v;
    };
    auto expect = [&](std::size_t pos, char c) {
        if (pos >= text.size() || text[pos] != c) throw fail();
    };

    int y = digits(0, 4);
    expect(4, '-');
    int mo = digits(5, 2);
    expect(7, '-');
    int d = digits(8, 2);
    if (text[10] != 'T' && text[10] != ' ') throw fail();
    int h = digits(11, 2);
    expect(13, ':');
    int mi = digits(14, 2);
    expect(16, ':');
    int s = digits(17, 2);

    year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw fail();

    std::size_t pos = 19;
    // fractional seconds are accepted and truncated
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
    }

    long offset_sec = 0;
    if (pos == text.size()) {
        // no designator: assume UTC
    } else if (text[pos] == 'Z' && pos + 1 == text.size()) {
    } else if ((text[pos] == '+' || text[pos] == '-') && text.size() == pos + 6) {
        int oh = digits(pos + 1, 2);
        expect(pos + 3, ':');
        int om = digits(pos + 4, 2);
        offset_sec = (oh * 3600L + om * 60L) * (text[pos] == '-' ? -1 : 1);
    } else {
        throw fail();
    }

    auto local = sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
    return local - seconds{offset_sec};
}

inline std::string format_iso8601(UtcTime t) {
    using namespace std::chrono;
    auto day_point = floor<days>(t);
    year_month_day ymd{day_point};
    hh_mm_ss hms{t - day_point};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                  static_cast<long>(hms.seconds().count()));
    return buf;
}

inline UtcTime from_unix(long long secs) { return UtcTime{std::chrono::seconds{secs}}; }

inline long long to_unix(UtcTime t) { return t.time_since_epoch().count(); }

} // namespace patchscan
