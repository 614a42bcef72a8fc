#include "deltaif/timeutil.hpp"

#include <cstdio>
#include <stdexcept>

namespace deltaif {

namespace {

// Floor division that is exact for negative values too.
std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

std::int64_t floor_mod(std::int64_t a, std::int64_t b) {
    return a - floor_div(a, b) * b;
}

constexpr std::int64_t kDay = 86400;
constexpr std::int64_t kWeek = 7 * kDay;

} // namespace

// Howard Hinnant's civil calendar algorithms.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yy + (m <= 2));
}

std::int64_t parse_iso8601(const std::string& s) {
    int y = 0, mo = 0, da = 0, h = 0, mi = 0, se = 0;
    char tail = '\0';
    const int n = std::sscanf(s.c_str(), "%d-%2d-%2dT%2d:%2d:%2d%c",
                              &y, &mo, &da, &h, &mi, &se, &tail);
    if (n != 7 || tail != 'Z' || s.size() != 20) {
        throw std::invalid_argument("invalid ISO-8601 UTC timestamp: '" + s + "'");
    }
    if (mo < 1 || mo > 12 || da < 1 || da > 31 || h > 23 || mi > 59 || se > 60 ||
        h < 0 || mi < 0 || se < 0) {
        throw std::invalid_argument("timestamp field out of range: '" + s + "'");
    }
    return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(da)) * kDay +
           h * 3600 + mi * 60 + se;
}

std::string format_iso8601(std::int64_t t) {
    const std::int64_t days = floor_div(t, kDay);
    const std::int64_t sec = floor_mod(t, kDay);
    int y;
    unsigned m, d;
    civil_from_days(days, y, m, d);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", y, m, d,
                  static_cast<int>(sec / 3600), static_cast<int>((sec / 60) % 60),
                  static_cast<int>(sec % 60));
    return buf;
}

int day_of_week(std::int64_t t) {
    // 1970-01-01 was a Thursday (Monday-based index 3).
    return static_cast<int>(floor_mod(floor_div(t, kDay) + 3, 7));
}

int hour_of_day(std::int64_t t) {
    return static_cast<int>(floor_mod(t, kDay) / 3600);
}

std::int64_t seconds_into_day(std::int64_t t) { return floor_mod(t, kDay); }

std::int64_t seconds_into_week(std::int64_t t) {
    // Shift so weeks begin on Monday 00:00; 1970-01-01 was a Thursday.
    return floor_mod(t - 4 * kDay, kWeek);
}

} // namespace deltaif
