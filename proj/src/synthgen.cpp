#include "deltaif/synthgen.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "deltaif/rng.hpp"
#include "deltaif/timeutil.hpp"

namespace deltaif {

namespace {

constexpr std::int64_t kMinute = 60;
constexpr std::int64_t kWeekMinutes = 7 * 1440;

// Of the disturbed occurrences, this share is dropped outright; the rest
// shift by a uniform offset in [-180, +180] minutes.
constexpr double kSkipShare = 0.3;
constexpr double kMaxShiftMinutes = 180.0;

struct Occurrence {
    std::int64_t onset_minute;  // minutes since epoch
    int duration_min;
    double drop_rate;
};

// Enumerates scheduled occurrences week by week (starting one week early so
// shifted showers can spill into the range), drawing exactly three variates
// per occurrence to keep the stream aligned whatever the branches do.
std::vector<Occurrence> plan_showers(const HouseholdProfile& profile, std::int64_t start,
                                     std::int64_t end, Rng* rng) {
    std::vector<Occurrence> out;
    const std::int64_t week0 = (start - seconds_into_week(start)) / kMinute - kWeekMinutes;
    const std::int64_t end_minute = end / kMinute;
    for (std::int64_t week = week0; week < end_minute; week += kWeekMinutes) {
        for (const ShowerSpec& s : profile.showers) {
            std::int64_t onset = week + s.day_of_week * 1440 + s.start_minute_of_day;
            bool skipped = false;
            if (rng != nullptr) {
                const double u_disturb = rng->uniform01();
                const double u_skip = rng->uniform01();
                const double u_offset = rng->uniform01();
                if (u_disturb < profile.irregularity) {
                    if (u_skip < kSkipShare) {
                        skipped = true;
                    } else {
                        onset += std::llround((2.0 * u_offset - 1.0) * kMaxShiftMinutes);
                    }
                }
            }
            if (!skipped) out.push_back({onset, s.duration_min, s.drop_rate});
        }
    }
    return out;
}

} // namespace

void validate_profile(const HouseholdProfile& profile) {
    if (profile.heat_off_threshold <= profile.heat_on_threshold) {
        throw std::invalid_argument("profile " + profile.id + ": heat_off must exceed heat_on");
    }
    if (profile.heat_rate <= 0.0 || profile.cool_rate <= 0.0) {
        throw std::invalid_argument("profile " + profile.id + ": rates must be positive");
    }
    if (profile.noise_sigma < 0.0) {
        throw std::invalid_argument("profile " + profile.id + ": noise_sigma must be >= 0");
    }
    if (profile.irregularity < 0.0 || profile.irregularity > 1.0) {
        throw std::invalid_argument("profile " + profile.id + ": irregularity must be in [0,1]");
    }
    for (const ShowerSpec& s : profile.showers) {
        if (s.day_of_week < 0 || s.day_of_week > 6 || s.start_minute_of_day < 0 ||
            s.start_minute_of_day > 1439 || s.duration_min < 1 || s.drop_rate <= 0.0) {
            throw std::invalid_argument("profile " + profile.id + ": bad shower spec");
        }
    }
}

RegularSeries generate_household(const HouseholdProfile& profile, std::int64_t start,
                                 int days, std::uint64_t seed) {
    validate_profile(profile);
    if (days < 1) throw std::invalid_argument("generate_household: days must be >= 1");

    const std::size_t n = static_cast<std::size_t>(days) * 1440;
    const std::int64_t end = start + static_cast<std::int64_t>(n) * kMinute;
    Rng rng(seed);

    // Per-minute extra draw-down caused by showers.
    std::vector<double> draw(n, 0.0);
    const std::int64_t start_minute = start / kMinute;
    for (const Occurrence& occ : plan_showers(profile, start, end, &rng)) {
        for (int m = 0; m < occ.duration_min; ++m) {
            const std::int64_t idx = occ.onset_minute + m - start_minute;
            if (idx >= 0 && idx < static_cast<std::int64_t>(n)) {
                draw[static_cast<std::size_t>(idx)] += occ.drop_rate;
            }
        }
    }

    RegularSeries out;
    out.household_id = profile.id;
    out.start = start;
    out.step_seconds = 60;
    out.values.resize(n);

    double temp = profile.base_temp;
    bool heating = profile.base_temp <= profile.heat_on_threshold;
    for (std::size_t i = 0; i < n; ++i) {
        out.values[i] = temp;
        temp += (heating ? profile.heat_rate : -profile.cool_rate) - draw[i];
        if (temp <= profile.heat_on_threshold) {
            heating = true;
        } else if (temp >= profile.heat_off_threshold) {
            heating = false;
        }
    }
    if (profile.noise_sigma > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            out.values[i] += profile.noise_sigma * rng.gaussian();
        }
    }
    return out;
}

std::vector<std::int64_t> scheduled_shower_onsets(const HouseholdProfile& profile,
                                                  std::int64_t start, int days) {
    const std::int64_t end = start + static_cast<std::int64_t>(days) * 1440 * kMinute;
    std::vector<std::int64_t> out;
    for (const Occurrence& occ : plan_showers(profile, start, end, nullptr)) {
        const std::int64_t t = occ.onset_minute * kMinute;
        if (t >= start && t < end) out.push_back(t);
    }
    return out;
}

std::vector<HouseholdProfile> default_profiles() {
    std::vector<HouseholdProfile> profiles;

    // h1: erratic. Narrow band, noisy sensor, and most showers drift or
    // vanish week to week.
    {
        HouseholdProfile p;
        p.id = "h1";
        p.base_temp = 50.0;
        p.heat_on_threshold = 47.0;
        p.heat_off_threshold = 52.0;
        p.heat_rate = 0.3;
        p.cool_rate = 0.06;
        p.noise_sigma = 0.18;
        p.irregularity = 0.6;
        p.showers = {
            {0, 6 * 60 + 30, 12, 0.7},  {1, 4 * 60, 10, 0.7},  {1, 18 * 60, 12, 0.7},
            {2, 12 * 60, 10, 0.7},      {3, 9 * 60 + 30, 12, 0.7}, {4, 22 * 60, 10, 0.7},
            {5, 10 * 60, 12, 0.7},      {6, 16 * 60, 10, 0.7},
        };
        profiles.push_back(p);
    }

    // h2: weekend-heavy with a light weekday routine.
    {
        HouseholdProfile p;
        p.id = "h2";
        p.base_temp = 50.0;
        p.heat_on_threshold = 43.0;
        p.heat_off_threshold = 54.0;
        p.heat_rate = 0.45;
        p.cool_rate = 0.035;
        p.noise_sigma = 0.07;
        p.irregularity = 0.15;
        p.showers = {
            {5, 9 * 60, 14, 0.75},  {5, 19 * 60, 12, 0.75}, {6, 8 * 60 + 30, 14, 0.75},
            {6, 17 * 60, 12, 0.75}, {0, 7 * 60 + 30, 10, 0.75}, {2, 7 * 60 + 30, 10, 0.75},
            {4, 7 * 60 + 30, 10, 0.75},
        };
        profiles.push_back(p);
    }

    // h3: late-evening preference.
    {
        HouseholdProfile p;
        p.id = "h3";
        p.base_temp = 51.0;
        p.heat_on_threshold = 44.0;
        p.heat_off_threshold = 55.0;
        p.heat_rate = 0.5;
        p.cool_rate = 0.04;
        p.noise_sigma = 0.08;
        p.irregularity = 0.2;
        p.showers = {
            {0, 21 * 60 + 30, 14, 0.8}, {1, 21 * 60 + 30, 14, 0.8}, {2, 21 * 60 + 30, 14, 0.8},
            {2, 22 * 60 + 15, 10, 0.8}, {3, 21 * 60 + 30, 14, 0.8}, {4, 21 * 60 + 30, 14, 0.8},
            {5, 21 * 60 + 30, 14, 0.8}, {6, 21 * 60 + 30, 14, 0.8},
        };
        profiles.push_back(p);
    }

    // h4: sustained plateaus rather than sharp peaks.
    {
        HouseholdProfile p;
        p.id = "h4";
        p.base_temp = 49.0;
        p.heat_on_threshold = 45.0;
        p.heat_off_threshold = 53.0;
        p.heat_rate = 0.35;
        p.cool_rate = 0.03;
        p.noise_sigma = 0.05;
        p.irregularity = 0.1;
        p.showers = {
            {0, 17 * 60, 45, 0.5}, {1, 17 * 60, 45, 0.5}, {2, 17 * 60, 45, 0.5},
            {3, 17 * 60, 45, 0.5}, {4, 17 * 60, 45, 0.5}, {5, 16 * 60, 60, 0.5},
            {6, 16 * 60, 60, 0.5},
        };
        profiles.push_back(p);
    }

    // h5: fixed daily 07:00 and 20:00 routine, clean sensor, never drifts.
    {
        HouseholdProfile p;
        p.id = "h5";
        p.base_temp = 50.0;
        p.heat_on_threshold = 44.0;
        p.heat_off_threshold = 54.0;
        p.heat_rate = 0.4;
        p.cool_rate = 0.04;
        p.noise_sigma = 0.06;
        p.irregularity = 0.0;
        for (int day = 0; day < 7; ++day) {
            p.showers.push_back({day, 7 * 60, 12, 0.8});
            p.showers.push_back({day, 20 * 60, 12, 0.8});
        }
        profiles.push_back(p);
    }

    // h6: conventional early-evening pattern.
    {
        HouseholdProfile p;
        p.id = "h6";
        p.base_temp = 50.0;
        p.heat_on_threshold = 44.0;
        p.heat_off_threshold = 54.0;
        p.heat_rate = 0.42;
        p.cool_rate = 0.045;
        p.noise_sigma = 0.07;
        p.irregularity = 0.12;
        p.showers = {
            {0, 18 * 60 + 30, 12, 0.8}, {1, 18 * 60 + 30, 12, 0.8}, {2, 18 * 60 + 30, 12, 0.8},
            {3, 18 * 60 + 30, 12, 0.8}, {4, 18 * 60 + 30, 12, 0.8}, {5, 20 * 60, 14, 0.8},
            {6, 18 * 60 + 30, 12, 0.8},
        };
        profiles.push_back(p);
    }

    for (const HouseholdProfile& p : profiles) validate_profile(p);
    return profiles;
}

namespace {

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_num(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("profile key '" + key + "': not a number: '" + value + "'");
    }
}

ShowerSpec parse_shower_line(const std::string& value) {
    std::istringstream in(value);
    int day = -1, hh = -1, mm = -1, duration = 0;
    double drop = 0.0;
    char colon = '\0';
    in >> day >> hh >> colon >> mm >> duration >> drop;
    if (in.fail() || colon != ':' || !(in >> std::ws).eof()) {
        throw std::runtime_error("bad shower line '" + value +
                                 "', expected '<day 0-6> <HH:MM> <duration_min> <drop_rate>'");
    }
    if (hh < 0 || hh > 23 || mm < 0 || mm > 59) {
        throw std::runtime_error("bad shower time in '" + value + "'");
    }
    return {day, hh * 60 + mm, duration, drop};
}

} // namespace

HouseholdProfile parse_profile(const std::string& text) {
    HouseholdProfile p;
    p.showers.clear();
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool has_id = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trimmed(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("profile line " + std::to_string(line_no) +
                                     ": expected 'key = value'");
        }
        const std::string key = trimmed(stripped.substr(0, eq));
        const std::string value = trimmed(stripped.substr(eq + 1));
        if (key == "id") {
            p.id = value;
            has_id = true;
        } else if (key == "base_temp") {
            p.base_temp = parse_num(key, value);
        } else if (key == "heat_on") {
            p.heat_on_threshold = parse_num(key, value);
        } else if (key == "heat_off") {
            p.heat_off_threshold = parse_num(key, value);
        } else if (key == "heat_rate") {
            p.heat_rate = parse_num(key, value);
        } else if (key == "cool_rate") {
            p.cool_rate = parse_num(key, value);
        } else if (key == "noise_sigma") {
            p.noise_sigma = parse_num(key, value);
        } else if (key == "irregularity") {
            p.irregularity = parse_num(key, value);
        } else if (key == "shower") {
            p.showers.push_back(parse_shower_line(value));
        } else {
            throw std::runtime_error("unknown profile key '" + key + "'");
        }
    }
    if (!has_id || p.id.empty()) throw std::runtime_error("profile is missing an id");
    validate_profile(p);
    return p;
}

std::string profile_to_string(const HouseholdProfile& profile) {
    const auto num = [](double v) {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, res.ptr);
    };
    std::string out;
    out += "id = " + profile.id + "\n";
    out += "base_temp = " + num(profile.base_temp) + "\n";
    out += "heat_on = " + num(profile.heat_on_threshold) + "\n";
    out += "heat_off = " + num(profile.heat_off_threshold) + "\n";
    out += "heat_rate = " + num(profile.heat_rate) + "\n";
    out += "cool_rate = " + num(profile.cool_rate) + "\n";
    out += "noise_sigma = " + num(profile.noise_sigma) + "\n";
    out += "irregularity = " + num(profile.irregularity) + "\n";
    for (const ShowerSpec& s : profile.showers) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "shower = %d %02d:%02d %d ", s.day_of_week,
                      s.start_minute_of_day / 60, s.start_minute_of_day % 60, s.duration_min);
        out += buf + num(s.drop_rate) + "\n";
    }
    return out;
}

} // namespace deltaif
