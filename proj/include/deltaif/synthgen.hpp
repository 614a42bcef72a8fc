#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deltaif/timeseries.hpp"

namespace deltaif {

struct ShowerSpec {
    int day_of_week = 0;          // 0 = Monday .. 6 = Sunday
    int start_minute_of_day = 0;  // 0..1439
    int duration_min = 15;
    double drop_rate = 0.5;       // deg C per minute while the tap is open
};

// One synthetic household: a hysteresis-controlled tank plus a weekly
// shower schedule. irregularity is the per-occurrence probability that a
// scheduled shower is disturbed (shifted by up to +/-3 h, or skipped).
struct HouseholdProfile {
    std::string id;
    double base_temp = 50.0;
    double heat_on_threshold = 44.0;   // heater engages at or below this
    double heat_off_threshold = 54.0;  // heater releases at or above this
    double heat_rate = 0.4;            // deg C per minute
    double cool_rate = 0.04;
    std::vector<ShowerSpec> showers;
    double noise_sigma = 0.05;         // observation noise, deg C
    double irregularity = 0.0;         // in [0, 1]
};

// Deterministic 1-minute series of length days*1440 starting at `start`.
// One splitmix64 stream seeded with `seed` drives everything, consumed in a
// fixed order: three draws per scheduled shower occurrence (disturb?, skip?,
// offset), then one gaussian per minute when noise_sigma > 0.
RegularSeries generate_household(const HouseholdProfile& profile, std::int64_t start,
                                 int days, std::uint64_t seed);

// Undisturbed shower onsets inside [start, start + days*1440 min); ground
// truth for detector tests when irregularity is zero.
std::vector<std::int64_t> scheduled_shower_onsets(const HouseholdProfile& profile,
                                                  std::int64_t start, int days);

// Six households spanning the behaviours the pipeline has to cope with:
// 1 erratic, 2 weekend-heavy, 3 late-evening, 4 sustained plateaus,
// 5 fixed daily 07:00/20:00, 6 early-evening.
std::vector<HouseholdProfile> default_profiles();

void validate_profile(const HouseholdProfile& profile);

// Flat key-value profile text: one `key = value` per line, `#` comments.
// Keys: id, base_temp, heat_on, heat_off, heat_rate, cool_rate,
// noise_sigma, irregularity, and a repeatable
//   shower = <day 0-6> <HH:MM> <duration_min> <drop_rate>
// line per scheduled shower. Unknown keys are rejected.
HouseholdProfile parse_profile(const std::string& text);
std::string profile_to_string(const HouseholdProfile& profile);

} // namespace deltaif
