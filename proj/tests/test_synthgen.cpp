#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "deltaif/synthgen.hpp"
#include "deltaif/timeutil.hpp"

using namespace deltaif;

namespace {
constexpr std::int64_t kMonday = 1672617600;  // 2023-01-02T00:00:00Z
}

TEST_CASE("generation is deterministic for identical arguments") {
    const auto profiles = default_profiles();
    const RegularSeries a = generate_household(profiles[0], kMonday, 3, 99);
    const RegularSeries b = generate_household(profiles[0], kMonday, 3, 99);
    CHECK(a.values == b.values);
    const RegularSeries c = generate_household(profiles[0], kMonday, 3, 100);
    CHECK(a.values != c.values);
}

TEST_CASE("series satisfies the regular grid invariants") {
    const auto profiles = default_profiles();
    const RegularSeries s = generate_household(profiles[4], kMonday, 2, 1);
    CHECK(s.step_seconds == 60);
    CHECK(s.start == kMonday);
    CHECK(s.values.size() == 2 * 1440);
    for (const double v : s.values) CHECK(std::isfinite(v));
}

TEST_CASE("noiseless showerless run settles into the hysteresis band") {
    HouseholdProfile p;
    p.id = "t";
    p.base_temp = 50.0;
    p.heat_on_threshold = 44.0;
    p.heat_off_threshold = 54.0;
    p.heat_rate = 0.4;
    p.cool_rate = 0.04;
    p.noise_sigma = 0.0;
    const RegularSeries s = generate_household(p, kMonday, 3, 5);
    // Skip the first cool-down, then the sawtooth must stay inside the band
    // give or take one step.
    const std::size_t first_cycle = static_cast<std::size_t>((50.0 - 44.0) / 0.04) + 1;
    double lo = 1e9, hi = -1e9;
    for (std::size_t i = first_cycle; i < s.values.size(); ++i) {
        lo = std::min(lo, s.values[i]);
        hi = std::max(hi, s.values[i]);
    }
    CHECK(lo >= p.heat_on_threshold - p.cool_rate - 1e-9);
    CHECK(hi <= p.heat_off_threshold + p.heat_rate + 1e-9);
    // And it keeps cycling rather than flatlining.
    CHECK(hi - lo > 0.8 * (p.heat_off_threshold - p.heat_on_threshold));
}

TEST_CASE("a single shower shows up as a local deficit against the base run") {
    HouseholdProfile base;
    base.id = "t";
    base.base_temp = 50.0;
    base.heat_on_threshold = 30.0;  // far below; heating stays off all day
    base.heat_off_threshold = 55.0;
    base.heat_rate = 0.5;
    base.cool_rate = 0.02;
    base.noise_sigma = 0.0;
    HouseholdProfile with_shower = base;
    with_shower.showers = {{0, 7 * 60, 15, 0.5}};  // Monday 07:00, 15 min

    const RegularSeries plain = generate_household(base, kMonday, 1, 3);
    const RegularSeries shower = generate_household(with_shower, kMonday, 1, 3);

    const std::size_t onset = 7 * 60;
    for (std::size_t i = 0; i <= onset; ++i) {
        CHECK(shower.values[i] == plain.values[i]);
    }
    const std::size_t end = onset + 15;
    CHECK(plain.values[end] - shower.values[end] == doctest::Approx(7.5).epsilon(1e-9));
}

TEST_CASE("every scheduled shower pulls the temperature down") {
    for (HouseholdProfile p : default_profiles()) {
        p.noise_sigma = 0.0;
        p.irregularity = 0.0;
        const int days = 7;
        const RegularSeries s = generate_household(p, kMonday, days, 5);
        const auto onsets = scheduled_shower_onsets(p, kMonday, days);
        CHECK(!onsets.empty());
        for (const std::int64_t t : onsets) {
            const std::size_t idx = static_cast<std::size_t>((t - kMonday) / 60);
            // Recover this onset's duration from the schedule.
            int duration = 0;
            for (const ShowerSpec& spec : p.showers) {
                if (day_of_week(t) == spec.day_of_week &&
                    seconds_into_day(t) == spec.start_minute_of_day * 60) {
                    duration = std::max(duration, spec.duration_min);
                }
            }
            REQUIRE(duration > 0);
            const std::size_t last = idx + static_cast<std::size_t>(duration);
            if (last < s.values.size()) {
                CHECK(s.values[last] < s.values[idx]);
            }
        }
    }
}

TEST_CASE("default_profiles shape") {
    const auto profiles = default_profiles();
    REQUIRE(profiles.size() == 6);
    CHECK(profiles[4].id == "h5");
    CHECK(profiles[4].irregularity == 0.0);
    CHECK(profiles[0].irregularity > profiles[4].irregularity);
    // h5 keeps the fixed 07:00 / 20:00 routine every day.
    int seven = 0, twenty = 0;
    for (const ShowerSpec& s : profiles[4].showers) {
        if (s.start_minute_of_day == 7 * 60) ++seven;
        if (s.start_minute_of_day == 20 * 60) ++twenty;
    }
    CHECK(seven == 7);
    CHECK(twenty == 7);
}

TEST_CASE("profile files round-trip through the flat key-value format") {
    for (const HouseholdProfile& p : default_profiles()) {
        const HouseholdProfile back = parse_profile(profile_to_string(p));
        CHECK(back.id == p.id);
        CHECK(back.base_temp == p.base_temp);
        CHECK(back.heat_on_threshold == p.heat_on_threshold);
        CHECK(back.heat_off_threshold == p.heat_off_threshold);
        CHECK(back.heat_rate == p.heat_rate);
        CHECK(back.cool_rate == p.cool_rate);
        CHECK(back.noise_sigma == p.noise_sigma);
        CHECK(back.irregularity == p.irregularity);
        REQUIRE(back.showers.size() == p.showers.size());
        for (std::size_t i = 0; i < p.showers.size(); ++i) {
            CHECK(back.showers[i].day_of_week == p.showers[i].day_of_week);
            CHECK(back.showers[i].start_minute_of_day == p.showers[i].start_minute_of_day);
            CHECK(back.showers[i].duration_min == p.showers[i].duration_min);
            CHECK(back.showers[i].drop_rate == p.showers[i].drop_rate);
        }
    }
}

TEST_CASE("profile parsing rejects malformed input") {
    const std::string good =
        "# test household\n"
        "id = hx\n"
        "base_temp = 50\n"
        "heat_on = 44\n"
        "heat_off = 54\n"
        "heat_rate = 0.4\n"
        "cool_rate = 0.04\n"
        "noise_sigma = 0.06\n"
        "irregularity = 0.1\n"
        "shower = 2 07:30 12 0.8\n";
    const HouseholdProfile p = parse_profile(good);
    CHECK(p.id == "hx");
    REQUIRE(p.showers.size() == 1);
    CHECK(p.showers[0].day_of_week == 2);
    CHECK(p.showers[0].start_minute_of_day == 7 * 60 + 30);

    CHECK_THROWS_WITH_AS(parse_profile("base_temp = 50\n"), doctest::Contains("missing an id"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_profile("id = x\nwhatever = 1\n"),
                         doctest::Contains("unknown profile key"), std::runtime_error);
    CHECK_THROWS_AS(parse_profile("id = x\nshower = 2 0730 12 0.8\n"), std::runtime_error);
    CHECK_THROWS_AS(parse_profile("id = x\nheat_rate = fast\n"), std::runtime_error);
    CHECK_THROWS_AS(parse_profile("id = x\nshower = 9 07:30 12 0.8\n"), std::invalid_argument);
}

TEST_CASE("invalid profiles are rejected") {
    HouseholdProfile p;
    p.heat_on_threshold = 50.0;
    p.heat_off_threshold = 45.0;
    CHECK_THROWS_AS(generate_household(p, kMonday, 1, 0), std::invalid_argument);
    HouseholdProfile q;
    q.irregularity = 1.5;
    CHECK_THROWS_AS(generate_household(q, kMonday, 1, 0), std::invalid_argument);
    HouseholdProfile r;
    CHECK_THROWS_AS(generate_household(r, kMonday, 0, 0), std::invalid_argument);
}
