#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "deltaif/eventdetect.hpp"

namespace deltaif {

// 7x24 histogram of event starts; day 0 = Monday. Bins are computed in a
// fixed UTC offset (minutes), default 0.
struct WeeklyCalendar {
    std::string household_id;
    std::int64_t period_start = 0;
    std::int64_t period_end = 0;  // exclusive
    int tz_offset_minutes = 0;
    double contamination = 0.0;
    std::array<std::array<std::uint32_t, 24>, 7> counts{};

    std::uint64_t total() const;
    bool operator==(const WeeklyCalendar&) const = default;
};

// Bins each event once by its start timestamp. Throws if an event falls
// outside [period_start, period_end).
WeeklyCalendar build_calendar(const std::vector<Event>& events, const std::string& household_id,
                              std::int64_t period_start, std::int64_t period_end,
                              int tz_offset_minutes, double contamination);

// 169 lines: "day,hour,count" in (day, hour) order plus header.
std::string calendar_to_csv(const WeeklyCalendar& cal);
std::string calendar_to_json(const WeeklyCalendar& cal);
WeeklyCalendar calendar_from_json(const std::string& text);

struct PeakBin {
    int day = 0;
    int hour = 0;
    std::uint32_t count = 0;
};

// Top-k bins by count, ties broken by ascending (day, hour).
std::vector<PeakBin> peak_bins(const WeeklyCalendar& cal, std::size_t k);

} // namespace deltaif
