#pragma once

#include <cstdint>
#include <string>

namespace deltaif {

// Civil/unix conversions, UTC only. Day 0 of the week is Monday throughout.

std::int64_t days_from_civil(int y, unsigned m, unsigned d);
void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d);

// Strict "YYYY-MM-DDTHH:MM:SSZ". Throws std::invalid_argument on anything else.
std::int64_t parse_iso8601(const std::string& s);
std::string format_iso8601(std::int64_t t);

int day_of_week(std::int64_t t);             // 0 = Monday .. 6 = Sunday
int hour_of_day(std::int64_t t);
std::int64_t seconds_into_day(std::int64_t t);
std::int64_t seconds_into_week(std::int64_t t);  // week anchored at Monday 00:00

} // namespace deltaif
