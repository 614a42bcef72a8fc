#include "deltaif/calendar.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

#include "deltaif/timeutil.hpp"

namespace deltaif {

std::uint64_t WeeklyCalendar::total() const {
    std::uint64_t sum = 0;
    for (const auto& day : counts) {
        for (const std::uint32_t c : day) sum += c;
    }
    return sum;
}

WeeklyCalendar build_calendar(const std::vector<Event>& events, const std::string& household_id,
                              std::int64_t period_start, std::int64_t period_end,
                              int tz_offset_minutes, double contamination) {
    if (period_end <= period_start) {
        throw std::invalid_argument("build_calendar: empty period");
    }
    WeeklyCalendar cal;
    cal.household_id = household_id;
    cal.period_start = period_start;
    cal.period_end = period_end;
    cal.tz_offset_minutes = tz_offset_minutes;
    cal.contamination = contamination;

    for (const Event& e : events) {
        if (e.start < period_start || e.start >= period_end) {
            throw std::invalid_argument("build_calendar: event at " + format_iso8601(e.start) +
                                        " outside period");
        }
        const std::int64_t local = e.start + static_cast<std::int64_t>(tz_offset_minutes) * 60;
        cal.counts[static_cast<std::size_t>(day_of_week(local))]
                  [static_cast<std::size_t>(hour_of_day(local))] += 1;
    }
    return cal;
}

std::string calendar_to_csv(const WeeklyCalendar& cal) {
    std::string out = "day,hour,count\n";
    for (int d = 0; d < 7; ++d) {
        for (int h = 0; h < 24; ++h) {
            out += std::to_string(d);
            out += ',';
            out += std::to_string(h);
            out += ',';
            out += std::to_string(cal.counts[static_cast<std::size_t>(d)][static_cast<std::size_t>(h)]);
            out += '\n';
        }
    }
    return out;
}

std::string calendar_to_json(const WeeklyCalendar& cal) {
    nlohmann::json j;
    j["household"] = cal.household_id;
    j["period_start"] = format_iso8601(cal.period_start);
    j["period_end"] = format_iso8601(cal.period_end);
    j["tz_offset_minutes"] = cal.tz_offset_minutes;
    j["contamination"] = cal.contamination;
    j["day0"] = "monday";
    std::vector<std::vector<std::uint32_t>> rows;
    for (const auto& day : cal.counts) rows.emplace_back(day.begin(), day.end());
    j["counts"] = rows;
    return j.dump(2) + "\n";
}

WeeklyCalendar calendar_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("calendar: parse failure: ") + e.what());
    }
    WeeklyCalendar cal;
    cal.household_id = j.at("household").get<std::string>();
    cal.period_start = parse_iso8601(j.at("period_start").get<std::string>());
    cal.period_end = parse_iso8601(j.at("period_end").get<std::string>());
    cal.tz_offset_minutes = j.at("tz_offset_minutes").get<int>();
    cal.contamination = j.at("contamination").get<double>();
    const auto rows = j.at("counts").get<std::vector<std::vector<std::uint32_t>>>();
    if (rows.size() != 7) throw std::runtime_error("calendar: expected 7 day rows");
    for (std::size_t d = 0; d < 7; ++d) {
        if (rows[d].size() != 24) throw std::runtime_error("calendar: expected 24 hour bins");
        std::copy(rows[d].begin(), rows[d].end(), cal.counts[d].begin());
    }
    return cal;
}

std::vector<PeakBin> peak_bins(const WeeklyCalendar& cal, std::size_t k) {
    if (k < 1) throw std::invalid_argument("peak_bins: k must be >= 1");
    std::vector<PeakBin> bins;
    bins.reserve(7 * 24);
    for (int d = 0; d < 7; ++d) {
        for (int h = 0; h < 24; ++h) {
            bins.push_back({d, h, cal.counts[static_cast<std::size_t>(d)][static_cast<std::size_t>(h)]});
        }
    }
    std::stable_sort(bins.begin(), bins.end(), [](const PeakBin& a, const PeakBin& b) {
        return a.count > b.count;  // stable keeps (day, hour) order among ties
    });
    bins.resize(std::min(k, bins.size()));
    return bins;
}

} // namespace deltaif
