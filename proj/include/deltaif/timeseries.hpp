#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace deltaif {

struct RawRecord {
    std::int64_t timestamp = 0;  // unix seconds, UTC
    double t_mid = 0.0;          // deg C
};

// Change-triggered sensor recording: irregular timestamps, strictly
// ascending after parsing (duplicates collapse, last value wins).
struct RawSeries {
    std::string household_id;
    std::vector<RawRecord> records;
};

// Gap-free series on a fixed grid: timestamp(i) = start + i * step_seconds.
struct RegularSeries {
    std::string household_id;
    std::int64_t start = 0;
    std::int64_t step_seconds = 60;
    std::vector<double> values;

    std::int64_t timestamp(std::size_t i) const {
        return start + static_cast<std::int64_t>(i) * step_seconds;
    }
    std::int64_t end_time() const { return timestamp(values.empty() ? 0 : values.size() - 1); }
    std::size_t size() const { return values.size(); }
};

enum class OutlierReason { range, rate };

struct OutlierRemoval {
    std::size_t index = 0;
    double value = 0.0;
    OutlierReason reason = OutlierReason::range;
};

struct OutlierReport {
    std::vector<OutlierRemoval> removed;
};

struct OutlierConfig {
    double range_min = 5.0;    // deg C, domestic tank physical bounds
    double range_max = 95.0;
    double rate_limit = 20.0;  // deg C per minute
};

// CSV with header "timestamp,t_mid", ISO-8601 UTC timestamps. Rows are
// sorted and deduplicated (last value wins). Throws std::runtime_error with
// the offending 1-based line number on bad rows, and on an empty body.
RawSeries parse_series(const std::string& text, const std::string& household_id);

// Uniform grid from the first observation rounded up to a whole step through
// the last observation rounded up likewise; each grid value is the last raw
// observation at or before that grid time.
RegularSeries forward_fill_resample(const RawSeries& raw, std::int64_t step_seconds);

// Drops values outside [range_min, range_max] or moving faster than
// rate_limit deg C/min against the previous kept value, then refills the
// holes by forward fill (the leading edge takes the first kept value).
// Output keeps the input grid and length.
std::pair<RegularSeries, OutlierReport> remove_outliers(const RegularSeries& series,
                                                        const OutlierConfig& cfg);

// train = points strictly before split_time, test = points at/after.
// Throws unless both halves are non-empty.
std::pair<RegularSeries, RegularSeries> split_train_test(const RegularSeries& series,
                                                         std::int64_t split_time);

std::string to_csv(const RegularSeries& series);

} // namespace deltaif
