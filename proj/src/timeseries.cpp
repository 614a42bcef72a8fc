#include "deltaif/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "deltaif/timeutil.hpp"

namespace deltaif {

namespace {

std::string format_value(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_value(const std::string& field, std::size_t line_no) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last) {
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": unparseable t_mid value '" + field + "'");
    }
    if (!std::isfinite(v)) {
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": non-finite t_mid value '" + field + "'");
    }
    return v;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

std::int64_t ceil_to_step(std::int64_t t, std::int64_t step) {
    const std::int64_t q = t / step;
    const std::int64_t r = t % step;
    // Timestamps here are non-negative in practice; handle negatives anyway.
    if (r == 0) return t;
    return (t > 0 ? q + 1 : q) * step;
}

} // namespace

RawSeries parse_series(const std::string& text, const std::string& household_id) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("empty input: missing header");
    }
    if (strip_cr(line) != "timestamp,t_mid") {
        throw std::runtime_error("bad header, expected 'timestamp,t_mid'");
    }

    RawSeries out;
    out.household_id = household_id;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": missing comma");
        }
        std::int64_t ts;
        try {
            ts = parse_iso8601(line.substr(0, comma));
        } catch (const std::exception& e) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
        }
        out.records.push_back({ts, parse_value(line.substr(comma + 1), line_no)});
    }
    if (out.records.empty()) {
        throw std::runtime_error("empty input: no data rows");
    }

    // Stable sort keeps input order among equal timestamps, then the last of
    // each run wins.
    std::stable_sort(out.records.begin(), out.records.end(),
                     [](const RawRecord& a, const RawRecord& b) { return a.timestamp < b.timestamp; });
    std::vector<RawRecord> dedup;
    dedup.reserve(out.records.size());
    for (const RawRecord& r : out.records) {
        if (!dedup.empty() && dedup.back().timestamp == r.timestamp) {
            dedup.back() = r;
        } else {
            dedup.push_back(r);
        }
    }
    out.records = std::move(dedup);
    return out;
}

RegularSeries forward_fill_resample(const RawSeries& raw, std::int64_t step_seconds) {
    if (raw.records.empty()) throw std::invalid_argument("forward_fill_resample: empty input");
    if (step_seconds <= 0) throw std::invalid_argument("forward_fill_resample: step must be positive");

    const std::int64_t first = raw.records.front().timestamp;
    const std::int64_t last = raw.records.back().timestamp;
    const std::int64_t grid_start = ceil_to_step(first, step_seconds);
    const std::int64_t grid_end = ceil_to_step(last, step_seconds);

    RegularSeries out;
    out.household_id = raw.household_id;
    out.start = grid_start;
    out.step_seconds = step_seconds;
    const std::size_t n = static_cast<std::size_t>((grid_end - grid_start) / step_seconds) + 1;
    out.values.reserve(n);

    std::size_t k = 0;
    double current = raw.records.front().t_mid;
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t t = grid_start + static_cast<std::int64_t>(i) * step_seconds;
        while (k < raw.records.size() && raw.records[k].timestamp <= t) {
            current = raw.records[k].t_mid;
            ++k;
        }
        out.values.push_back(current);
    }
    return out;
}

std::pair<RegularSeries, OutlierReport> remove_outliers(const RegularSeries& series,
                                                        const OutlierConfig& cfg) {
    if (series.values.empty()) throw std::invalid_argument("remove_outliers: empty series");

    const double step_limit = cfg.rate_limit * static_cast<double>(series.step_seconds) / 60.0;
    OutlierReport report;
    std::vector<double> kept(series.values.size());
    bool have_prev = false;
    double prev = 0.0;
    std::size_t first_kept = 0;

    for (std::size_t i = 0; i < series.values.size(); ++i) {
        const double v = series.values[i];
        OutlierReason reason{};
        bool bad = false;
        if (v < cfg.range_min || v > cfg.range_max) {
            reason = OutlierReason::range;
            bad = true;
        } else if (have_prev && std::abs(v - prev) > step_limit) {
            reason = OutlierReason::rate;
            bad = true;
        }
        if (bad) {
            report.removed.push_back({i, v, reason});
            if (have_prev) kept[i] = prev;  // leading holes are patched below
        } else {
            if (!have_prev) first_kept = i;
            kept[i] = v;
            prev = v;
            have_prev = true;
        }
    }
    if (!have_prev) {
        throw std::runtime_error("remove_outliers: every value removed, series unusable");
    }
    for (std::size_t i = 0; i < first_kept; ++i) kept[i] = kept[first_kept];

    RegularSeries out = series;
    out.values = std::move(kept);
    return {std::move(out), std::move(report)};
}

std::pair<RegularSeries, RegularSeries> split_train_test(const RegularSeries& series,
                                                         std::int64_t split_time) {
    if (series.values.empty()) throw std::invalid_argument("split_train_test: empty series");
    if (split_time <= series.start || split_time > series.end_time()) {
        throw std::invalid_argument("split_train_test: split_time outside series span");
    }

    // First index at or after split_time.
    const std::int64_t offset = split_time - series.start;
    std::size_t idx = static_cast<std::size_t>((offset + series.step_seconds - 1) / series.step_seconds);

    RegularSeries train = series;
    train.values.assign(series.values.begin(), series.values.begin() + static_cast<std::ptrdiff_t>(idx));
    RegularSeries test = series;
    test.start = series.timestamp(idx);
    test.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(idx), series.values.end());
    return {std::move(train), std::move(test)};
}

std::string to_csv(const RegularSeries& series) {
    std::string out = "timestamp,t_mid\n";
    for (std::size_t i = 0; i < series.values.size(); ++i) {
        out += format_iso8601(series.timestamp(i));
        out += ',';
        out += format_value(series.values[i]);
        out += '\n';
    }
    return out;
}

} // namespace deltaif
