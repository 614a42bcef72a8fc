#include "deltaif/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace deltaif {

namespace {

constexpr double kAbsFloor = 1e-9;

void check_lengths(std::span<const double> a, std::span<const double> p) {
    if (a.size() != p.size()) throw std::invalid_argument("metric: length mismatch");
    if (a.empty()) throw std::invalid_argument("metric: empty input");
}

} // namespace

double mape(std::span<const double> actual, std::span<const double> predicted) {
    check_lengths(actual, predicted);
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (std::abs(actual[i]) <= kAbsFloor) {
            throw std::invalid_argument("mape: |actual| below 1e-9 at index " + std::to_string(i));
        }
        sum += std::abs(actual[i] - predicted[i]) / std::abs(actual[i]);
    }
    return sum / static_cast<double>(actual.size());
}

double rmse(std::span<const double> actual, std::span<const double> predicted) {
    check_lengths(actual, predicted);
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double d = actual[i] - predicted[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(actual.size()));
}

double r2(std::span<const double> actual, std::span<const double> predicted) {
    check_lengths(actual, predicted);
    if (actual.size() < 2) throw std::invalid_argument("r2: need at least 2 points");
    double mean = 0.0;
    for (const double a : actual) mean += a;
    mean /= static_cast<double>(actual.size());

    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double r = actual[i] - predicted[i];
        const double c = actual[i] - mean;
        ss_res += r * r;
        ss_tot += c * c;
    }
    if (ss_tot == 0.0) throw std::invalid_argument("r2: constant actual, undefined denominator");
    return 1.0 - ss_res / ss_tot;
}

MetricTriple evaluate_metrics(std::span<const double> actual, std::span<const double> predicted) {
    return {mape(actual, predicted), rmse(actual, predicted), r2(actual, predicted)};
}

} // namespace deltaif
