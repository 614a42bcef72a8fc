#pragma once

#include <span>

namespace deltaif {

// MAPE is a ratio, not a percentage.
struct MetricTriple {
    double mape = 0.0;
    double rmse = 0.0;
    double r2 = 0.0;
};

double mape(std::span<const double> actual, std::span<const double> predicted);
double rmse(std::span<const double> actual, std::span<const double> predicted);
double r2(std::span<const double> actual, std::span<const double> predicted);

MetricTriple evaluate_metrics(std::span<const double> actual, std::span<const double> predicted);

} // namespace deltaif
