#pragma once

#include <cstdint>
#include <vector>

#include "deltaif/linalg.hpp"
#include "deltaif/timeseries.hpp"

namespace deltaif {

struct EventConfig {
    double contamination = 0.02;  // assumed anomalous fraction of minutes
    int delta_window = 5;         // minutes for the windowed delta feature
    int refractory = 30;          // minutes; nearby events merge into one
    int n_trees = 100;
    int subsample = 256;
};

void validate_event_config(const EventConfig& cfg);

// Flat node pool; feature < 0 marks a leaf holding `size` points.
struct IsoNode {
    int feature = -1;
    double split = 0.0;
    int left = -1;
    int right = -1;
    int size = 0;
};

struct IsolationTree {
    std::vector<IsoNode> nodes;  // node 0 is the root
};

struct IsolationForest {
    std::vector<IsolationTree> trees;
    int subsample_size = 0;   // psi
    double normalizer = 0.0;  // c(psi)
};

// Average unsuccessful-search path length of a binary tree of n points:
// c(n) = 2*H(n-1) - 2*(n-1)/n with H(k) = ln(k) + 0.5772156649.
double average_path_length(std::size_t n);

// Per-minute drop features for minute t (t >= delta_window):
// [ v(t)-v(t-1), v(t)-v(t-delta_window) ]. Row i describes series index
// i + delta_window.
Mat extract_features(const RegularSeries& predicted, int delta_window);

// n_trees trees, each grown on a seeded subsample of size min(psi, N)
// drawn without replacement, height-capped at ceil(log2 psi).
IsolationForest build_forest(const Mat& features, const EventConfig& cfg, std::uint64_t seed);

double path_length(const IsolationTree& tree, const double* point);
double anomaly_score(const IsolationForest& forest, const double* point);
// score = 2^(-avg_path / c(psi))
double score_from_path(double avg_path, double normalizer);
std::vector<double> score_all(const IsolationForest& forest, const Mat& features);

struct Event {
    std::int64_t start = 0;    // unix seconds
    int duration_min = 0;
    double peak_drop = 0.0;    // most negative windowed delta, deg C
    double anomaly_score = 0.0;
};

// Keeps the floor(contamination*N) highest-scoring feature rows (ties
// resolved by earlier timestamp) whose windowed delta is negative. Returns
// sorted feature indices.
std::vector<std::size_t> select_candidates(const std::vector<double>& scores,
                                           const Mat& features, double contamination);

// Scores every minute, selects candidates as above, merges adjacent minutes
// and then events closer than the refractory gap.
std::vector<Event> detect_events(const RegularSeries& predicted, const EventConfig& cfg,
                                 std::uint64_t seed);

std::string events_to_csv(const std::vector<Event>& events, const std::string& household_id);

} // namespace deltaif
