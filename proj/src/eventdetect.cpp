#include "deltaif/eventdetect.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "deltaif/rng.hpp"
#include "deltaif/timeutil.hpp"

namespace deltaif {

namespace {

constexpr double kEulerMascheroni = 0.5772156649;

struct TreeBuilder {
    const Mat& points;
    Rng& rng;
    int max_depth;
    IsolationTree tree;

    int build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi, int depth) {
        const std::size_t n = hi - lo;
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});

        if (n <= 1 || depth >= max_depth) {
            tree.nodes[node_id].size = static_cast<int>(n);
            return node_id;
        }

        // Per-feature bounds over this node's points.
        const std::size_t dim = points.cols;
        std::vector<double> fmin(dim), fmax(dim);
        for (std::size_t f = 0; f < dim; ++f) {
            fmin[f] = fmax[f] = points.at(idx[lo], f);
        }
        for (std::size_t i = lo + 1; i < hi; ++i) {
            const double* row = points.row(idx[i]);
            for (std::size_t f = 0; f < dim; ++f) {
                fmin[f] = std::min(fmin[f], row[f]);
                fmax[f] = std::max(fmax[f], row[f]);
            }
        }
        std::vector<std::size_t> usable;
        for (std::size_t f = 0; f < dim; ++f) {
            if (fmax[f] > fmin[f]) usable.push_back(f);
        }
        if (usable.empty()) {  // all points identical here
            tree.nodes[node_id].size = static_cast<int>(n);
            return node_id;
        }

        const std::size_t f = usable[rng.below(usable.size())];
        double split = fmin[f] + rng.uniform01() * (fmax[f] - fmin[f]);
        if (split <= fmin[f]) {
            // uniform01 can return 0; nudge the split strictly inside.
            split = std::nextafter(fmin[f], fmax[f]);
        }

        auto mid_it = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                     idx.begin() + static_cast<std::ptrdiff_t>(hi),
                                     [&](std::size_t p) { return points.at(p, f) < split; });
        const std::size_t mid = static_cast<std::size_t>(mid_it - idx.begin());

        tree.nodes[node_id].feature = static_cast<int>(f);
        tree.nodes[node_id].split = split;
        const int left = build(idx, lo, mid, depth + 1);
        const int right = build(idx, mid, hi, depth + 1);
        tree.nodes[node_id].left = left;
        tree.nodes[node_id].right = right;
        return node_id;
    }
};

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace

void validate_event_config(const EventConfig& cfg) {
    if (cfg.contamination <= 0.0 || cfg.contamination >= 1.0) {
        throw std::invalid_argument("event config: contamination must be in (0,1)");
    }
    if (cfg.delta_window < 1 || cfg.refractory < 0 || cfg.n_trees < 1 || cfg.subsample < 2) {
        throw std::invalid_argument("event config: bad field");
    }
}

double average_path_length(std::size_t n) {
    if (n <= 1) return 0.0;
    if (n == 2) return 1.0;
    const double k = static_cast<double>(n - 1);
    return 2.0 * (std::log(k) + kEulerMascheroni) - 2.0 * k / static_cast<double>(n);
}

Mat extract_features(const RegularSeries& predicted, int delta_window) {
    if (delta_window < 1) throw std::invalid_argument("extract_features: delta_window must be >= 1");
    if (predicted.size() <= static_cast<std::size_t>(delta_window)) {
        throw std::invalid_argument("extract_features: series shorter than delta_window");
    }
    const std::size_t w = static_cast<std::size_t>(delta_window);
    Mat out(predicted.size() - w, 2);
    for (std::size_t i = 0; i < out.rows; ++i) {
        const std::size_t t = i + w;
        out.at(i, 0) = predicted.values[t] - predicted.values[t - 1];
        out.at(i, 1) = predicted.values[t] - predicted.values[t - w];
    }
    return out;
}

IsolationForest build_forest(const Mat& features, const EventConfig& cfg, std::uint64_t seed) {
    validate_event_config(cfg);
    if (features.rows < 2) throw std::invalid_argument("build_forest: need at least 2 points");

    bool distinct = false;
    for (std::size_t i = 1; i < features.rows && !distinct; ++i) {
        for (std::size_t f = 0; f < features.cols; ++f) {
            if (features.at(i, f) != features.at(0, f)) {
                distinct = true;
                break;
            }
        }
    }
    if (!distinct) throw std::runtime_error("build_forest: all points identical, no valid split");

    IsolationForest forest;
    const std::size_t psi =
        std::min(static_cast<std::size_t>(cfg.subsample), features.rows);
    forest.subsample_size = static_cast<int>(psi);
    forest.normalizer = average_path_length(psi);
    const int max_depth = static_cast<int>(std::ceil(std::log2(static_cast<double>(psi))));

    Rng rng(seed);
    std::vector<std::size_t> pool(features.rows);
    std::iota(pool.begin(), pool.end(), 0);
    forest.trees.reserve(static_cast<std::size_t>(cfg.n_trees));
    for (int k = 0; k < cfg.n_trees; ++k) {
        // Partial Fisher-Yates: the first psi entries become the subsample.
        for (std::size_t i = 0; i < psi; ++i) {
            const std::size_t j = i + rng.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
        }
        std::vector<std::size_t> sample(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(psi));
        TreeBuilder builder{features, rng, max_depth, {}};
        builder.build(sample, 0, sample.size(), 0);
        forest.trees.push_back(std::move(builder.tree));
    }
    return forest;
}

double path_length(const IsolationTree& tree, const double* point) {
    int node = 0;
    double depth = 0.0;
    while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const IsoNode& n = tree.nodes[static_cast<std::size_t>(node)];
        node = point[n.feature] < n.split ? n.left : n.right;
        depth += 1.0;
    }
    return depth + average_path_length(
                       static_cast<std::size_t>(tree.nodes[static_cast<std::size_t>(node)].size));
}

double score_from_path(double avg_path, double normalizer) {
    return std::pow(2.0, -avg_path / normalizer);
}

double anomaly_score(const IsolationForest& forest, const double* point) {
    double sum = 0.0;
    for (const IsolationTree& tree : forest.trees) sum += path_length(tree, point);
    return score_from_path(sum / static_cast<double>(forest.trees.size()), forest.normalizer);
}

std::vector<double> score_all(const IsolationForest& forest, const Mat& features) {
    std::vector<double> scores(features.rows);
    for (std::size_t i = 0; i < features.rows; ++i) {
        scores[i] = anomaly_score(forest, features.row(i));
    }
    return scores;
}

std::vector<std::size_t> select_candidates(const std::vector<double>& scores,
                                           const Mat& features, double contamination) {
    if (scores.size() != features.rows) {
        throw std::invalid_argument("select_candidates: scores/features size mismatch");
    }
    // Exact empirical quantile: keep the floor(contamination*N) highest
    // scores, earlier minutes winning ties.
    const std::size_t budget =
        static_cast<std::size_t>(contamination * static_cast<double>(scores.size()));
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    order.resize(std::min(budget, order.size()));

    std::vector<std::size_t> candidates;
    for (const std::size_t i : order) {
        if (features.at(i, 1) < 0.0) candidates.push_back(i);
    }
    std::sort(candidates.begin(), candidates.end());
    return candidates;
}

std::vector<Event> detect_events(const RegularSeries& predicted, const EventConfig& cfg,
                                 std::uint64_t seed) {
    validate_event_config(cfg);
    const Mat features = extract_features(predicted, cfg.delta_window);

    // A flat series has no drops at all; nothing to detect.
    bool distinct = false;
    for (std::size_t i = 1; i < features.rows && !distinct; ++i) {
        distinct = features.at(i, 0) != features.at(0, 0) || features.at(i, 1) != features.at(0, 1);
    }
    if (!distinct) return {};

    const IsolationForest forest = build_forest(features, cfg, seed);
    const std::vector<double> scores = score_all(forest, features);
    const std::vector<std::size_t> candidates = select_candidates(scores, features, cfg.contamination);
    if (candidates.empty()) return {};

    const std::int64_t step = predicted.step_seconds;
    const auto minute_of = [&](std::size_t feat_idx) {
        return static_cast<std::int64_t>(feat_idx) + cfg.delta_window;
    };

    struct Run {
        std::size_t first, last;  // feature indices, inclusive
        double peak;
        double score;
    };
    std::vector<Run> runs;
    for (const std::size_t i : candidates) {
        if (!runs.empty() &&
            minute_of(i) - minute_of(runs.back().last) <= 1) {
            runs.back().last = i;
            runs.back().peak = std::min(runs.back().peak, features.at(i, 1));
            runs.back().score = std::max(runs.back().score, scores[i]);
        } else {
            runs.push_back({i, i, features.at(i, 1), scores[i]});
        }
    }
    // Merge runs separated by less than the refractory gap.
    std::vector<Run> merged;
    for (const Run& r : runs) {
        if (!merged.empty() &&
            minute_of(r.first) - minute_of(merged.back().last) < cfg.refractory) {
            merged.back().last = r.last;
            merged.back().peak = std::min(merged.back().peak, r.peak);
            merged.back().score = std::max(merged.back().score, r.score);
        } else {
            merged.push_back(r);
        }
    }

    std::vector<Event> events;
    events.reserve(merged.size());
    for (const Run& r : merged) {
        Event e;
        e.start = predicted.start + minute_of(r.first) * step;
        e.duration_min = static_cast<int>(minute_of(r.last) - minute_of(r.first)) + 1;
        e.peak_drop = r.peak;
        e.anomaly_score = r.score;
        events.push_back(e);
    }
    return events;
}

std::string events_to_csv(const std::vector<Event>& events, const std::string& household_id) {
    std::string out = "household,start_iso8601,duration_min,peak_drop_c,score\n";
    for (const Event& e : events) {
        out += household_id;
        out += ',';
        out += format_iso8601(e.start);
        out += ',';
        out += std::to_string(e.duration_min);
        out += ',';
        out += format_double(e.peak_drop);
        out += ',';
        out += format_double(e.anomaly_score);
        out += '\n';
    }
    return out;
}

} // namespace deltaif
