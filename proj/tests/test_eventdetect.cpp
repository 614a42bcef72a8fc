#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "deltaif/eventdetect.hpp"
#include "deltaif/rng.hpp"
#include "deltaif/synthgen.hpp"

using namespace deltaif;

namespace {

constexpr std::int64_t kMonday = 1672617600;

Mat cluster_with_outlier(std::size_t n_inliers) {
    Rng rng(88);
    Mat points(n_inliers + 1, 2);
    for (std::size_t i = 0; i < n_inliers; ++i) {
        points.at(i, 0) = rng.uniform(-1.0, 1.0);
        points.at(i, 1) = rng.uniform(-1.0, 1.0);
    }
    points.at(n_inliers, 0) = -50.0;
    points.at(n_inliers, 1) = -50.0;
    return points;
}

// Independent traversal over the public node layout, used to cross-check
// the library's scoring path.
double reference_path_length(const IsolationTree& tree, const double* p) {
    std::size_t node = 0;
    double depth = 0.0;
    while (tree.nodes[node].feature >= 0) {
        const IsoNode& n = tree.nodes[node];
        node = static_cast<std::size_t>(p[n.feature] < n.split ? n.left : n.right);
        depth += 1.0;
    }
    const int leaf = tree.nodes[node].size;
    if (leaf <= 1) return depth;
    if (leaf == 2) return depth + 1.0;
    const double k = leaf - 1.0;
    return depth + 2.0 * (std::log(k) + 0.5772156649) - 2.0 * k / leaf;
}

} // namespace

TEST_CASE("extract_features computes one-step and windowed deltas") {
    RegularSeries s;
    s.start = kMonday;
    s.values = {50, 50, 50, 45, 44};
    const Mat f = extract_features(s, 3);
    REQUIRE(f.rows == 2);
    CHECK(f.at(0, 0) == -5.0);  // index 3: 45 - 50
    CHECK(f.at(0, 1) == -5.0);
    CHECK(f.at(1, 0) == -1.0);  // index 4: 44 - 45
    CHECK(f.at(1, 1) == -6.0);  // 44 - 50

    RegularSeries flat;
    flat.values.assign(10, 7.0);
    const Mat f2 = extract_features(flat, 5);
    CHECK(f2.rows == 5);
    for (const double v : f2.a) CHECK(v == 0.0);

    CHECK_THROWS_AS(extract_features(flat, 10), std::invalid_argument);
}

TEST_CASE("average_path_length matches the closed form") {
    CHECK(average_path_length(0) == 0.0);
    CHECK(average_path_length(1) == 0.0);
    CHECK(average_path_length(2) == 1.0);
    CHECK(average_path_length(256) == doctest::Approx(10.2447709201168516).epsilon(1e-12));
}

TEST_CASE("build_forest shape, determinism and degenerate input") {
    const Mat points = cluster_with_outlier(300);
    EventConfig cfg;
    const IsolationForest forest = build_forest(points, cfg, 5);
    CHECK(forest.trees.size() == 100);
    CHECK(forest.subsample_size == 256);
    CHECK(forest.normalizer == doctest::Approx(average_path_length(256)));

    const IsolationForest again = build_forest(points, cfg, 5);
    for (std::size_t i = 0; i < points.rows; ++i) {
        CHECK(anomaly_score(forest, points.row(i)) == anomaly_score(again, points.row(i)));
    }

    Mat same(5, 2);
    for (double& v : same.a) v = 3.0;
    CHECK_THROWS_AS(build_forest(same, cfg, 1), std::runtime_error);
    CHECK_THROWS_AS(build_forest(Mat(1, 2), cfg, 1), std::invalid_argument);
}

TEST_CASE("tree structure invariants hold") {
    const Mat points = cluster_with_outlier(300);
    EventConfig cfg;
    cfg.n_trees = 10;
    const IsolationForest forest = build_forest(points, cfg, 9);
    const int height_cap = static_cast<int>(std::ceil(std::log2(256.0)));
    for (const IsolationTree& tree : forest.trees) {
        REQUIRE(!tree.nodes.empty());
        // Walk every node, tracking depth.
        std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
        while (!stack.empty()) {
            const auto [id, depth] = stack.back();
            stack.pop_back();
            const IsoNode& n = tree.nodes[id];
            if (n.feature < 0) {
                CHECK(n.size >= 1);
                CHECK(depth <= height_cap);
            } else {
                REQUIRE(n.left >= 0);
                REQUIRE(n.right >= 0);
                stack.push_back({static_cast<std::size_t>(n.left), depth + 1});
                stack.push_back({static_cast<std::size_t>(n.right), depth + 1});
            }
        }
    }
}

TEST_CASE("outlier scores highest and matches an independent traversal") {
    const Mat points = cluster_with_outlier(200);
    EventConfig cfg;
    const IsolationForest forest = build_forest(points, cfg, 77);

    double best = -1.0;
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < points.rows; ++i) {
        const double s = anomaly_score(forest, points.row(i));
        CHECK(s > 0.0);
        CHECK(s < 1.0);
        if (s > best) {
            best = s;
            best_idx = i;
        }
        // Cross-check against the reference traversal. With 201 points the
        // subsample is the whole set, so the normalizer is c(201).
        double sum = 0.0;
        for (const IsolationTree& tree : forest.trees) {
            sum += reference_path_length(tree, points.row(i));
        }
        const double expected =
            std::pow(2.0, -(sum / static_cast<double>(forest.trees.size())) /
                              (2.0 * (std::log(200.0) + 0.5772156649) - 2.0 * 200.0 / 201.0));
        CHECK(s == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK(best_idx == 200);  // the planted outlier

    CHECK(score_from_path(forest.normalizer, forest.normalizer) == doctest::Approx(0.5));
}

TEST_CASE("duplicating an inlier never lifts it above the outlier") {
    EventConfig cfg;
    cfg.n_trees = 50;
    const Mat base = cluster_with_outlier(150);
    Mat bigger(base.rows + 1, 2);
    std::copy(base.a.begin(), base.a.end(), bigger.a.begin());
    bigger.at(base.rows, 0) = base.at(0, 0);  // duplicate inlier 0
    bigger.at(base.rows, 1) = base.at(0, 1);

    for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const IsolationForest f1 = build_forest(base, cfg, seed);
        const IsolationForest f2 = build_forest(bigger, cfg, seed);
        const double out1 = anomaly_score(f1, base.row(150));
        const double in1 = anomaly_score(f1, base.row(0));
        const double out2 = anomaly_score(f2, base.row(150));
        const double in2 = anomaly_score(f2, base.row(0));
        CHECK(in1 < out1);
        CHECK(in2 < out2);
    }
}

TEST_CASE("select_candidates honours the contamination budget") {
    Rng rng(4);
    const std::size_t n = 1000;
    Mat features(n, 2);
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        features.at(i, 0) = rng.uniform(-1, 1);
        features.at(i, 1) = rng.uniform(-1, 1);
        scores[i] = rng.uniform01();
    }
    const auto cand = select_candidates(scores, features, 0.02);
    CHECK(cand.size() <= 20);
    CHECK(std::is_sorted(cand.begin(), cand.end()));
    for (const std::size_t i : cand) CHECK(features.at(i, 1) < 0.0);
}

TEST_CASE("constant predictions produce no events") {
    RegularSeries s;
    s.start = kMonday;
    s.values.assign(2000, 48.0);
    EventConfig cfg;
    CHECK(detect_events(s, cfg, 3).empty());
}

TEST_CASE("planted daily drops come back as one event each") {
    HouseholdProfile p;
    p.id = "t";
    p.base_temp = 50.0;
    p.heat_on_threshold = 44.0;
    p.heat_off_threshold = 54.0;
    p.heat_rate = 0.4;
    p.cool_rate = 0.04;
    p.noise_sigma = 0.0;
    for (int day = 0; day < 7; ++day) p.showers.push_back({day, 7 * 60, 12, 0.8});

    const int days = 3;
    const RegularSeries s = generate_household(p, kMonday, days, 6);
    EventConfig cfg;
    const std::vector<Event> events = detect_events(s, cfg, 6);
    const auto truth = scheduled_shower_onsets(p, kMonday, days);
    REQUIRE(truth.size() == 3);

    // Every planted shower is recovered close to its onset.
    for (const std::int64_t t : truth) {
        bool found = false;
        for (const Event& e : events) {
            if (std::llabs(e.start - t) <= 5 * 60) found = true;
        }
        CHECK(found);
    }

    // Structural event invariants.
    for (std::size_t i = 0; i < events.size(); ++i) {
        CHECK(events[i].peak_drop < 0.0);
        CHECK(events[i].anomaly_score > 0.0);
        CHECK(events[i].anomaly_score < 1.0);
        CHECK(events[i].duration_min >= 1);
        if (i > 0) {
            CHECK(events[i].start >=
                  events[i - 1].start + static_cast<std::int64_t>(events[i - 1].duration_min) * 60);
        }
    }

    const std::vector<Event> again = detect_events(s, cfg, 6);
    REQUIRE(again.size() == events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        CHECK(again[i].start == events[i].start);
        CHECK(again[i].anomaly_score == events[i].anomaly_score);
    }
}

TEST_CASE("events csv has the documented shape") {
    std::vector<Event> events{{kMonday + 7 * 3600, 12, -4.25, 0.75}};
    const std::string csv = events_to_csv(events, "h5");
    CHECK(csv == "household,start_iso8601,duration_min,peak_drop_c,score\n"
                 "h5,2023-01-02T07:00:00Z,12,-4.25,0.75\n");
}
