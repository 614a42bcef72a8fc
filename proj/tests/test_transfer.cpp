#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "deltaif/rng.hpp"
#include "deltaif/synthgen.hpp"
#include "deltaif/transfer.hpp"

using namespace deltaif;

namespace {

constexpr std::int64_t kMonday = 1672617600;

LstmConfig tiny_config() {
    LstmConfig cfg;
    cfg.units = 4;
    cfg.lookback = 12;
    cfg.epochs = 2;
    cfg.batch_size = 64;
    cfg.learning_rate = 0.01;
    cfg.fine_tune_epochs = 1;
    cfg.seed = 7;
    return cfg;
}

HouseholdData make_household(std::size_t profile_idx, std::uint64_t seed) {
    const auto profiles = default_profiles();
    const RegularSeries s = generate_household(profiles[profile_idx], kMonday, 2, seed);
    const auto [train, test] = split_train_test(s, kMonday + 86400);
    return {profiles[profile_idx].id, train, test};
}

TransferMatrix matrix_from_cells(const std::vector<std::string>& ids,
                                 const std::vector<std::vector<MetricTriple>>& triples) {
    TransferMatrix m;
    m.households = ids;
    m.cells.assign(ids.size(), std::vector<MatrixCell>(ids.size()));
    for (std::size_t s = 0; s < ids.size(); ++s) {
        for (std::size_t t = 0; t < ids.size(); ++t) m.cells[s][t].metrics = triples[s][t];
    }
    return m;
}

// Straight re-ranking of the selection rule, kept separate from the library.
std::string select_reference(const TransferMatrix& m) {
    const std::size_t n = m.households.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    const auto mean_of = [&](std::size_t s, bool use_mape) {
        double sum = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            sum += use_mape ? m.cells[s][t].metrics.mape : m.cells[s][t].metrics.rmse;
        }
        return sum / static_cast<double>(n);
    };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (mean_of(a, false) != mean_of(b, false)) return mean_of(a, false) < mean_of(b, false);
        if (mean_of(a, true) != mean_of(b, true)) return mean_of(a, true) < mean_of(b, true);
        return m.households[a] < m.households[b];
    });
    return m.households[order[0]];
}

} // namespace

TEST_CASE("select_source dominance and tiebreaks") {
    const MetricTriple low{0.01, 0.5, 0.99};
    const MetricTriple high{0.02, 1.5, 0.9};
    CHECK(select_source(matrix_from_cells({"a", "b"}, {{low, low}, {high, high}})) == "a");
    CHECK(select_source(matrix_from_cells({"a", "b"}, {{high, high}, {low, low}})) == "b");

    // Equal mean RMSE: the lower mean MAPE wins.
    const MetricTriple m1{0.03, 1.0, 0.9};
    const MetricTriple m2{0.01, 1.0, 0.9};
    CHECK(select_source(matrix_from_cells({"a", "b"}, {{m1, m1}, {m2, m2}})) == "b");

    // Full tie: lexicographic household id.
    CHECK(select_source(matrix_from_cells({"b", "a"}, {{m1, m1}, {m1, m1}})) == "a");

    CHECK_THROWS_AS(select_source(TransferMatrix{}), std::invalid_argument);
}

TEST_CASE("select_source agrees with a brute-force re-ranking") {
    Rng rng(64);
    for (int round = 0; round < 60; ++round) {
        std::vector<std::string> ids{"h1", "h2", "h3", "h4", "h5", "h6"};
        std::vector<std::vector<MetricTriple>> cells(6, std::vector<MetricTriple>(6));
        for (auto& row : cells) {
            for (auto& c : row) {
                // Coarse grid so ties actually happen.
                c.rmse = 0.2 * static_cast<double>(rng.below(6));
                c.mape = 0.01 * static_cast<double>(rng.below(4));
                c.r2 = rng.uniform01();
            }
        }
        const TransferMatrix m = matrix_from_cells(ids, cells);
        CHECK(select_source(m) == select_reference(m));
    }
}

TEST_CASE("epoch unit accounting") {
    CHECK(epoch_unit_saving(50, 10, 6) == doctest::Approx(1.0 - 100.0 / 300.0).epsilon(1e-12));
    CHECK(epoch_unit_saving(50, 50, 6) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pretrain honours the configured epoch budget") {
    const HouseholdData h = make_household(4, 21);
    const LstmConfig cfg = tiny_config();
    TrainHistory hist;
    double seconds = -1.0;
    const LstmModel model = pretrain(h, cfg, &hist, &seconds);
    CHECK(model.config.epochs == cfg.epochs);
    CHECK(hist.train_mae.size() == static_cast<std::size_t>(cfg.epochs));
    CHECK(seconds > 0.0);

    const LstmModel again = pretrain(h, cfg);
    for (std::size_t i = 0; i < model.params.count(); ++i) {
        CHECK(model.params.flat(i) == again.params.flat(i));
    }
}

TEST_CASE("fine_tune starts from the base parameters and refits the scaler") {
    const HouseholdData source = make_household(4, 21);
    const HouseholdData target = make_household(2, 22);
    LstmConfig cfg = tiny_config();
    const LstmModel base = pretrain(source, cfg);

    // Zero fine-tune epochs: parameters must equal the base exactly while
    // the scaler now reflects the target's training data.
    LstmConfig frozen = cfg;
    frozen.fine_tune_epochs = 0;
    const LstmModel untouched = fine_tune(base, target, frozen, 99);
    for (std::size_t i = 0; i < base.params.count(); ++i) {
        CHECK(untouched.params.flat(i) == base.params.flat(i));
    }
    CHECK(untouched.scaler.min[0] != base.scaler.min[0]);

    TrainHistory hist;
    const LstmModel tuned = fine_tune(base, target, cfg, 99, &hist);
    CHECK(hist.train_mae.size() == static_cast<std::size_t>(cfg.fine_tune_epochs));
    const MetricTriple triple = evaluate_on(tuned, target.test);
    CHECK(std::isfinite(triple.rmse));
}

TEST_CASE("run_transfer_matrix populates every cell and is reproducible per job") {
    const std::vector<HouseholdData> households{make_household(4, 21), make_household(2, 22),
                                                make_household(5, 23)};
    const LstmConfig cfg = tiny_config();
    const auto [matrix, timing] = run_transfer_matrix(households, cfg);

    REQUIRE(matrix.households.size() == 3);
    for (std::size_t s = 0; s < 3; ++s) {
        for (std::size_t t = 0; t < 3; ++t) {
            CHECK(matrix.cells[s][t].epochs == (s == t ? cfg.epochs : cfg.fine_tune_epochs));
            CHECK(std::isfinite(matrix.cells[s][t].metrics.rmse));
            CHECK(matrix.cells[s][t].seconds > 0.0);
        }
    }

    // A single off-diagonal job rerun in isolation lands on the same metrics.
    const LstmModel base = pretrain(households[0], cfg);
    const LstmModel tuned = fine_tune(base, households[2], cfg, cfg.seed + 2);
    const MetricTriple cell = evaluate_on(tuned, households[2].test);
    CHECK(cell.rmse == matrix.cells[0][2].metrics.rmse);
    CHECK(cell.mape == matrix.cells[0][2].metrics.mape);
    CHECK(cell.r2 == matrix.cells[0][2].metrics.r2);

    // Timing bookkeeping.
    CHECK(timing.from_scratch_seconds.size() == 3);
    CHECK(timing.epoch_unit_saving ==
          doctest::Approx(epoch_unit_saving(cfg.epochs, cfg.fine_tune_epochs, 3)));
    CHECK(timing.source_id == select_source(matrix));

    // Parallel execution reaches identical metrics.
    MatrixOptions par;
    par.jobs = 2;
    const auto [matrix2, timing2] = run_transfer_matrix(households, cfg, par);
    for (std::size_t s = 0; s < 3; ++s) {
        for (std::size_t t = 0; t < 3; ++t) {
            CHECK(matrix2.cells[s][t].metrics.rmse == matrix.cells[s][t].metrics.rmse);
        }
    }

    CHECK_THROWS_AS(run_transfer_matrix({households[0]}, cfg), std::invalid_argument);
}

TEST_CASE("matrix csv format") {
    const MetricTriple t{0.0125, 0.5, 0.925};
    TransferMatrix m = matrix_from_cells({"a", "b"}, {{t, t}, {t, t}});
    m.cells[0][0].epochs = 50;
    m.cells[0][0].seconds = 1.25;
    const std::string csv = matrix_to_csv(m);
    CHECK(csv.rfind("source,target,mape,rmse,r2,epochs,seconds\n", 0) == 0);
    CHECK(csv.find("a,a,0.0125,0.5,0.925,50,1.250\n") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
