#include "deltaif/transfer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <exception>
#include <stdexcept>
#include <thread>

namespace deltaif {

namespace {

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace

LstmModel pretrain(const HouseholdData& source, const LstmConfig& cfg, TrainHistory* history,
                   double* train_seconds) {
    const WindowedDataset data = make_windows(source.train, cfg);
    LstmModel model = init_model(cfg, data.scaler, cfg.seed);
    const double t0 = now_seconds();
    TrainHistory hist = train(model, data, 0.1, cfg.epochs, cfg.batch_size, cfg.seed);
    if (train_seconds != nullptr) *train_seconds = now_seconds() - t0;
    if (history != nullptr) *history = std::move(hist);
    return model;
}

LstmModel fine_tune(const LstmModel& base, const HouseholdData& target, const LstmConfig& cfg,
                    std::uint64_t seed, TrainHistory* history, double* train_seconds) {
    const WindowedDataset data = make_windows(target.train, cfg);  // refits the scaler
    LstmModel model = base;
    model.config = cfg;
    model.scaler = data.scaler;
    const double t0 = now_seconds();
    TrainHistory hist = train(model, data, 0.1, cfg.fine_tune_epochs, cfg.batch_size, seed);
    if (train_seconds != nullptr) *train_seconds = now_seconds() - t0;
    if (history != nullptr) *history = std::move(hist);
    return model;
}

MetricTriple evaluate_on(const LstmModel& model, const RegularSeries& test) {
    const RegularSeries predicted = predict_series(model, test);
    const std::span<const double> actual(test.values.data() + model.config.lookback,
                                         predicted.values.size());
    return evaluate_metrics(actual, predicted.values);
}

std::pair<TransferMatrix, TimingReport> run_transfer_matrix(
    const std::vector<HouseholdData>& households, const LstmConfig& cfg,
    const MatrixOptions& options) {
    if (households.size() < 2) {
        throw std::invalid_argument("run_transfer_matrix: need at least 2 households");
    }
    const std::size_t n = households.size();

    TransferMatrix matrix;
    matrix.households.reserve(n);
    for (const HouseholdData& h : households) matrix.households.push_back(h.id);
    matrix.cells.assign(n, std::vector<MatrixCell>(n));

    for (std::size_t s = 0; s < n; ++s) {
        double pretrain_secs = 0.0;
        LstmModel base;
        try {
            base = pretrain(households[s], cfg, nullptr, &pretrain_secs);
            matrix.cells[s][s] = {evaluate_on(base, households[s].test), cfg.epochs, pretrain_secs};
        } catch (const std::exception& e) {
            throw std::runtime_error("transfer job (" + households[s].id + " -> " +
                                     households[s].id + ") failed: " + e.what());
        }
        if (!options.checkpoint_dir.empty()) {
            save_model(base, options.checkpoint_dir + "/pretrain_" + households[s].id + ".json");
        }

        // Fine-tune jobs for this source are independent; spread targets
        // over workers in fixed stride order. Results land in preassigned
        // slots, so the outcome does not depend on scheduling.
        std::vector<std::size_t> targets;
        for (std::size_t t = 0; t < n; ++t) {
            if (t != s) targets.push_back(t);
        }
        const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(targets.size())));
        std::vector<std::string> errors(targets.size());
        auto worker = [&](std::size_t worker_id) {
            for (std::size_t k = worker_id; k < targets.size(); k += static_cast<std::size_t>(jobs)) {
                const std::size_t t = targets[k];
                try {
                    double secs = 0.0;
                    const LstmModel tuned =
                        fine_tune(base, households[t], cfg, cfg.seed + t, nullptr, &secs);
                    matrix.cells[s][t] = {evaluate_on(tuned, households[t].test),
                                          cfg.fine_tune_epochs, secs};
                    if (!options.checkpoint_dir.empty()) {
                        save_model(tuned, options.checkpoint_dir + "/finetune_" + households[s].id +
                                              "_to_" + households[t].id + ".json");
                    }
                } catch (const std::exception& e) {
                    errors[k] = "transfer job (" + households[s].id + " -> " + households[t].id +
                                ") failed: " + e.what();
                }
            }
        };
        if (jobs == 1) {
            worker(0);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(static_cast<std::size_t>(jobs));
            for (int w = 0; w < jobs; ++w) pool.emplace_back(worker, static_cast<std::size_t>(w));
            for (std::thread& th : pool) th.join();
        }
        for (const std::string& err : errors) {
            if (!err.empty()) throw std::runtime_error(err);
        }
    }

    TimingReport timing;
    timing.from_scratch_seconds.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        timing.from_scratch_seconds[i] = matrix.cells[i][i].seconds;
    }
    timing.source_id = select_source(matrix);
    const std::size_t sel = static_cast<std::size_t>(
        std::find(matrix.households.begin(), matrix.households.end(), timing.source_id) -
        matrix.households.begin());
    timing.pretrain_seconds = matrix.cells[sel][sel].seconds;
    for (std::size_t t = 0; t < n; ++t) {
        if (t != sel) timing.fine_tune_total_seconds += matrix.cells[sel][t].seconds;
    }
    double scratch_total = 0.0;
    for (const double s : timing.from_scratch_seconds) scratch_total += s;
    timing.percent_saved =
        1.0 - (timing.pretrain_seconds + timing.fine_tune_total_seconds) / scratch_total;
    timing.epoch_unit_saving =
        epoch_unit_saving(cfg.epochs, cfg.fine_tune_epochs, static_cast<int>(n));
    return {std::move(matrix), std::move(timing)};
}

std::string select_source(const TransferMatrix& matrix) {
    if (matrix.households.empty()) throw std::invalid_argument("select_source: empty matrix");
    const std::size_t n = matrix.households.size();
    std::size_t best = 0;
    double best_rmse = 0.0, best_mape = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        double mean_rmse = 0.0, mean_mape = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            mean_rmse += matrix.cells[s][t].metrics.rmse;
            mean_mape += matrix.cells[s][t].metrics.mape;
        }
        mean_rmse /= static_cast<double>(n);
        mean_mape /= static_cast<double>(n);
        const bool better =
            s == 0 || mean_rmse < best_rmse ||
            (mean_rmse == best_rmse &&
             (mean_mape < best_mape ||
              (mean_mape == best_mape && matrix.households[s] < matrix.households[best])));
        if (better) {
            best = s;
            best_rmse = mean_rmse;
            best_mape = mean_mape;
        }
    }
    return matrix.households[best];
}

double epoch_unit_saving(int pretrain_epochs, int fine_tune_epochs, int n_households) {
    const double total = static_cast<double>(n_households) * pretrain_epochs;
    const double transfer =
        pretrain_epochs + static_cast<double>(n_households - 1) * fine_tune_epochs;
    return 1.0 - transfer / total;
}

std::string matrix_to_csv(const TransferMatrix& matrix) {
    std::string out = "source,target,mape,rmse,r2,epochs,seconds\n";
    char secbuf[32];
    for (std::size_t s = 0; s < matrix.households.size(); ++s) {
        for (std::size_t t = 0; t < matrix.households.size(); ++t) {
            const MatrixCell& cell = matrix.cells[s][t];
            std::snprintf(secbuf, sizeof(secbuf), "%.3f", cell.seconds);
            out += matrix.households[s] + ',' + matrix.households[t] + ',' +
                   format_double(cell.metrics.mape) + ',' + format_double(cell.metrics.rmse) +
                   ',' + format_double(cell.metrics.r2) + ',' + std::to_string(cell.epochs) +
                   ',' + secbuf + '\n';
        }
    }
    return out;
}

} // namespace deltaif
