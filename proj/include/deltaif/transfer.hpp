#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "deltaif/metrics.hpp"
#include "deltaif/neuralnet.hpp"
#include "deltaif/timeseries.hpp"

namespace deltaif {

// One preprocessed household, already split.
struct HouseholdData {
    std::string id;
    RegularSeries train;
    RegularSeries test;
};

struct MatrixCell {
    MetricTriple metrics;
    int epochs = 0;
    double seconds = 0.0;  // wall clock around the training call
};

// cells[source][target]; the diagonal holds the pretrained model evaluated
// on its own household's test split.
struct TransferMatrix {
    std::vector<std::string> households;
    std::vector<std::vector<MatrixCell>> cells;
};

struct TimingReport {
    std::vector<double> from_scratch_seconds;  // one full training per household
    double pretrain_seconds = 0.0;             // selected source
    double fine_tune_total_seconds = 0.0;      // selected source across its targets
    double percent_saved = 0.0;                // 1 - (pretrain + fine-tunes) / sum(from scratch)
    double epoch_unit_saving = 0.0;            // 1 - (E + (n-1)F) / (nE)
    std::string source_id;
};

struct MatrixOptions {
    int jobs = 1;
    std::string checkpoint_dir;  // empty: no checkpoints written
};

// Full training on the source household for cfg.epochs, seeded with
// cfg.seed for both weight init and batch order.
LstmModel pretrain(const HouseholdData& source, const LstmConfig& cfg,
                   TrainHistory* history = nullptr, double* train_seconds = nullptr);

// Starts from the base parameters, refits the scaler on the target's
// training data, then trains for cfg.fine_tune_epochs with the given seed.
LstmModel fine_tune(const LstmModel& base, const HouseholdData& target, const LstmConfig& cfg,
                    std::uint64_t seed, TrainHistory* history = nullptr,
                    double* train_seconds = nullptr);

// Teacher-forced one-step evaluation on the test split.
MetricTriple evaluate_on(const LstmModel& model, const RegularSeries& test);

// Every household once as source: pretrain, evaluate on itself, fine-tune
// and evaluate on every other household. Fine-tune seed for target index k
// is cfg.seed + k. The diagonal doubles as the from-scratch baseline in the
// timing report, which is computed for the selected source.
std::pair<TransferMatrix, TimingReport> run_transfer_matrix(
    const std::vector<HouseholdData>& households, const LstmConfig& cfg,
    const MatrixOptions& options = {});

// Source with the lowest mean RMSE across its row (diagonal included);
// ties fall to lower mean MAPE, then lexicographic id.
std::string select_source(const TransferMatrix& matrix);

double epoch_unit_saving(int pretrain_epochs, int fine_tune_epochs, int n_households);

// "source,target,mape,rmse,r2,epochs,seconds" rows in household order.
std::string matrix_to_csv(const TransferMatrix& matrix);

} // namespace deltaif
