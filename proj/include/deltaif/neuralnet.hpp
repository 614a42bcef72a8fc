#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deltaif/linalg.hpp"
#include "deltaif/timeseries.hpp"

namespace deltaif {

struct LstmConfig {
    int units = 50;
    int lookback = 60;     // input window, timesteps
    int n_features = 5;    // scaled t_mid + sin/cos hour + sin/cos weekday
    int epochs = 50;
    int batch_size = 72;
    double learning_rate = 0.001;
    int fine_tune_epochs = 10;
    std::uint64_t seed = 0;
};

void validate_config(const LstmConfig& cfg);

// Per-feature min-max affine map. Features 1..4 carry identity entries
// (min 0, max 1) so only the temperature channel is actually rescaled.
struct ScalerParams {
    std::vector<double> min;
    std::vector<double> max;

    double scale(double v, std::size_t f) const { return (v - min[f]) / (max[f] - min[f]); }
    double unscale(double v, std::size_t f) const { return v * (max[f] - min[f]) + min[f]; }
    bool operator==(const ScalerParams&) const = default;
};

// Sliding windows over a feature matrix. Window i covers feature rows
// [i, i+lookback) and its target is the scaled temperature at row
// i+lookback, so num_windows() = length - lookback.
struct WindowedDataset {
    Mat features;                 // (series length) x n_features, scaled
    std::vector<double> targets;  // scaled t_mid
    int lookback = 0;
    ScalerParams scaler;

    std::size_t num_windows() const { return targets.size(); }
};

// Gate blocks are concatenated column-wise in the order
// input | forget | cell | output.
struct LstmParams {
    Mat w;                      // n_features x 4*units
    Mat u;                      // units x 4*units
    std::vector<double> b;      // 4*units
    std::vector<double> w_out;  // units
    double b_out = 0.0;

    void zero();
    void resize(int n_features, int units);
    std::size_t count() const { return w.a.size() + u.a.size() + b.size() + w_out.size() + 1; }
    // Flat view over all parameters in a fixed order (w, u, b, w_out, b_out);
    // used by the optimizer and by finite-difference checks.
    double& flat(std::size_t i);
    double flat(std::size_t i) const { return const_cast<LstmParams&>(*this).flat(i); }
};

struct LstmModel {
    LstmConfig config;
    ScalerParams scaler;
    LstmParams params;
};

struct AdamState {
    LstmParams m;
    LstmParams v;
    long step = 0;
};

struct TrainHistory {
    std::vector<double> train_mae;   // scaled units, running mean per epoch
    std::vector<double> val_mae;     // scaled units, full pass per epoch
    std::vector<double> epoch_seconds;
};

// Fresh model with seeded Glorot-uniform weights, zero biases except a
// forget-gate bias of one.
LstmModel init_model(const LstmConfig& cfg, const ScalerParams& scaler, std::uint64_t seed);

ScalerParams fit_scaler(const RegularSeries& series, int n_features);

// Builds the scaled feature matrix and targets. Fits a scaler on this
// series when none is given. Throws if the series is shorter than
// lookback+1 or the temperature range is degenerate.
WindowedDataset make_windows(const RegularSeries& series, const LstmConfig& cfg,
                             const ScalerParams* scaler = nullptr);

// Single window (lookback x n_features) -> scaled prediction.
double forward(const LstmModel& model, const Mat& window);

// Exact gradients of mean MAE over the given windows, by backpropagation
// through time. The MAE subgradient at zero residual is zero.
LstmParams gradients(const LstmModel& model, const WindowedDataset& data,
                     std::span<const std::size_t> batch, double* mean_abs_err = nullptr);

void adam_step(LstmParams& params, const LstmParams& grads, AdamState& state, double lr);

// Trains in place for `epochs` epochs: chronological tail `val_fraction`
// held out, batches drawn in seeded shuffled order, best-validation weights
// restored at the end. Returns the per-epoch history.
TrainHistory train(LstmModel& model, const WindowedDataset& data, double val_fraction,
                   int epochs, int batch_size, std::uint64_t seed);

// One-step-ahead predictions over the test span using true history as input
// at every step. Output grid = test grid shifted by lookback steps.
RegularSeries predict_series(const LstmModel& model, const RegularSeries& test);

// Versioned JSON checkpoint; round-trips bit-exactly.
void save_model(const LstmModel& model, const std::string& path);
LstmModel load_model(const std::string& path);
std::string model_to_json(const LstmModel& model);
LstmModel model_from_json(const std::string& text);

} // namespace deltaif
