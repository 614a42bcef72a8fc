#include "deltaif/neuralnet.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "deltaif/fastmath.hpp"
#include "deltaif/rng.hpp"
#include "deltaif/timeutil.hpp"

namespace deltaif {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kTwoPi = 6.283185307179586476925286766559;

// Reusable buffers for one batched forward/backward pass. Gate activations
// are cached per timestep in the column order input|forget|cell|output.
struct Workspace {
    std::size_t batch = 0;
    int steps = 0, features = 0, units = 0;
    std::vector<Mat> x;       // steps of batch x features
    std::vector<Mat> gates;   // steps of batch x 4*units
    std::vector<Mat> cell;    // steps of batch x units
    std::vector<Mat> hidden;  // steps of batch x units
    std::vector<Mat> tanh_c;  // steps of batch x units
    Mat d_h, d_c, d_c_next;   // batch x units
    Mat d_a;                  // batch x 4*units
    Mat u_t;                  // 4*units x units, refreshed per backward pass

    void ensure(std::size_t b, int t, int f, int u) {
        if (batch == b && steps == t && features == f && units == u) return;
        batch = b;
        steps = t;
        features = f;
        units = u;
        x.assign(t, Mat(b, f));
        gates.assign(t, Mat(b, 4 * static_cast<std::size_t>(u)));
        cell.assign(t, Mat(b, u));
        hidden.assign(t, Mat(b, u));
        tanh_c.assign(t, Mat(b, u));
        d_h = Mat(b, u);
        d_c = Mat(b, u);
        d_c_next = Mat(b, u);
        d_a = Mat(b, 4 * static_cast<std::size_t>(u));
        u_t = Mat(4 * static_cast<std::size_t>(u), u);
    }
};

// i|f in one contiguous run, then g, then o.
void activate_gates(Mat& a, int units) {
    for (std::size_t b = 0; b < a.rows; ++b) {
        double* ab = a.row(b);
        sigmoid_block(ab, 2 * static_cast<std::size_t>(units));
        tanh_block(ab + 2 * units, static_cast<std::size_t>(units));
        sigmoid_block(ab + 3 * units, static_cast<std::size_t>(units));
    }
}

void gather_rows(const Mat& features, std::span<const std::size_t> batch, int t, Mat& out) {
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const double* src = features.row(batch[b] + static_cast<std::size_t>(t));
        std::copy(src, src + features.cols, out.row(b));
    }
}

// Forward pass over a batch, caching everything backward needs. Returns the
// scaled predictions.
std::vector<double> forward_batch(const LstmModel& model, const WindowedDataset& data,
                                  std::span<const std::size_t> batch, Workspace& ws) {
    const int T = model.config.lookback;
    const int F = model.config.n_features;
    const int U = model.config.units;
    const std::size_t B = batch.size();
    ws.ensure(B, T, F, U);

    const LstmParams& p = model.params;
    const Mat* h_prev = nullptr;
    for (int t = 0; t < T; ++t) {
        gather_rows(data.features, batch, t, ws.x[t]);
        Mat& a = ws.gates[t];
        for (std::size_t b = 0; b < B; ++b) {
            std::copy(p.b.begin(), p.b.end(), a.row(b));
        }
        gemm_acc(ws.x[t], p.w, a);
        if (h_prev != nullptr) gemm_acc(*h_prev, p.u, a);

        activate_gates(a, U);

        Mat& c = ws.cell[t];
        Mat& h = ws.hidden[t];
        Mat& tc = ws.tanh_c[t];
        const Mat* c_prev = (t > 0) ? &ws.cell[t - 1] : nullptr;
        for (std::size_t b = 0; b < B; ++b) {
            const double* ab = a.row(b);
            double* cb = c.row(b);
            const double* cpb = c_prev ? c_prev->row(b) : nullptr;
            for (int j = 0; j < U; ++j) {
                cb[j] = (cpb ? ab[U + j] * cpb[j] : 0.0) + ab[j] * ab[2 * U + j];
            }
        }
        tc.a = c.a;
        tanh_block(tc.a.data(), tc.a.size());
        for (std::size_t b = 0; b < B; ++b) {
            const double* ab = a.row(b);
            const double* tcb = tc.row(b);
            double* hb = h.row(b);
            for (int j = 0; j < U; ++j) hb[j] = ab[3 * U + j] * tcb[j];
        }
        h_prev = &h;
    }

    std::vector<double> preds(B);
    const Mat& h_last = ws.hidden[T - 1];
    for (std::size_t b = 0; b < B; ++b) {
        const double* hb = h_last.row(b);
        double s = p.b_out;
        for (int j = 0; j < U; ++j) s += hb[j] * p.w_out[static_cast<std::size_t>(j)];
        preds[b] = s;
    }
    return preds;
}

void check_finite(const LstmParams& g) {
    auto scan = [](const std::vector<double>& v, const char* name) {
        for (const double x : v) {
            if (!std::isfinite(x)) {
                throw std::runtime_error(std::string("non-finite gradient in ") + name);
            }
        }
    };
    scan(g.w.a, "w");
    scan(g.u.a, "u");
    scan(g.b, "b");
    scan(g.w_out, "w_out");
    if (!std::isfinite(g.b_out)) throw std::runtime_error("non-finite gradient in b_out");
}

void backward_batch(const LstmModel& model, const WindowedDataset& data,
                    std::span<const std::size_t> batch, Workspace& ws,
                    std::span<const double> preds, LstmParams& grads, double& mean_abs_err) {
    const int T = model.config.lookback;
    const int U = model.config.units;
    const std::size_t B = batch.size();
    const LstmParams& p = model.params;

    grads.zero();
    // The recurrent weights transposed once per pass keeps the dH backprop
    // product in the fast row-major form.
    for (std::size_t r = 0; r < p.u.rows; ++r) {
        const double* src = p.u.row(r);
        for (std::size_t col = 0; col < p.u.cols; ++col) ws.u_t.at(col, r) = src[col];
    }

    double abs_sum = 0.0;
    // d(mean MAE)/d(pred_b) = sign(residual_b) / B, zero at zero residual.
    std::vector<double> d_y(B);
    for (std::size_t b = 0; b < B; ++b) {
        const double r = preds[b] - data.targets[batch[b]];
        abs_sum += std::abs(r);
        d_y[b] = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) / static_cast<double>(B);
    }
    mean_abs_err = abs_sum / static_cast<double>(B);

    const Mat& h_last = ws.hidden[T - 1];
    for (std::size_t b = 0; b < B; ++b) {
        const double* hb = h_last.row(b);
        double* dhb = ws.d_h.row(b);
        for (int j = 0; j < U; ++j) {
            grads.w_out[static_cast<std::size_t>(j)] += d_y[b] * hb[j];
            dhb[j] = d_y[b] * p.w_out[static_cast<std::size_t>(j)];
        }
        grads.b_out += d_y[b];
    }

    ws.d_c.zero();
    for (int t = T - 1; t >= 0; --t) {
        const Mat& a = ws.gates[t];
        const Mat& tc = ws.tanh_c[t];
        const Mat* c_prev = (t > 0) ? &ws.cell[t - 1] : nullptr;
        for (std::size_t b = 0; b < B; ++b) {
            const double* ab = a.row(b);
            const double* tcb = tc.row(b);
            const double* cpb = c_prev ? c_prev->row(b) : nullptr;
            double* dhb = ws.d_h.row(b);
            double* dcb = ws.d_c.row(b);
            double* dcn = ws.d_c_next.row(b);
            double* dab = ws.d_a.row(b);
            for (int j = 0; j < U; ++j) {
                const double gi = ab[j];
                const double gf = ab[U + j];
                const double gg = ab[2 * U + j];
                const double go = ab[3 * U + j];
                const double tv = tcb[j];
                const double d_o = dhb[j] * tv;
                const double dc = dcb[j] + dhb[j] * go * (1.0 - tv * tv);
                const double d_i = dc * gg;
                const double d_g = dc * gi;
                const double d_f = dc * (cpb ? cpb[j] : 0.0);
                dcn[j] = dc * gf;
                dab[j] = d_i * gi * (1.0 - gi);
                dab[U + j] = d_f * gf * (1.0 - gf);
                dab[2 * U + j] = d_g * (1.0 - gg * gg);
                dab[3 * U + j] = d_o * go * (1.0 - go);
            }
        }
        gemm_at_b_acc(ws.x[t], ws.d_a, grads.w);
        if (t > 0) {
            gemm_at_b_acc(ws.hidden[t - 1], ws.d_a, grads.u);
            ws.d_h.zero();
            gemm_acc(ws.d_a, ws.u_t, ws.d_h);
        }
        for (std::size_t b = 0; b < B; ++b) {
            const double* dab = ws.d_a.row(b);
            for (int j = 0; j < 4 * U; ++j) grads.b[static_cast<std::size_t>(j)] += dab[j];
        }
        std::swap(ws.d_c, ws.d_c_next);
    }
    check_finite(grads);
}

// Forward-only evaluation, rolling state, no caches.
std::vector<double> eval_windows(const LstmModel& model, const WindowedDataset& data,
                                 std::span<const std::size_t> indices) {
    const int T = model.config.lookback;
    const int F = model.config.n_features;
    const int U = model.config.units;
    const std::size_t B = indices.size();
    const LstmParams& p = model.params;

    Mat x(B, F), a(B, 4 * static_cast<std::size_t>(U)), h(B, U), c(B, U), tc(B, U);
    for (int t = 0; t < T; ++t) {
        gather_rows(data.features, indices, t, x);
        for (std::size_t b = 0; b < B; ++b) std::copy(p.b.begin(), p.b.end(), a.row(b));
        gemm_acc(x, p.w, a);
        if (t > 0) gemm_acc(h, p.u, a);
        activate_gates(a, U);
        for (std::size_t b = 0; b < B; ++b) {
            const double* ab = a.row(b);
            double* cb = c.row(b);
            for (int j = 0; j < U; ++j) {
                cb[j] = (t > 0 ? ab[U + j] * cb[j] : 0.0) + ab[j] * ab[2 * U + j];
            }
        }
        tc.a = c.a;
        tanh_block(tc.a.data(), tc.a.size());
        for (std::size_t b = 0; b < B; ++b) {
            const double* ab = a.row(b);
            const double* tcb = tc.row(b);
            double* hb = h.row(b);
            for (int j = 0; j < U; ++j) hb[j] = ab[3 * U + j] * tcb[j];
        }
    }
    std::vector<double> preds(B);
    for (std::size_t b = 0; b < B; ++b) {
        const double* hb = h.row(b);
        double s = p.b_out;
        for (int j = 0; j < U; ++j) s += hb[j] * p.w_out[static_cast<std::size_t>(j)];
        preds[b] = s;
    }
    return preds;
}

} // namespace

void validate_config(const LstmConfig& cfg) {
    if (cfg.units <= 0 || cfg.lookback <= 0 || cfg.n_features <= 0 || cfg.epochs < 0 ||
        cfg.batch_size <= 0 || cfg.learning_rate <= 0.0 || cfg.fine_tune_epochs < 0) {
        throw std::invalid_argument("invalid LSTM config");
    }
}

void LstmParams::zero() {
    w.zero();
    u.zero();
    std::fill(b.begin(), b.end(), 0.0);
    std::fill(w_out.begin(), w_out.end(), 0.0);
    b_out = 0.0;
}

void LstmParams::resize(int n_features, int units) {
    w = Mat(static_cast<std::size_t>(n_features), 4 * static_cast<std::size_t>(units));
    u = Mat(static_cast<std::size_t>(units), 4 * static_cast<std::size_t>(units));
    b.assign(4 * static_cast<std::size_t>(units), 0.0);
    w_out.assign(static_cast<std::size_t>(units), 0.0);
    b_out = 0.0;
}

double& LstmParams::flat(std::size_t i) {
    if (i < w.a.size()) return w.a[i];
    i -= w.a.size();
    if (i < u.a.size()) return u.a[i];
    i -= u.a.size();
    if (i < b.size()) return b[i];
    i -= b.size();
    if (i < w_out.size()) return w_out[i];
    return b_out;
}

LstmModel init_model(const LstmConfig& cfg, const ScalerParams& scaler, std::uint64_t seed) {
    validate_config(cfg);
    LstmModel model;
    model.config = cfg;
    model.scaler = scaler;
    model.params.resize(cfg.n_features, cfg.units);

    Rng rng(seed);
    const double lim_w = std::sqrt(6.0 / (cfg.n_features + cfg.units));
    const double lim_u = std::sqrt(6.0 / (cfg.units + cfg.units));
    const double lim_out = std::sqrt(6.0 / (cfg.units + 1));
    for (double& v : model.params.w.a) v = rng.uniform(-lim_w, lim_w);
    for (double& v : model.params.u.a) v = rng.uniform(-lim_u, lim_u);
    for (double& v : model.params.w_out) v = rng.uniform(-lim_out, lim_out);
    // Forget-gate bias starts at one.
    for (int j = 0; j < cfg.units; ++j) {
        model.params.b[static_cast<std::size_t>(cfg.units + j)] = 1.0;
    }
    return model;
}

ScalerParams fit_scaler(const RegularSeries& series, int n_features) {
    if (series.values.empty()) throw std::invalid_argument("fit_scaler: empty series");
    double lo = series.values[0], hi = series.values[0];
    for (const double v : series.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi <= lo) {
        throw std::runtime_error("fit_scaler: degenerate temperature range (max == min)");
    }
    ScalerParams s;
    s.min.assign(static_cast<std::size_t>(n_features), 0.0);
    s.max.assign(static_cast<std::size_t>(n_features), 1.0);
    s.min[0] = lo;
    s.max[0] = hi;
    return s;
}

WindowedDataset make_windows(const RegularSeries& series, const LstmConfig& cfg,
                             const ScalerParams* scaler) {
    validate_config(cfg);
    if (cfg.n_features != 5) {
        throw std::invalid_argument("make_windows: feature layout requires n_features == 5");
    }
    if (series.size() <= static_cast<std::size_t>(cfg.lookback)) {
        throw std::invalid_argument("make_windows: series too short for lookback " +
                                    std::to_string(cfg.lookback));
    }

    WindowedDataset ds;
    ds.lookback = cfg.lookback;
    ds.scaler = scaler ? *scaler : fit_scaler(series, cfg.n_features);
    if (ds.scaler.max[0] <= ds.scaler.min[0]) {
        throw std::runtime_error("make_windows: degenerate temperature scaler");
    }

    const std::size_t n = series.size();
    ds.features = Mat(n, 5);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t ts = series.timestamp(i);
        const double day_phase = kTwoPi * static_cast<double>(seconds_into_day(ts)) / 86400.0;
        const double week_phase = kTwoPi * static_cast<double>(seconds_into_week(ts)) / 604800.0;
        double* row = ds.features.row(i);
        row[0] = ds.scaler.scale(series.values[i], 0);
        row[1] = std::sin(day_phase);
        row[2] = std::cos(day_phase);
        row[3] = std::sin(week_phase);
        row[4] = std::cos(week_phase);
    }
    ds.targets.resize(n - static_cast<std::size_t>(cfg.lookback));
    for (std::size_t i = 0; i < ds.targets.size(); ++i) {
        ds.targets[i] = ds.features.at(i + static_cast<std::size_t>(cfg.lookback), 0);
    }
    return ds;
}

double forward(const LstmModel& model, const Mat& window) {
    const int T = model.config.lookback;
    const int F = model.config.n_features;
    const int U = model.config.units;
    if (window.rows != static_cast<std::size_t>(T) || window.cols != static_cast<std::size_t>(F)) {
        throw std::invalid_argument("forward: window shape mismatch");
    }
    const LstmParams& p = model.params;
    std::vector<double> h(static_cast<std::size_t>(U), 0.0);
    std::vector<double> c(static_cast<std::size_t>(U), 0.0);
    std::vector<double> tc(static_cast<std::size_t>(U));
    std::vector<double> a(4 * static_cast<std::size_t>(U));
    for (int t = 0; t < T; ++t) {
        std::copy(p.b.begin(), p.b.end(), a.begin());
        const double* xt = window.row(static_cast<std::size_t>(t));
        for (int f = 0; f < F; ++f) {
            const double xv = xt[f];
            const double* wrow = p.w.row(static_cast<std::size_t>(f));
            for (int j = 0; j < 4 * U; ++j) a[static_cast<std::size_t>(j)] += xv * wrow[j];
        }
        for (int k = 0; k < U; ++k) {
            const double hv = h[static_cast<std::size_t>(k)];
            const double* urow = p.u.row(static_cast<std::size_t>(k));
            for (int j = 0; j < 4 * U; ++j) a[static_cast<std::size_t>(j)] += hv * urow[j];
        }
        sigmoid_block(a.data(), 2 * static_cast<std::size_t>(U));
        tanh_block(a.data() + 2 * U, static_cast<std::size_t>(U));
        sigmoid_block(a.data() + 3 * U, static_cast<std::size_t>(U));
        for (int j = 0; j < U; ++j) {
            c[static_cast<std::size_t>(j)] =
                a[static_cast<std::size_t>(U + j)] * c[static_cast<std::size_t>(j)] +
                a[static_cast<std::size_t>(j)] * a[static_cast<std::size_t>(2 * U + j)];
        }
        tc = c;
        tanh_block(tc.data(), tc.size());
        for (int j = 0; j < U; ++j) {
            h[static_cast<std::size_t>(j)] =
                a[static_cast<std::size_t>(3 * U + j)] * tc[static_cast<std::size_t>(j)];
        }
    }
    double s = p.b_out;
    for (int j = 0; j < U; ++j) s += h[static_cast<std::size_t>(j)] * p.w_out[static_cast<std::size_t>(j)];
    return s;
}

LstmParams gradients(const LstmModel& model, const WindowedDataset& data,
                     std::span<const std::size_t> batch, double* mean_abs_err) {
    if (batch.empty()) throw std::invalid_argument("gradients: empty batch");
    Workspace ws;
    LstmParams grads;
    grads.resize(model.config.n_features, model.config.units);
    const std::vector<double> preds = forward_batch(model, data, batch, ws);
    double mae = 0.0;
    backward_batch(model, data, batch, ws, preds, grads, mae);
    if (mean_abs_err != nullptr) *mean_abs_err = mae;
    return grads;
}

void adam_step(LstmParams& params, const LstmParams& grads, AdamState& state, double lr) {
    const auto mirrors = [&params](const LstmParams& s) {
        return s.w.a.size() == params.w.a.size() && s.u.a.size() == params.u.a.size() &&
               s.b.size() == params.b.size() && s.w_out.size() == params.w_out.size();
    };
    if (!mirrors(state.m) || !mirrors(state.v)) {
        if (state.step != 0) throw std::invalid_argument("adam_step: state shape mismatch");
        state.m = params;
        state.m.zero();
        state.v = state.m;
    }
    if (!mirrors(grads)) throw std::invalid_argument("adam_step: gradient shape mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
    const std::size_t n = params.count();
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads.flat(i);
        double& m = state.m.flat(i);
        double& v = state.v.flat(i);
        m = kBeta1 * m + (1.0 - kBeta1) * g;
        v = kBeta2 * v + (1.0 - kBeta2) * g * g;
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        params.flat(i) -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
    }
}

TrainHistory train(LstmModel& model, const WindowedDataset& data, double val_fraction,
                   int epochs, int batch_size, std::uint64_t seed) {
    if (epochs < 0 || batch_size <= 0 || val_fraction < 0.0 || val_fraction >= 1.0) {
        throw std::invalid_argument("train: bad arguments");
    }
    TrainHistory history;
    if (epochs == 0) return history;

    const std::size_t n_windows = data.num_windows();
    const std::size_t n_val = static_cast<std::size_t>(val_fraction * static_cast<double>(n_windows));
    const std::size_t n_train = n_windows - n_val;
    if (n_train == 0) throw std::invalid_argument("train: empty training set after validation split");

    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);
    std::vector<std::size_t> val_idx(n_val);
    std::iota(val_idx.begin(), val_idx.end(), n_train);

    Rng rng(seed);
    Workspace ws;
    LstmParams grads;
    grads.resize(model.config.n_features, model.config.units);
    AdamState adam;
    adam.m = grads;
    adam.v = grads;

    double best_val = std::numeric_limits<double>::infinity();
    LstmParams best_params = model.params;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        rng.shuffle(order);
        double abs_sum = 0.0;
        for (std::size_t ofs = 0; ofs < n_train; ofs += static_cast<std::size_t>(batch_size)) {
            const std::size_t len = std::min(static_cast<std::size_t>(batch_size), n_train - ofs);
            const std::span<const std::size_t> batch(order.data() + ofs, len);
            const std::vector<double> preds = forward_batch(model, data, batch, ws);
            double mae = 0.0;
            backward_batch(model, data, batch, ws, preds, grads, mae);
            abs_sum += mae * static_cast<double>(len);
            adam_step(model.params, grads, adam, model.config.learning_rate);
        }
        const double train_mae = abs_sum / static_cast<double>(n_train);

        double val_mae = train_mae;  // fallback when no validation windows exist
        if (n_val > 0) {
            const std::vector<double> preds = eval_windows(model, data, val_idx);
            double s = 0.0;
            for (std::size_t i = 0; i < n_val; ++i) {
                s += std::abs(preds[i] - data.targets[val_idx[i]]);
            }
            val_mae = s / static_cast<double>(n_val);
        }
        if (val_mae < best_val) {
            best_val = val_mae;
            best_params = model.params;
        }

        history.train_mae.push_back(train_mae);
        history.val_mae.push_back(val_mae);
        history.epoch_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }

    model.params = best_params;
    return history;
}

RegularSeries predict_series(const LstmModel& model, const RegularSeries& test) {
    const WindowedDataset ds = make_windows(test, model.config, &model.scaler);
    std::vector<std::size_t> idx(ds.num_windows());
    std::iota(idx.begin(), idx.end(), 0);

    RegularSeries out;
    out.household_id = test.household_id;
    out.step_seconds = test.step_seconds;
    out.start = test.start + static_cast<std::int64_t>(model.config.lookback) * test.step_seconds;
    out.values.resize(idx.size());

    // Chunked so the eval buffers stay small.
    constexpr std::size_t kChunk = 512;
    for (std::size_t ofs = 0; ofs < idx.size(); ofs += kChunk) {
        const std::size_t len = std::min(kChunk, idx.size() - ofs);
        const std::span<const std::size_t> part(idx.data() + ofs, len);
        const std::vector<double> preds = eval_windows(model, ds, part);
        for (std::size_t i = 0; i < len; ++i) {
            out.values[ofs + i] = model.scaler.unscale(preds[i], 0);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kFormat = "deltaif-lstm-checkpoint";
constexpr int kVersion = 1;

nlohmann::json tensor_json(const std::vector<double>& data, std::vector<std::size_t> shape) {
    return nlohmann::json{{"shape", shape}, {"data", data}};
}

std::vector<double> tensor_from_json(const nlohmann::json& j, std::vector<std::size_t> shape,
                                     const std::string& name) {
    const auto got = j.at("shape").get<std::vector<std::size_t>>();
    if (got != shape) throw std::runtime_error("checkpoint: bad shape for tensor " + name);
    auto data = j.at("data").get<std::vector<double>>();
    std::size_t expect = 1;
    for (const std::size_t s : shape) expect *= s;
    if (data.size() != expect) throw std::runtime_error("checkpoint: bad data size for tensor " + name);
    for (const double v : data) {
        if (!std::isfinite(v)) throw std::runtime_error("checkpoint: non-finite value in " + name);
    }
    return data;
}

// Column block [gate*units, (gate+1)*units) of a concatenated matrix.
std::vector<double> slice_gate(const Mat& m, int gate, int units) {
    std::vector<double> out;
    out.reserve(m.rows * static_cast<std::size_t>(units));
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.row(i);
        for (int j = 0; j < units; ++j) out.push_back(row[gate * units + j]);
    }
    return out;
}

void unslice_gate(Mat& m, int gate, int units, const std::vector<double>& data) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* row = m.row(i);
        for (int j = 0; j < units; ++j) row[gate * units + j] = data[k++];
    }
}

const char* kGateNames[4] = {"i", "f", "g", "o"};

} // namespace

std::string model_to_json(const LstmModel& model) {
    const int U = model.config.units;
    const std::size_t F = static_cast<std::size_t>(model.config.n_features);
    nlohmann::json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["config"] = {
        {"units", model.config.units},
        {"lookback", model.config.lookback},
        {"n_features", model.config.n_features},
        {"epochs", model.config.epochs},
        {"batch_size", model.config.batch_size},
        {"learning_rate", model.config.learning_rate},
        {"fine_tune_epochs", model.config.fine_tune_epochs},
        {"seed", model.config.seed},
    };
    j["scaler"] = {{"min", model.scaler.min}, {"max", model.scaler.max}};

    nlohmann::json params;
    for (int g = 0; g < 4; ++g) {
        params[std::string("w_") + kGateNames[g]] =
            tensor_json(slice_gate(model.params.w, g, U), {F, static_cast<std::size_t>(U)});
        params[std::string("u_") + kGateNames[g]] =
            tensor_json(slice_gate(model.params.u, g, U),
                        {static_cast<std::size_t>(U), static_cast<std::size_t>(U)});
        std::vector<double> bias(model.params.b.begin() + g * U,
                                 model.params.b.begin() + (g + 1) * U);
        params[std::string("b_") + kGateNames[g]] =
            tensor_json(bias, {static_cast<std::size_t>(U)});
    }
    params["w_out"] = tensor_json(model.params.w_out, {static_cast<std::size_t>(U), 1});
    params["b_out"] = tensor_json({model.params.b_out}, {1});
    j["params"] = params;
    return j.dump(2) + "\n";
}

LstmModel model_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: parse failure: ") + e.what());
    }
    if (j.value("format", "") != kFormat) throw std::runtime_error("checkpoint: unknown format");
    if (j.value("version", -1) != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " +
                                 std::to_string(j.value("version", -1)));
    }
    LstmModel model;
    const auto& jc = j.at("config");
    model.config.units = jc.at("units").get<int>();
    model.config.lookback = jc.at("lookback").get<int>();
    model.config.n_features = jc.at("n_features").get<int>();
    model.config.epochs = jc.at("epochs").get<int>();
    model.config.batch_size = jc.at("batch_size").get<int>();
    model.config.learning_rate = jc.at("learning_rate").get<double>();
    model.config.fine_tune_epochs = jc.at("fine_tune_epochs").get<int>();
    model.config.seed = jc.at("seed").get<std::uint64_t>();
    validate_config(model.config);

    model.scaler.min = j.at("scaler").at("min").get<std::vector<double>>();
    model.scaler.max = j.at("scaler").at("max").get<std::vector<double>>();
    if (model.scaler.min.size() != static_cast<std::size_t>(model.config.n_features) ||
        model.scaler.max.size() != model.scaler.min.size()) {
        throw std::runtime_error("checkpoint: scaler shape mismatch");
    }

    const int U = model.config.units;
    const std::size_t F = static_cast<std::size_t>(model.config.n_features);
    model.params.resize(model.config.n_features, U);
    const auto& params = j.at("params");
    for (int g = 0; g < 4; ++g) {
        const std::string suffix = kGateNames[g];
        unslice_gate(model.params.w, g, U,
                     tensor_from_json(params.at("w_" + suffix), {F, static_cast<std::size_t>(U)},
                                      "w_" + suffix));
        unslice_gate(model.params.u, g, U,
                     tensor_from_json(params.at("u_" + suffix),
                                      {static_cast<std::size_t>(U), static_cast<std::size_t>(U)},
                                      "u_" + suffix));
        const auto bias = tensor_from_json(params.at("b_" + suffix),
                                           {static_cast<std::size_t>(U)}, "b_" + suffix);
        std::copy(bias.begin(), bias.end(), model.params.b.begin() + g * U);
    }
    model.params.w_out =
        tensor_from_json(params.at("w_out"), {static_cast<std::size_t>(U), 1}, "w_out");
    model.params.b_out = tensor_from_json(params.at("b_out"), {1}, "b_out")[0];
    return model;
}

void save_model(const LstmModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    out << model_to_json(model);
    if (!out) throw std::runtime_error("save_model: write failure on " + path);
}

LstmModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return model_from_json(text);
}

} // namespace deltaif
