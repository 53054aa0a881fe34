#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "dgrnn/metrics.hpp"
#include "dgrnn/model.hpp"
#include "dgrnn/optimizer.hpp"

namespace dgrnn {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    double gradient_clip_norm = 5.0;
    double tau = 2000.0;  // scheduled-sampling decay constant
    std::uint64_t seed = 0;
    std::size_t patience = 15;  // early stop on validation MAE

    void validate() const {
        if (batch_size == 0) throw config_error("train: batch_size must be positive");
        if (learning_rate <= 0.0) throw config_error("train: learning_rate must be positive");
        if (gradient_clip_norm <= 0.0) throw config_error("train: gradient_clip_norm must be positive");
        if (tau <= 0.0) throw config_error("train: tau must be positive");
    }
};

struct EpochRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;  // masked MAE, normalized scale
    double val_mae = 0.0;     // de-normalized aggregate
    double eps = 0.0;         // teacher-forcing probability at epoch end
};

struct TrainResult {
    std::vector<EpochRow> history;
    std::size_t best_epoch = 0;  // 1-based; 0 = never improved
    double best_val_mae = 0.0;
    bool aborted = false;  // non-finite loss; parameters restored to last best
    bool early_stopped = false;
};

struct DataSplit {
    std::vector<WindowSample> train;
    std::vector<WindowSample> val;
    std::vector<WindowSample> test;
    NormStats stats;
};

/// Splits windows chronologically 6:2:2.
inline DataSplit split_windows(std::vector<WindowSample> windows, const NormStats& stats) {
    const SplitSizes sizes = split_622(windows.size());
    DataSplit out;
    out.stats = stats;
    out.train.assign(windows.begin(), windows.begin() + static_cast<std::ptrdiff_t>(sizes.train));
    out.val.assign(windows.begin() + static_cast<std::ptrdiff_t>(sizes.train),
                   windows.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.val));
    out.test.assign(windows.begin() + static_cast<std::ptrdiff_t>(sizes.train + sizes.val),
                    windows.end());
    return out;
}

/// Autoregressive forecasts over a window list, de-normalized metrics.
inline MetricReport evaluate(const Model& model, const std::vector<WindowSample>& windows,
                             const NormStats& stats) {
    std::vector<Tensor> preds, targets, masks;
    preds.reserve(windows.size());
    for (const WindowSample& w : windows) {
        preds.push_back(model.predict(w));
        targets.push_back(w.y);
        masks.push_back(w.y_mask);
    }
    return compute_metrics(preds, targets, masks, stats);
}

namespace detail {

inline std::vector<Tensor> snapshot_params(Model& model) {
    std::vector<Tensor> out;
    for (Parameter* p : model.params()) out.push_back(p->tensor());
    return out;
}

inline void restore_params(Model& model, const std::vector<Tensor>& snap) {
    auto params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->tensor() = snap[i];
}

} // namespace detail

/// Scheduled-sampling training with gradient clipping, adaptive moments,
/// best-on-validation parameter retention and early stopping. Deterministic
/// given config.seed on a single thread.
inline TrainResult train(Model& model, const DataSplit& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.train.empty()) throw value_error("train: no training windows");
    TrainResult result;
    if (cfg.epochs == 0) return result;

    auto params = model.params();
    Adam opt(params, AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
    SamplingSchedule schedule{cfg.tau};

    std::vector<Tensor> best = detail::snapshot_params(model);
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t stale_epochs = 0;
    std::size_t global_iter = 0;  // optimizer iterations drive the schedule

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(data.train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(mix_seed(cfg.seed, 0x50fful, epoch));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        double eps = schedule.eps_at(static_cast<double>(global_iter));
        bool finite = true;

        for (std::size_t start = 0; start < order.size() && finite; start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            eps = schedule.eps_at(static_cast<double>(global_iter));
            opt.zero_grad();
            for (std::size_t k = start; k < end; ++k) {
                const WindowSample& sample = data.train[order[k]];
                const std::uint64_t decode_seed = mix_seed(cfg.seed, global_iter, order[k]);
                Var pred = model.forward(sample, eps, decode_seed);
                Var loss = scale(mae_loss(pred, sample.y, sample.y_mask),
                                 1.0 / static_cast<double>(end - start));
                const double value = loss.value()[0] * static_cast<double>(end - start);
                if (!std::isfinite(value)) {
                    finite = false;
                    break;
                }
                loss_sum += value;
                ++loss_count;
                backward(loss);
            }
            if (!finite) break;
            clip_gradients(params, cfg.gradient_clip_norm);
            opt.step();
            ++global_iter;
        }

        if (!finite) {
            detail::restore_params(model, best);
            result.aborted = true;
            break;
        }

        EpochRow row;
        row.epoch = epoch;
        row.train_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
        row.eps = eps;
        if (!data.val.empty()) {
            row.val_mae = evaluate(model, data.val, data.stats).aggregate_mae;
        }
        result.history.push_back(row);

        if (!std::isfinite(row.val_mae)) {
            detail::restore_params(model, best);
            result.aborted = true;
            break;
        }
        if (data.val.empty() || row.val_mae < best_val) {
            best_val = row.val_mae;
            best = detail::snapshot_params(model);
            result.best_epoch = epoch;
            stale_epochs = 0;
        } else {
            ++stale_epochs;
            if (stale_epochs >= cfg.patience) {
                result.early_stopped = true;
                break;
            }
        }
    }

    detail::restore_params(model, best);
    result.best_val_mae = best_val;
    return result;
}

} // namespace dgrnn
