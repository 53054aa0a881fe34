#pragma once

#include <cmath>
#include <vector>

#include "dgrnn/autodiff.hpp"
#include "dgrnn/dataset.hpp"

namespace dgrnn {

/// Masked mean absolute error on the normalized scale, as a graph node so
/// it can serve as the training loss.
inline Var mae_loss(const Var& pred, const Tensor& target, const Tensor& mask) {
    check_same_shape(pred.value(), target, "mae_loss");
    check_same_shape(pred.value(), mask, "mae_loss");
    double count = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) count += mask[i];
    if (count == 0.0) throw value_error("mae_loss: mask excludes every entry");
    const Var diff = abs_val(sub(pred, constant(target)));
    return scale(sum_all(hadamard(diff, constant(mask))), 1.0 / count);
}

/// Per-horizon and aggregate errors on the de-normalized scale, observed
/// entries only.
struct MetricReport {
    std::vector<double> mae;   // [T]
    std::vector<double> rmse;  // [T]
    double aggregate_mae = 0.0;
    double aggregate_rmse = 0.0;
    std::vector<std::size_t> counts;  // observed entries per horizon
};

inline double invert_zscore_value(double v, const NormStats& stats) {
    return v * stats.std_dev + stats.mean;
}

/// preds/targets: one [T x N] pair per window, normalized; masks flag the
/// observed target entries.
inline MetricReport compute_metrics(const std::vector<Tensor>& preds,
                                    const std::vector<Tensor>& targets,
                                    const std::vector<Tensor>& masks, const NormStats& stats) {
    if (preds.empty() || preds.size() != targets.size() || preds.size() != masks.size()) {
        throw value_error("compute_metrics: prediction/target/mask lists must align");
    }
    const std::size_t T = preds.front().dim(0);
    const std::size_t N = preds.front().dim(1);
    MetricReport rep;
    rep.mae.assign(T, 0.0);
    rep.rmse.assign(T, 0.0);
    rep.counts.assign(T, 0);
    for (std::size_t k = 0; k < preds.size(); ++k) {
        check_same_shape(preds[k], targets[k], "compute_metrics");
        for (std::size_t tau = 0; tau < T; ++tau) {
            for (std::size_t n = 0; n < N; ++n) {
                if (masks[k].at(tau, n) != 1.0) continue;
                const double p = invert_zscore_value(preds[k].at(tau, n), stats);
                const double t = invert_zscore_value(targets[k].at(tau, n), stats);
                const double d = p - t;
                rep.mae[tau] += std::fabs(d);
                rep.rmse[tau] += d * d;
                rep.counts[tau] += 1;
            }
        }
    }
    double abs_total = 0.0, sq_total = 0.0;
    std::size_t count_total = 0;
    for (std::size_t tau = 0; tau < T; ++tau) {
        abs_total += rep.mae[tau];
        sq_total += rep.rmse[tau];
        count_total += rep.counts[tau];
        const double c = rep.counts[tau] > 0 ? static_cast<double>(rep.counts[tau]) : 1.0;
        rep.mae[tau] /= c;
        rep.rmse[tau] = std::sqrt(rep.rmse[tau] / c);
    }
    const double ct = count_total > 0 ? static_cast<double>(count_total) : 1.0;
    rep.aggregate_mae = abs_total / ct;
    rep.aggregate_rmse = std::sqrt(sq_total / ct);
    return rep;
}

} // namespace dgrnn
