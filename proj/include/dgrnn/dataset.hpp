#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dgrnn/csv.hpp"
#include "dgrnn/errors.hpp"
#include "dgrnn/graph.hpp"
#include "dgrnn/rng.hpp"
#include "dgrnn/tensor.hpp"

namespace dgrnn {

/// Per-node flow series in 5-minute bins (or a reduced test frequency).
/// missing_mask is 1 where a value was actually observed.
struct RawSeries {
    std::size_t n_steps = 0;
    std::size_t n_nodes = 0;
    Tensor values;        // [L x N]
    Tensor missing_mask;  // [L x N], {0,1}
    int step_minutes = 5;
};

/// Global z-score statistics fitted on the training portion only.
struct NormStats {
    double mean = 0.0;
    double std_dev = 1.0;
};

struct ResolutionConfig {
    std::size_t steps_per_day = 288;  // p
    std::size_t history_len = 12;     // S
    std::size_t horizon = 12;         // T

    std::size_t week_stride() const { return 7 * steps_per_day; }

    void validate() const {
        if (steps_per_day == 0 || history_len == 0 || horizon == 0) {
            throw config_error("resolution: p, S and T must be positive");
        }
        if (history_len > steps_per_day) {
            // the day-lagged block X^{t+1+s-p} stays at or before the anchor
            // only when S <= p; larger S would read future rows
            throw config_error("resolution: history length exceeds steps per day");
        }
    }
};

/// One training example: the three resolution blocks plus the target window.
/// For anchor t, block rows are
///   x_current[s] = X^{t-S+1+s},  x_day[s] = X^{t+1+s-p},
///   x_week[s]    = X^{t+1+s-7p}, y[tau]   = X^{t+1+tau}.
struct WindowSample {
    Tensor x_current;  // [S x N]
    Tensor x_day;      // [S x N]
    Tensor x_week;     // [S x N]
    Tensor y;          // [T x N]
    Tensor y_mask;     // [T x N] observation mask for metric exclusion
    std::size_t t_anchor = 0;
};

// ---------------------------------------------------------------------------
// cleaning and normalization
// ---------------------------------------------------------------------------

/// Fills unobserved entries by per-node linear interpolation between the
/// nearest observed neighbours; leading/trailing gaps copy the nearest
/// observed value. The mask is preserved so metrics can still exclude
/// imputed entries.
inline RawSeries interpolate_missing(const RawSeries& raw) {
    RawSeries out = raw;
    const std::size_t L = raw.n_steps, N = raw.n_nodes;
    for (std::size_t node = 0; node < N; ++node) {
        std::vector<std::size_t> observed;
        for (std::size_t t = 0; t < L; ++t)
            if (raw.missing_mask.at(t, node) == 1.0) observed.push_back(t);
        if (observed.empty()) {
            throw value_error("interpolate_missing: node " + std::to_string(node) +
                              " has no observed values");
        }
        std::size_t next_obs = 0;
        for (std::size_t t = 0; t < L; ++t) {
            if (raw.missing_mask.at(t, node) == 1.0) continue;
            while (next_obs < observed.size() && observed[next_obs] < t) ++next_obs;
            if (next_obs == 0) {
                out.values.at(t, node) = raw.values.at(observed.front(), node);
            } else if (next_obs == observed.size()) {
                out.values.at(t, node) = raw.values.at(observed.back(), node);
            } else {
                const std::size_t lo = observed[next_obs - 1];
                const std::size_t hi = observed[next_obs];
                const double w = static_cast<double>(t - lo) / static_cast<double>(hi - lo);
                out.values.at(t, node) = (1.0 - w) * raw.values.at(lo, node) +
                                         w * raw.values.at(hi, node);
            }
        }
    }
    return out;
}

/// Population mean/std over the given values.
inline NormStats fit_zscore(const Tensor& train_values) {
    const std::size_t n = train_values.size();
    if (n == 0) throw value_error("fit_zscore: empty input");
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += train_values[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = train_values[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    if (var == 0.0) throw value_error("fit_zscore: constant series (zero standard deviation)");
    return NormStats{mean, std::sqrt(var)};
}

inline Tensor apply_zscore(const Tensor& x, const NormStats& stats) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - stats.mean) / stats.std_dev;
    return out;
}

inline Tensor invert_zscore(const Tensor& x, const NormStats& stats) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * stats.std_dev + stats.mean;
    return out;
}

// ---------------------------------------------------------------------------
// windowing and splits
// ---------------------------------------------------------------------------

/// Assembles the sample anchored at t. Requires full history (t >= 7p - 1);
/// target rows beyond the series end are zero with mask 0, so forecasting
/// from the most recent anchors still works.
inline WindowSample make_window(const RawSeries& series, const ResolutionConfig& cfg,
                                std::size_t t) {
    cfg.validate();
    const std::size_t p = cfg.steps_per_day;
    const std::size_t S = cfg.history_len;
    const std::size_t T = cfg.horizon;
    const std::size_t week = cfg.week_stride();
    const std::size_t L = series.n_steps;
    if (t + 1 < week) {
        throw value_error("make_window: anchor " + std::to_string(t) +
                          " lacks a full week of history (needs t >= " +
                          std::to_string(week - 1) + ")");
    }
    if (t >= L) {
        throw value_error("make_window: anchor " + std::to_string(t) +
                          " is past the series end " + std::to_string(L - 1));
    }
    const std::size_t N = series.n_nodes;
    WindowSample w;
    w.t_anchor = t;
    w.x_current = Tensor({S, N});
    w.x_day = Tensor({S, N});
    w.x_week = Tensor({S, N});
    w.y = Tensor({T, N});
    w.y_mask = Tensor({T, N});
    for (std::size_t s = 0; s < S; ++s) {
        const std::size_t t_cur = t - S + 1 + s;
        const std::size_t t_day = t + 1 + s - p;
        const std::size_t t_week = t + 1 + s - week;
        for (std::size_t n = 0; n < N; ++n) {
            w.x_current.at(s, n) = series.values.at(t_cur, n);
            w.x_day.at(s, n) = series.values.at(t_day, n);
            w.x_week.at(s, n) = series.values.at(t_week, n);
        }
    }
    for (std::size_t tau = 0; tau < T; ++tau) {
        const std::size_t t_y = t + 1 + tau;
        for (std::size_t n = 0; n < N; ++n) {
            w.y.at(tau, n) = t_y < L ? series.values.at(t_y, n) : 0.0;
            w.y_mask.at(tau, n) = t_y < L ? series.missing_mask.at(t_y, n) : 0.0;
        }
    }
    return w;
}

/// Anchors range over [7p-1, L-T-1]; returns L - 7p - T + 1 samples when the
/// series is long enough, otherwise none. `warned` (when given) is set if
/// the series was too short.
inline std::vector<WindowSample> build_windows(const RawSeries& series,
                                               const ResolutionConfig& cfg,
                                               bool* warned = nullptr) {
    cfg.validate();
    const std::size_t L = series.n_steps;
    const std::size_t T = cfg.horizon;
    const std::size_t week = cfg.week_stride();
    if (warned) *warned = false;
    if (L < week + T) {
        if (warned) *warned = true;
        return {};
    }
    std::vector<WindowSample> out;
    out.reserve(L - week - T + 1);
    for (std::size_t t = week - 1; t + T <= L - 1; ++t) {
        out.push_back(make_window(series, cfg, t));
    }
    return out;
}

struct SplitSizes {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;
};

/// Chronological 6:2:2 split; flooring remainders go to the test slice.
inline SplitSizes split_622(std::size_t n_samples) {
    if (n_samples < 5) {
        throw value_error("split_622: need at least 5 samples, got " + std::to_string(n_samples));
    }
    SplitSizes s;
    s.train = static_cast<std::size_t>(0.6 * static_cast<double>(n_samples));
    s.val = static_cast<std::size_t>(0.2 * static_cast<double>(n_samples));
    s.test = n_samples - s.train - s.val;
    return s;
}

// ---------------------------------------------------------------------------
// synthetic generation
// ---------------------------------------------------------------------------

/// Per-node components of the synthetic daily cycle.
struct SynthSeasonal {
    std::vector<double> amplitude;
    std::vector<double> phase;
    std::vector<double> offset;
};

struct SynthConfig {
    std::size_t n_steps = 0;
    std::uint64_t seed = 0;
    double alpha = 0.9;       // diffusion coupling strength
    double noise_std = 0.08;  // innovation scale
    bool regime_switch = false;
    double amp_lo = 2.0, amp_hi = 6.0;
    double base_lo = 5.0, base_hi = 10.0;
};

/// Seasonal components are drawn first from the seed so tests can recompute
/// them independently of the recursion.
inline SynthSeasonal synth_seasonal(const SynthConfig& cfg, std::size_t n_nodes) {
    Rng rng(mix_seed(cfg.seed, 0x5ea50aa1ULL));
    SynthSeasonal s;
    for (std::size_t i = 0; i < n_nodes; ++i) s.amplitude.push_back(rng.uniform(cfg.amp_lo, cfg.amp_hi));
    for (std::size_t i = 0; i < n_nodes; ++i) s.phase.push_back(rng.uniform(0.0, 6.283185307179586));
    for (std::size_t i = 0; i < n_nodes; ++i) s.offset.push_back(rng.uniform(cfg.base_lo, cfg.base_hi));
    return s;
}

inline double synth_seasonal_value(const SynthSeasonal& s, std::size_t node, std::size_t t,
                                   std::size_t steps_per_day) {
    const double w = 2.0 * 3.141592653589793238462643 /
                     static_cast<double>(steps_per_day);
    return s.offset[node] + s.amplitude[node] * std::sin(w * static_cast<double>(t) + s.phase[node]);
}

/// Alternate coupling graph for the regime-switch mode: the static graph
/// under a seeded node relabelling, so the spatial structure genuinely
/// changes while degrees are preserved.
inline Tensor synth_permuted_coupling(const Tensor& normalized, std::uint64_t seed) {
    const std::size_t n = normalized.dim(0);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(mix_seed(seed, 0x9e20e7eULL));
    rng.shuffle(perm);
    Tensor out({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(perm[i], perm[j]) = normalized.at(i, j);
    return out;
}

/// Deterministic synthetic traffic: a per-node daily sinusoid driven through
/// graph diffusion, X^{t+1} = alpha * C * X^t + (1-alpha) * seasonal + noise.
/// With regime_switch the coupling matrix C alternates between the static
/// graph and its permuted twin every p/2 steps.
inline RawSeries synth_generate(const StaticGraph& graph, const ResolutionConfig& res,
                                const SynthConfig& cfg) {
    const std::size_t N = graph.n_nodes;
    const std::size_t L = cfg.n_steps;
    const std::size_t p = res.steps_per_day;
    const SynthSeasonal seasonal = synth_seasonal(cfg, N);
    const Tensor coupling_a = graph.normalized;
    const Tensor coupling_b =
        cfg.regime_switch ? synth_permuted_coupling(graph.normalized, cfg.seed) : coupling_a;
    Rng noise(mix_seed(cfg.seed, 0x401e5eULL));

    RawSeries out;
    out.n_steps = L;
    out.n_nodes = N;
    out.values = Tensor({L, N});
    out.missing_mask = Tensor::full({L, N}, 1.0);
    for (std::size_t n = 0; n < N; ++n)
        out.values.at(0, n) = synth_seasonal_value(seasonal, n, 0, p);
    const std::size_t half_day = p / 2;
    for (std::size_t t = 0; t + 1 < L; ++t) {
        const bool use_b = cfg.regime_switch && ((t / half_day) % 2 == 1);
        const Tensor& c = use_b ? coupling_b : coupling_a;
        for (std::size_t i = 0; i < N; ++i) {
            double diffused = 0.0;
            for (std::size_t j = 0; j < N; ++j) diffused += c.at(i, j) * out.values.at(t, j);
            double v = cfg.alpha * diffused +
                       (1.0 - cfg.alpha) * synth_seasonal_value(seasonal, i, t + 1, p);
            if (cfg.noise_std > 0.0) v += cfg.noise_std * noise.normal();
            out.values.at(t + 1, i) = v;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// file ingestion
// ---------------------------------------------------------------------------

/// Reads an L x N flow matrix (headerless CSV, NaN or empty field = missing).
inline RawSeries load_pems(const std::string& values_path) {
    Tensor m = csvio::read_matrix(values_path);
    RawSeries out;
    out.n_steps = m.dim(0);
    out.n_nodes = m.dim(1);
    out.missing_mask = Tensor({out.n_steps, out.n_nodes});
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (std::isnan(m[i])) {
            m[i] = 0.0;
        } else {
            out.missing_mask[i] = 1.0;
        }
    }
    out.values = std::move(m);
    return out;
}

/// Index of the first series row no training window touches. Training
/// windows (the first `n_train` anchors) see rows up to anchor + horizon,
/// so fitting statistics below this bound cannot leak validation/test data.
inline std::size_t train_row_end(const ResolutionConfig& cfg, std::size_t n_train) {
    return cfg.week_stride() - 1 + n_train + cfg.horizon;
}

/// Extracts the training-visible block of the series for fitting NormStats.
inline Tensor train_block(const RawSeries& series, const ResolutionConfig& cfg,
                          std::size_t n_train) {
    const std::size_t end = std::min(train_row_end(cfg, n_train), series.n_steps);
    Tensor block({end, series.n_nodes});
    std::copy(series.values.data(), series.values.data() + end * series.n_nodes, block.data());
    return block;
}

} // namespace dgrnn
