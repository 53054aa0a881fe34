#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <vector>

#include "dgrnn/dataset.hpp"

using namespace dgrnn;

namespace {

RawSeries ramp_series(std::size_t L, std::size_t N) {
    // values.at(t, n) = 100*t + n makes every entry identify its own (t, n)
    RawSeries s;
    s.n_steps = L;
    s.n_nodes = N;
    s.values = Tensor({L, N});
    s.missing_mask = Tensor::full({L, N}, 1.0);
    for (std::size_t t = 0; t < L; ++t)
        for (std::size_t n = 0; n < N; ++n)
            s.values.at(t, n) = 100.0 * static_cast<double>(t) + static_cast<double>(n);
    return s;
}

// Brute-force window enumerator: tries every anchor t and accepts it only if
// every required source row index is in range, computed straight from the
// row-offset definitions with signed arithmetic.
struct OracleWindow {
    long t;
    std::vector<long> cur_rows, day_rows, week_rows, y_rows;
};

std::vector<OracleWindow> oracle_windows(long L, long p, long S, long T) {
    std::vector<OracleWindow> out;
    for (long t = 0; t < L; ++t) {
        OracleWindow w;
        w.t = t;
        bool ok = true;
        for (long s = 0; s < S && ok; ++s) {
            long cur = t - S + 1 + s;
            long day = t + 1 + s - p;
            long week = t + 1 + s - 7 * p;
            if (cur < 0 || cur >= L || day < 0 || day >= L || week < 0 || week >= L) ok = false;
            w.cur_rows.push_back(cur);
            w.day_rows.push_back(day);
            w.week_rows.push_back(week);
        }
        for (long tau = 0; tau < T && ok; ++tau) {
            long y = t + 1 + tau;
            if (y < 0 || y >= L) ok = false;
            w.y_rows.push_back(y);
        }
        if (ok) out.push_back(std::move(w));
    }
    return out;
}

} // namespace

TEST(Interpolate, GapFilledLinearly) {
    RawSeries s = ramp_series(5, 1);
    s.values.at(2, 0) = -1.0;
    s.missing_mask.at(2, 0) = 0.0;
    RawSeries fixed = interpolate_missing(s);
    EXPECT_DOUBLE_EQ(fixed.values.at(2, 0), 200.0);
    EXPECT_DOUBLE_EQ(fixed.missing_mask.at(2, 0), 0.0);
    EXPECT_DOUBLE_EQ(fixed.values.at(1, 0), 100.0);
}

TEST(Interpolate, LeadingAndTrailingGapsCopyNearest) {
    RawSeries s = ramp_series(4, 1);
    s.missing_mask.at(0, 0) = 0.0;
    s.missing_mask.at(3, 0) = 0.0;
    RawSeries fixed = interpolate_missing(s);
    EXPECT_DOUBLE_EQ(fixed.values.at(0, 0), 100.0);
    EXPECT_DOUBLE_EQ(fixed.values.at(3, 0), 200.0);
}

TEST(Interpolate, MultiStepGapIsEvenlySpaced) {
    RawSeries s = ramp_series(5, 1);
    s.values.at(0, 0) = 0.0;
    s.values.at(4, 0) = 8.0;
    for (std::size_t t = 1; t <= 3; ++t) s.missing_mask.at(t, 0) = 0.0;
    RawSeries fixed = interpolate_missing(s);
    EXPECT_DOUBLE_EQ(fixed.values.at(1, 0), 2.0);
    EXPECT_DOUBLE_EQ(fixed.values.at(2, 0), 4.0);
    EXPECT_DOUBLE_EQ(fixed.values.at(3, 0), 6.0);
}

TEST(Interpolate, AllMissingNodeThrows) {
    RawSeries s = ramp_series(3, 2);
    for (std::size_t t = 0; t < 3; ++t) s.missing_mask.at(t, 1) = 0.0;
    EXPECT_THROW(interpolate_missing(s), value_error);
}

TEST(Zscore, HandComputedStats) {
    Tensor x({4}, {1.0, 2.0, 3.0, 4.0});
    NormStats st = fit_zscore(x);
    EXPECT_DOUBLE_EQ(st.mean, 2.5);
    EXPECT_DOUBLE_EQ(st.std_dev, std::sqrt(1.25));
}

TEST(Zscore, RoundTripTight) {
    Rng rng(12);
    Tensor x({200});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-50.0, 400.0);
    NormStats st = fit_zscore(x);
    Tensor back = invert_zscore(apply_zscore(x, st), st);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-9);
}

TEST(Zscore, NormalizedHasZeroMeanUnitVar) {
    Rng rng(13);
    Tensor x({500});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal() * 7.0 + 100.0;
    NormStats st = fit_zscore(x);
    Tensor z = apply_zscore(x, st);
    double mean = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) mean += z[i];
    mean /= static_cast<double>(z.size());
    double var = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) var += (z[i] - mean) * (z[i] - mean);
    var /= static_cast<double>(z.size());
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-12);
}

TEST(Zscore, ConstantSeriesThrows) {
    Tensor x = Tensor::full({10}, 3.0);
    EXPECT_THROW(fit_zscore(x), value_error);
}

TEST(Windows, CountMatchesClosedForm) {
    ResolutionConfig cfg;
    cfg.steps_per_day = 6;
    cfg.history_len = 4;
    cfg.horizon = 3;
    const std::size_t L = 100;
    RawSeries s = ramp_series(L, 2);
    auto windows = build_windows(s, cfg);
    EXPECT_EQ(windows.size(), L - 7 * cfg.steps_per_day - cfg.horizon + 1);
    EXPECT_EQ(windows.front().t_anchor, 7 * cfg.steps_per_day - 1);
    EXPECT_EQ(windows.back().t_anchor, L - cfg.horizon - 1);
}

TEST(Windows, MinimalSeriesYieldsOneWindow) {
    ResolutionConfig cfg;
    cfg.steps_per_day = 4;
    cfg.history_len = 2;
    cfg.horizon = 2;
    RawSeries s = ramp_series(7 * 4 + 2, 1);
    auto windows = build_windows(s, cfg);
    ASSERT_EQ(windows.size(), 1u);
    EXPECT_EQ(windows[0].t_anchor, 7u * 4u - 1u);
}

TEST(Windows, TooShortSeriesWarnsAndReturnsEmpty) {
    ResolutionConfig cfg;
    cfg.steps_per_day = 4;
    cfg.horizon = 2;
    cfg.history_len = 2;
    RawSeries s = ramp_series(7 * 4 + 1, 1);
    bool warned = false;
    auto windows = build_windows(s, cfg, &warned);
    EXPECT_TRUE(windows.empty());
    EXPECT_TRUE(warned);
}

TEST(Windows, RowsMatchOffsetDefinitions) {
    ResolutionConfig cfg;
    cfg.steps_per_day = 5;
    cfg.history_len = 3;
    cfg.horizon = 2;
    RawSeries s = ramp_series(60, 3);
    auto windows = build_windows(s, cfg);
    ASSERT_FALSE(windows.empty());
    const auto& w = windows[4];
    const std::size_t t = w.t_anchor;
    for (std::size_t i = 0; i < cfg.history_len; ++i) {
        EXPECT_DOUBLE_EQ(w.x_current.at(i, 1), s.values.at(t - cfg.history_len + 1 + i, 1));
        EXPECT_DOUBLE_EQ(w.x_day.at(i, 1), s.values.at(t + 1 + i - cfg.steps_per_day, 1));
        EXPECT_DOUBLE_EQ(w.x_week.at(i, 1), s.values.at(t + 1 + i - 7 * cfg.steps_per_day, 1));
    }
    for (std::size_t tau = 0; tau < cfg.horizon; ++tau)
        EXPECT_DOUBLE_EQ(w.y.at(tau, 2), s.values.at(t + 1 + tau, 2));
}

TEST(Windows, MatchesBruteForceOracleAcrossRandomConfigs) {
    Rng rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        const long p = 2 + static_cast<long>(rng.uniform(0.0, 8.0));
        const long S = 1 + static_cast<long>(rng.uniform(0.0, static_cast<double>(p - 1)));
        const long T = 1 + static_cast<long>(rng.uniform(0.0, 6.0));
        const long L = 7 * p + T + static_cast<long>(rng.uniform(0.0, 40.0));
        ResolutionConfig cfg;
        cfg.steps_per_day = static_cast<std::size_t>(p);
        cfg.history_len = static_cast<std::size_t>(S);
        cfg.horizon = static_cast<std::size_t>(T);
        RawSeries s = ramp_series(static_cast<std::size_t>(L), 1);
        auto fast = build_windows(s, cfg);
        auto slow = oracle_windows(L, p, S, T);
        ASSERT_EQ(fast.size(), slow.size()) << "p=" << p << " S=" << S << " T=" << T << " L=" << L;
        for (std::size_t k = 0; k < fast.size(); ++k) {
            EXPECT_EQ(static_cast<long>(fast[k].t_anchor), slow[k].t);
            for (long i = 0; i < S; ++i) {
                EXPECT_DOUBLE_EQ(fast[k].x_current.at(i, 0), s.values.at(slow[k].cur_rows[i], 0));
                EXPECT_DOUBLE_EQ(fast[k].x_day.at(i, 0), s.values.at(slow[k].day_rows[i], 0));
                EXPECT_DOUBLE_EQ(fast[k].x_week.at(i, 0), s.values.at(slow[k].week_rows[i], 0));
            }
            for (long tau = 0; tau < T; ++tau)
                EXPECT_DOUBLE_EQ(fast[k].y.at(tau, 0), s.values.at(slow[k].y_rows[tau], 0));
        }
    }
}

TEST(Windows, HistoryLongerThanDayRejected) {
    ResolutionConfig cfg;
    cfg.steps_per_day = 2;
    cfg.history_len = 3;
    cfg.horizon = 1;
    RawSeries s = ramp_series(40, 1);
    EXPECT_THROW(build_windows(s, cfg), config_error);
}

TEST(Windows, DayShiftConsistency) {
    // x_day[s] at anchor t equals y[s] of the window anchored at t - p
    ResolutionConfig cfg;
    cfg.steps_per_day = 5;
    cfg.history_len = 3;
    cfg.horizon = 3;
    RawSeries s = ramp_series(80, 2);
    auto windows = build_windows(s, cfg);
    ASSERT_GT(windows.size(), cfg.steps_per_day);
    for (std::size_t k = cfg.steps_per_day; k < windows.size(); ++k) {
        const auto& later = windows[k];
        const auto& earlier = windows[k - cfg.steps_per_day];
        ASSERT_EQ(earlier.t_anchor + cfg.steps_per_day, later.t_anchor);
        for (std::size_t i = 0; i < cfg.history_len; ++i)
            for (std::size_t n = 0; n < 2; ++n)
                EXPECT_DOUBLE_EQ(later.x_day.at(i, n), earlier.y.at(i, n));
    }
}

TEST(Split, ExactPartition) {
    for (std::size_t n : {5u, 10u, 17u, 100u, 101u, 102u, 103u, 104u, 9999u}) {
        SplitSizes s = split_622(n);
        EXPECT_EQ(s.train + s.val + s.test, n);
        EXPECT_EQ(s.train, static_cast<std::size_t>(0.6 * static_cast<double>(n)));
        EXPECT_EQ(s.val, static_cast<std::size_t>(0.2 * static_cast<double>(n)));
        EXPECT_GE(s.test, s.val);
    }
}

TEST(Split, TenSamples) {
    SplitSizes s = split_622(10);
    EXPECT_EQ(s.train, 6u);
    EXPECT_EQ(s.val, 2u);
    EXPECT_EQ(s.test, 2u);
}

TEST(Split, TooFewSamplesThrows) {
    EXPECT_THROW(split_622(4), value_error);
}

TEST(TrainBlock, StopsBeforeFirstValidationRow) {
    ResolutionConfig cfg;
    cfg.steps_per_day = 4;
    cfg.history_len = 2;
    cfg.horizon = 2;
    RawSeries s = ramp_series(60, 1);
    auto windows = build_windows(s, cfg);
    SplitSizes split = split_622(windows.size());
    const std::size_t end = train_row_end(cfg, split.train);
    // last train window's furthest target row is anchor + horizon
    EXPECT_EQ(end, windows[split.train - 1].t_anchor + cfg.horizon + 1);
    // first validation window's anchor sits inside its own history, beyond nothing before `end`
    Tensor block = train_block(s, cfg, split.train);
    EXPECT_EQ(block.dim(0), end);
    EXPECT_DOUBLE_EQ(block.at(end - 1, 0), s.values.at(end - 1, 0));
}

TEST(Synth, SeasonalParamsReproducibleFromSeed) {
    SynthConfig cfg;
    cfg.seed = 21;
    SynthSeasonal a = synth_seasonal(cfg, 5);
    SynthSeasonal b = synth_seasonal(cfg, 5);
    EXPECT_EQ(a.amplitude, b.amplitude);
    EXPECT_EQ(a.phase, b.phase);
    EXPECT_EQ(a.offset, b.offset);
    for (double amp : a.amplitude) {
        EXPECT_GE(amp, cfg.amp_lo);
        EXPECT_LT(amp, cfg.amp_hi);
    }
}

TEST(Synth, NoiselessRecursionMatchesHandRollout) {
    ResolutionConfig res;
    res.steps_per_day = 6;
    StaticGraph g = path_graph(3);
    SynthConfig cfg;
    cfg.n_steps = 20;
    cfg.seed = 5;
    cfg.alpha = 0.8;
    cfg.noise_std = 0.0;
    RawSeries s = synth_generate(g, res, cfg);
    SynthSeasonal seasonal = synth_seasonal(cfg, 3);
    Tensor x({3});
    for (std::size_t n = 0; n < 3; ++n) x[n] = synth_seasonal_value(seasonal, n, 0, 6);
    for (std::size_t n = 0; n < 3; ++n) EXPECT_DOUBLE_EQ(s.values.at(0, n), x[n]);
    for (std::size_t t = 1; t < 20; ++t) {
        Tensor next({3});
        for (std::size_t i = 0; i < 3; ++i) {
            double d = 0.0;
            for (std::size_t j = 0; j < 3; ++j) d += g.normalized.at(i, j) * x[j];
            next[i] = cfg.alpha * d + (1.0 - cfg.alpha) * synth_seasonal_value(seasonal, i, t, 6);
        }
        x = next;
        for (std::size_t n = 0; n < 3; ++n) EXPECT_DOUBLE_EQ(s.values.at(t, n), x[n]);
    }
}

TEST(Synth, SameSeedSameSeries) {
    ResolutionConfig res;
    res.steps_per_day = 8;
    StaticGraph g = path_graph(4);
    SynthConfig cfg;
    cfg.n_steps = 100;
    cfg.seed = 77;
    RawSeries a = synth_generate(g, res, cfg);
    RawSeries b = synth_generate(g, res, cfg);
    EXPECT_EQ(a.values, b.values);
}

TEST(Synth, DifferentSeedsDiffer) {
    ResolutionConfig res;
    res.steps_per_day = 8;
    StaticGraph g = path_graph(4);
    SynthConfig cfg;
    cfg.n_steps = 100;
    cfg.seed = 77;
    RawSeries a = synth_generate(g, res, cfg);
    cfg.seed = 78;
    RawSeries b = synth_generate(g, res, cfg);
    EXPECT_NE(a.values, b.values);
}

TEST(Synth, RegimeSwitchChangesTrajectoryAfterHalfDay) {
    ResolutionConfig res;
    res.steps_per_day = 10;
    StaticGraph g = path_graph(6);
    SynthConfig cfg;
    cfg.n_steps = 40;
    cfg.seed = 3;
    cfg.noise_std = 0.0;
    RawSeries plain = synth_generate(g, res, cfg);
    cfg.regime_switch = true;
    RawSeries switched = synth_generate(g, res, cfg);
    // identical while the first regime is active
    for (std::size_t t = 0; t <= res.steps_per_day / 2; ++t)
        for (std::size_t n = 0; n < 6; ++n)
            EXPECT_DOUBLE_EQ(plain.values.at(t, n), switched.values.at(t, n));
    // diverged afterwards
    double diff = 0.0;
    for (std::size_t n = 0; n < 6; ++n)
        diff += std::fabs(plain.values.at(20, n) - switched.values.at(20, n));
    EXPECT_GT(diff, 1e-6);
}

TEST(Synth, AllFinite) {
    ResolutionConfig res;
    res.steps_per_day = 48;
    StaticGraph g = path_graph(8);
    SynthConfig cfg;
    cfg.n_steps = 6 * 7 * 48;
    cfg.seed = 7;
    RawSeries s = synth_generate(g, res, cfg);
    EXPECT_TRUE(s.values.all_finite());
}

TEST(LoadPems, NanBecomesMaskedZero) {
    std::string path = std::string(::testing::TempDir()) + "pems_small.csv";
    {
        std::ofstream out(path);
        out << "1.5,2.5\nnan,4.0\n5.0,\n";
    }
    RawSeries s = load_pems(path);
    EXPECT_EQ(s.n_steps, 3u);
    EXPECT_EQ(s.n_nodes, 2u);
    EXPECT_DOUBLE_EQ(s.values.at(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(s.missing_mask.at(1, 0), 0.0);
    EXPECT_DOUBLE_EQ(s.values.at(2, 1), 0.0);
    EXPECT_DOUBLE_EQ(s.missing_mask.at(2, 1), 0.0);
    EXPECT_DOUBLE_EQ(s.values.at(0, 0), 1.5);
    EXPECT_DOUBLE_EQ(s.missing_mask.at(0, 0), 1.0);
}

TEST(LoadPems, RaggedRowNamesRowNumber) {
    std::string path = std::string(::testing::TempDir()) + "pems_ragged.csv";
    {
        std::ofstream out(path);
        out << "1,2\n3,4,5\n";
    }
    try {
        load_pems(path);
        FAIL() << "expected parse_error";
    } catch (const parse_error& e) {
        EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
    }
}
