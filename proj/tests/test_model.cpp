#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dgrnn/checkpoint.hpp"
#include "dgrnn/grad_check.hpp"
#include "dgrnn/model.hpp"

using namespace dgrnn;

namespace {

ModelConfig tiny_config(std::size_t n_nodes = 4) {
    ModelConfig cfg;
    cfg.n_nodes = n_nodes;
    cfg.history_len = 2;
    cfg.horizon = 2;
    cfg.hidden_dim = 4;
    cfg.head_dim = 2;
    cfg.n_heads = 2;
    cfg.diffusion_steps = 2;
    return cfg;
}

WindowSample random_sample(const ModelConfig& cfg, Rng& rng) {
    WindowSample w;
    const Shape hist{cfg.history_len, cfg.n_nodes};
    const Shape fut{cfg.horizon, cfg.n_nodes};
    w.x_current = Tensor(hist);
    w.x_day = Tensor(hist);
    w.x_week = Tensor(hist);
    w.y = Tensor(fut);
    w.y_mask = Tensor::full(fut, 1.0);
    for (std::size_t i = 0; i < w.x_current.size(); ++i) {
        w.x_current[i] = rng.normal();
        w.x_day[i] = rng.normal();
        w.x_week[i] = rng.normal();
    }
    for (std::size_t i = 0; i < w.y.size(); ++i) w.y[i] = rng.normal();
    return w;
}

Tensor random_x_sa(const ModelConfig& cfg, Rng& rng) {
    Tensor t({cfg.history_len, cfg.n_nodes, kResolutions});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
    return t;
}

} // namespace

TEST(EpsSchedule, ClosedFormAtZero) {
    SamplingSchedule sched;
    sched.tau = 2000.0;
    EXPECT_DOUBLE_EQ(sched.eps_at(0), 2000.0 / 2001.0);
}

TEST(EpsSchedule, StrictlyDecreasing) {
    SamplingSchedule sched;
    sched.tau = 2000.0;
    double prev = 1.0;
    for (int i = 0; i <= 10000; i += 50) {
        const double e = sched.eps_at(i);
        EXPECT_LT(e, prev);
        EXPECT_GT(e, 0.0);
        EXPECT_LT(e, 1.0);
        prev = e;
    }
}

TEST(EpsSchedule, DecaysBelowTenPercentWithinBudget) {
    SamplingSchedule sched;
    sched.tau = 2000.0;
    const double budget = 10.0 * sched.tau * std::log(sched.tau);
    EXPECT_LT(sched.eps_at(budget), 0.1);
}

TEST(Encode, SingleStepEqualsOneCellStep) {
    ModelConfig cfg = tiny_config();
    cfg.history_len = 1;
    Model model(cfg, path_graph(4).normalized, 11);
    Rng rng(12);
    Tensor x_sa = random_x_sa(cfg, rng);
    Var via_encode = model.encode(constant(x_sa));
    Var direct = model.encoder.step(index_axis0(constant(x_sa), 0),
                                    constant(model.encoder.initial_state()));
    EXPECT_EQ(via_encode.value(), direct.value());
}

TEST(Encode, ZeroInputZeroParamsGiveZeroState) {
    ModelConfig cfg = tiny_config();
    Model model(cfg, path_graph(4).normalized, 13);
    for (Parameter* p : model.encoder.params()) p->tensor().fill(0.0);
    Tensor x_sa = Tensor::zeros({cfg.history_len, cfg.n_nodes, kResolutions});
    Tensor h = model.encode(constant(x_sa)).value();
    for (std::size_t i = 0; i < h.size(); ++i) EXPECT_DOUBLE_EQ(h[i], 0.0);
}

TEST(Encode, TwoStepsComposeChainedCellSteps) {
    ModelConfig cfg = tiny_config();
    Model model(cfg, path_graph(4).normalized, 14);
    Rng rng(15);
    Tensor x_sa = random_x_sa(cfg, rng);
    Var h0 = constant(model.encoder.initial_state());
    Var h1 = model.encoder.step(index_axis0(constant(x_sa), 0), h0);
    Var h2 = model.encoder.step(index_axis0(constant(x_sa), 1), h1);
    EXPECT_EQ(model.encode(constant(x_sa)).value(), h2.value());
}

TEST(Decode, TeacherForcingUsesGroundTruthInputs) {
    ModelConfig cfg = tiny_config();
    Model model(cfg, path_graph(4).normalized, 16);
    Rng rng(17);
    Tensor h0({cfg.n_nodes, cfg.hidden_dim});
    for (std::size_t i = 0; i < h0.size(); ++i) h0[i] = rng.normal();
    Tensor go({cfg.n_nodes, 1});
    for (std::size_t i = 0; i < go.size(); ++i) go[i] = rng.normal();
    Tensor teacher({cfg.horizon, cfg.n_nodes});
    for (std::size_t i = 0; i < teacher.size(); ++i) teacher[i] = rng.normal();

    Tensor got = model.decode(constant(h0), constant(go), &teacher, 1.0, 99).value();

    // manual roll feeding teacher rows
    Var h = constant(h0);
    Var input = constant(go);
    for (std::size_t tau = 0; tau < cfg.horizon; ++tau) {
        h = model.decoder.step(input, h);
        Tensor pred = matmul(h, model.output_proj.var).value();
        for (std::size_t n = 0; n < cfg.n_nodes; ++n)
            EXPECT_EQ(got.at(tau, n), pred.at(n, 0));
        Tensor next({cfg.n_nodes, 1});
        for (std::size_t n = 0; n < cfg.n_nodes; ++n) next.at(n, 0) = teacher.at(tau, n);
        input = constant(next);
    }
}

TEST(Decode, AutoregressiveFeedsOwnPredictions) {
    ModelConfig cfg = tiny_config();
    Model model(cfg, path_graph(4).normalized, 18);
    Rng rng(19);
    Tensor h0({cfg.n_nodes, cfg.hidden_dim});
    for (std::size_t i = 0; i < h0.size(); ++i) h0[i] = rng.normal();
    Tensor go({cfg.n_nodes, 1});
    for (std::size_t i = 0; i < go.size(); ++i) go[i] = rng.normal();

    Tensor got = model.decode(constant(h0), constant(go), nullptr, 0.0, 7).value();

    Var h = constant(h0);
    Var input = constant(go);
    for (std::size_t tau = 0; tau < cfg.horizon; ++tau) {
        h = model.decoder.step(input, h);
        Var pred = matmul(h, model.output_proj.var);
        for (std::size_t n = 0; n < cfg.n_nodes; ++n)
            EXPECT_EQ(got.at(tau, n), pred.value().at(n, 0));
        input = pred;
    }
}

TEST(Decode, HalfEpsFollowsSeededCoinFlips) {
    ModelConfig cfg = tiny_config();
    cfg.horizon = 5;
    Model model(cfg, path_graph(4).normalized, 20);
    Rng rng(21);
    Tensor h0({cfg.n_nodes, cfg.hidden_dim});
    for (std::size_t i = 0; i < h0.size(); ++i) h0[i] = rng.normal();
    Tensor go({cfg.n_nodes, 1});
    for (std::size_t i = 0; i < go.size(); ++i) go[i] = rng.normal();
    Tensor teacher({cfg.horizon, cfg.n_nodes});
    for (std::size_t i = 0; i < teacher.size(); ++i) teacher[i] = rng.normal();

    const std::uint64_t seed = 4242;
    Tensor got = model.decode(constant(h0), constant(go), &teacher, 0.5, seed).value();

    Rng coin(seed);
    Var h = constant(h0);
    Var input = constant(go);
    for (std::size_t tau = 0; tau < cfg.horizon; ++tau) {
        h = model.decoder.step(input, h);
        Var pred = matmul(h, model.output_proj.var);
        for (std::size_t n = 0; n < cfg.n_nodes; ++n)
            EXPECT_EQ(got.at(tau, n), pred.value().at(n, 0));
        if (tau + 1 < cfg.horizon) {
            if (coin.uniform() < 0.5) {
                Tensor next({cfg.n_nodes, 1});
                for (std::size_t n = 0; n < cfg.n_nodes; ++n) next.at(n, 0) = teacher.at(tau, n);
                input = constant(next);
            } else {
                input = pred;
            }
        }
    }
}

TEST(Decode, TeacherRequiredWhenEpsPositive) {
    ModelConfig cfg = tiny_config();
    Model model(cfg, path_graph(4).normalized, 22);
    Tensor h0 = Tensor::zeros({cfg.n_nodes, cfg.hidden_dim});
    Tensor go = Tensor::zeros({cfg.n_nodes, 1});
    EXPECT_THROW(model.decode(constant(h0), constant(go), nullptr, 0.5, 1), value_error);
}

TEST(Decode, TeacherAndAutoregressiveDiffer) {
    ModelConfig cfg = tiny_config();
    Model model(cfg, path_graph(4).normalized, 23);
    Rng rng(24);
    WindowSample sample = random_sample(cfg, rng);
    Tensor forced = model.forward(sample, 1.0, 5).value();
    Tensor free_run = model.forward(sample, 0.0, 5).value();
    double diff = 0.0;
    for (std::size_t i = 0; i < forced.size(); ++i) diff += std::fabs(forced[i] - free_run[i]);
    EXPECT_GT(diff, 1e-9);
}

TEST(Forward, OutputShapeAndDeterminism) {
    ModelConfig cfg = tiny_config(5);
    Model model(cfg, path_graph(5).normalized, 25);
    Rng rng(26);
    WindowSample sample = random_sample(cfg, rng);
    Tensor a = model.forward(sample, 0.5, 31).value();
    Tensor b = model.forward(sample, 0.5, 31).value();
    ASSERT_EQ(a.shape(), (Shape{cfg.horizon, cfg.n_nodes}));
    EXPECT_EQ(a, b);
    Tensor c = model.forward(sample, 0.5, 32).value();
    EXPECT_EQ(c.shape(), a.shape());
}

TEST(Forward, MatchesExplicitStageComposition) {
    ModelConfig cfg = tiny_config();
    Model model(cfg, path_graph(4).normalized, 27);
    Rng rng(28);
    WindowSample sample = random_sample(cfg, rng);
    const std::uint64_t seed = 77;
    Tensor via_forward = model.forward(sample, 1.0, seed).value();

    Var x_sa = model.attention.forward(constant(fuse_resolutions(sample)));
    Var h = model.encode(x_sa);
    Tensor go({cfg.n_nodes, 1});
    for (std::size_t n = 0; n < cfg.n_nodes; ++n)
        go.at(n, 0) = sample.x_current.at(cfg.history_len - 1, n);
    Tensor staged = model.decode(h, constant(go), &sample.y, 1.0, seed).value();
    EXPECT_EQ(via_forward, staged);  // bit-exact handoff through the stages
}

TEST(Forward, FiniteUnderBothRegimesForRandomParams) {
    for (std::uint64_t seed = 100; seed < 104; ++seed) {
        ModelConfig cfg = tiny_config();
        Model model(cfg, path_graph(4).normalized, seed);
        Rng rng(seed + 1000);
        WindowSample sample = random_sample(cfg, rng);
        EXPECT_TRUE(model.forward(sample, 1.0, seed).value().all_finite());
        EXPECT_TRUE(model.forward(sample, 0.0, seed).value().all_finite());
    }
}

TEST(Forward, PredictEqualsEpsZeroForward) {
    ModelConfig cfg = tiny_config();
    Model model(cfg, path_graph(4).normalized, 29);
    Rng rng(30);
    WindowSample sample = random_sample(cfg, rng);
    EXPECT_EQ(model.predict(sample), model.forward(sample, 0.0, 123).value());
}

TEST(Forward, MaeLossGradCheck) {
    for (std::uint64_t seed = 200; seed < 202; ++seed) {
        ModelConfig cfg = tiny_config();
        cfg.mask_mode = MaskMode::soft;
        Model model(cfg, path_graph(4).normalized, seed);
        Rng rng(seed + 50);
        WindowSample sample = random_sample(cfg, rng);
        auto params = model.params();
        auto loss = [&]() {
            Var pred = model.forward(sample, 0.5, 9);
            Var diff = abs_val(sub(pred, constant(sample.y)));
            return scale(sum_all(diff), 1.0 / static_cast<double>(sample.y.size()));
        };
        EXPECT_LT(grad_check(loss, params), 1e-4) << "seed " << seed;
    }
}

TEST(Checkpoint, RoundTripPreservesEverything) {
    ModelConfig cfg = tiny_config();
    Model model(cfg, path_graph(4).normalized, 31);
    ResolutionConfig res;
    res.steps_per_day = 48;
    res.history_len = 2;
    res.horizon = 2;
    NormStats stats{12.5, 3.25};
    Checkpoint ckpt = make_checkpoint(model, res, stats);
    std::string path = std::string(::testing::TempDir()) + "roundtrip.ckpt";
    save_checkpoint(path, ckpt);
    Checkpoint back = load_checkpoint(path);
    EXPECT_EQ(back.model.n_nodes, cfg.n_nodes);
    EXPECT_EQ(back.model.hidden_dim, cfg.hidden_dim);
    EXPECT_EQ(back.model.variant, cfg.variant);
    EXPECT_EQ(back.resolution.steps_per_day, 48u);
    EXPECT_DOUBLE_EQ(back.stats.mean, 12.5);
    EXPECT_DOUBLE_EQ(back.stats.std_dev, 3.25);
    ASSERT_EQ(back.tensors.size(), ckpt.tensors.size());
    for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
        EXPECT_EQ(back.tensors[i].first, ckpt.tensors[i].first);
        EXPECT_EQ(back.tensors[i].second, ckpt.tensors[i].second);  // bitwise
    }
}

TEST(Checkpoint, RestoredModelPredictsIdentically) {
    ModelConfig cfg = tiny_config();
    Model model(cfg, path_graph(4).normalized, 32);
    ResolutionConfig res;
    res.steps_per_day = 48;
    NormStats stats{0.0, 1.0};
    std::string path = std::string(::testing::TempDir()) + "restore.ckpt";
    save_checkpoint(path, make_checkpoint(model, res, stats));
    Checkpoint back = load_checkpoint(path);
    Model fresh(back.model, path_graph(4).normalized, 999);  // different init seed
    restore_parameters(fresh, back);
    Rng rng(33);
    WindowSample sample = random_sample(cfg, rng);
    EXPECT_EQ(model.predict(sample), fresh.predict(sample));
}

TEST(Checkpoint, MissingParameterNamed) {
    ModelConfig cfg = tiny_config();
    Model model(cfg, path_graph(4).normalized, 34);
    ResolutionConfig res;
    Checkpoint ckpt = make_checkpoint(model, res, NormStats{});
    ckpt.tensors.erase(ckpt.tensors.begin() + 3);  // drop one tensor
    const std::string dropped = "attention.query_proj";
    Checkpoint broken = ckpt;
    broken.tensors.clear();
    for (auto& [name, t] : ckpt.tensors)
        if (name != dropped) broken.tensors.emplace_back(name, t);
    try {
        restore_parameters(model, broken);
        FAIL() << "expected value_error";
    } catch (const value_error& e) {
        EXPECT_NE(std::string(e.what()).find(dropped), std::string::npos);
    }
}

TEST(Checkpoint, ShapeMismatchNamed) {
    ModelConfig cfg = tiny_config();
    Model model(cfg, path_graph(4).normalized, 35);
    ResolutionConfig res;
    Checkpoint ckpt = make_checkpoint(model, res, NormStats{});
    ckpt.tensors[0].second = Tensor::zeros({7, 7});
    try {
        restore_parameters(model, ckpt);
        FAIL() << "expected shape_error";
    } catch (const shape_error& e) {
        EXPECT_NE(std::string(e.what()).find(ckpt.tensors[0].first), std::string::npos);
    }
}

TEST(Checkpoint, BadMagicRejected) {
    std::string path = std::string(::testing::TempDir()) + "bad_magic.ckpt";
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE and some trailing garbage";
    }
    EXPECT_THROW(load_checkpoint(path), parse_error);
}

TEST(Checkpoint, TruncatedFileRejected) {
    ModelConfig cfg = tiny_config();
    Model model(cfg, path_graph(4).normalized, 36);
    ResolutionConfig res;
    std::string path = std::string(::testing::TempDir()) + "full.ckpt";
    save_checkpoint(path, make_checkpoint(model, res, NormStats{}));
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::string cut = std::string(::testing::TempDir()) + "cut.ckpt";
    {
        std::ofstream out(cut, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    EXPECT_THROW(load_checkpoint(cut), parse_error);
}
