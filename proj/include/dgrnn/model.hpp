#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "dgrnn/attention.hpp"
#include "dgrnn/cell.hpp"
#include "dgrnn/dataset.hpp"

namespace dgrnn {

struct ModelConfig {
    std::size_t n_nodes = 0;
    std::size_t history_len = 12;  // S
    std::size_t horizon = 12;      // T
    std::size_t attn_channels = kResolutions;
    std::size_t hidden_dim = 32;
    std::size_t head_dim = 16;
    std::size_t n_heads = 3;
    std::size_t diffusion_steps = 3;
    Variant variant = Variant::full;
    MaskMode mask_mode = MaskMode::hard;

    CellConfig encoder_cell() const {
        return CellConfig{n_nodes, attn_channels, hidden_dim, head_dim,
                          n_heads, diffusion_steps, variant, mask_mode};
    }
    // the decoder consumes one flow value per node
    CellConfig decoder_cell() const {
        return CellConfig{n_nodes, 1, hidden_dim, head_dim,
                          n_heads, diffusion_steps, variant, mask_mode};
    }

    void validate() const {
        if (n_nodes == 0 || history_len == 0 || horizon == 0) {
            throw config_error("model: n_nodes, history_len and horizon must be positive");
        }
        encoder_cell().validate();
        decoder_cell().validate();
    }
};

/// Teacher-forcing probability decay: eps_i = tau / (tau + exp(i / tau)).
struct SamplingSchedule {
    double tau = 2000.0;

    double eps_at(double iteration) const {
        return tau / (tau + std::exp(iteration / tau));
    }
};

/// Attention front end, recurrent encoder over the history, recurrent
/// decoder emitting one horizon step at a time through a linear output head.
class Model {
public:
    Model(const ModelConfig& cfg, Tensor static_adj, std::uint64_t init_seed)
        : cfg_(cfg),
          rng_(init_seed),
          attention(cfg.attn_channels, rng_),
          encoder(cfg.encoder_cell(), static_adj, "encoder", rng_),
          decoder(cfg.decoder_cell(), std::move(static_adj), "decoder", rng_),
          output_proj("output_proj", init_uniform({cfg.hidden_dim, 1}, cfg.hidden_dim, rng_)) {
        cfg_.validate();
    }

    const ModelConfig& config() const { return cfg_; }

    /// [S x N x C] -> final hidden state [N x q], starting from zeros.
    Var encode(const Var& x_sa) const {
        Var h = constant(encoder.initial_state());
        for (std::size_t s = 0; s < cfg_.history_len; ++s) {
            h = encoder.step(index_axis0(x_sa, s), h);
        }
        return h;
    }

    /// Rolls the decoder T steps from hidden state h. go is the last
    /// observed value per node [N x 1]. Each step's input is the previous
    /// target row with probability eps, otherwise the model's own previous
    /// output (gradient flows through that path). Returns [T x N].
    Var decode(const Var& h0, const Var& go, const Tensor* teacher, double eps,
               std::uint64_t seed) const {
        if (eps > 0.0 && teacher == nullptr) {
            throw value_error("decode: teacher targets required when eps > 0");
        }
        Rng coin(seed);
        Var h = h0;
        Var input = go;
        std::vector<Var> rows;
        rows.reserve(cfg_.horizon);
        for (std::size_t tau = 0; tau < cfg_.horizon; ++tau) {
            h = decoder.step(input, h);
            Var pred = reshape(matmul(h, output_proj.var), {cfg_.n_nodes});
            rows.push_back(pred);
            if (tau + 1 < cfg_.horizon) {
                if (coin.uniform() < eps) {
                    Tensor t_row({cfg_.n_nodes, 1});
                    for (std::size_t n = 0; n < cfg_.n_nodes; ++n)
                        t_row.at(n, 0) = teacher->at(tau, n);
                    input = constant(std::move(t_row));
                } else {
                    input = reshape(pred, {cfg_.n_nodes, 1});
                }
            }
        }
        return stack_axis0(rows);
    }

    /// Normalized-scale forecast [T x N] for one normalized sample.
    Var forward(const WindowSample& sample, double eps, std::uint64_t seed) const {
        const Tensor fused = fuse_resolutions(sample);
        const Var x_sa = attention.forward(constant(fused));
        const Var h = encode(x_sa);
        Tensor go({cfg_.n_nodes, 1});
        for (std::size_t n = 0; n < cfg_.n_nodes; ++n)
            go.at(n, 0) = sample.x_current.at(cfg_.history_len - 1, n);
        return decode(h, constant(std::move(go)), &sample.y, eps, seed);
    }

    /// Inference: autoregressive decode, no teacher.
    Tensor predict(const WindowSample& sample) const {
        const Tensor fused = fuse_resolutions(sample);
        const Var x_sa = attention.forward(constant(fused));
        const Var h = encode(x_sa);
        Tensor go({cfg_.n_nodes, 1});
        for (std::size_t n = 0; n < cfg_.n_nodes; ++n)
            go.at(n, 0) = sample.x_current.at(cfg_.history_len - 1, n);
        return decode(h, constant(std::move(go)), nullptr, 0.0, 0).value();
    }

    std::vector<Parameter*> params() {
        std::vector<Parameter*> out = attention.params();
        for (Parameter* p : encoder.params()) out.push_back(p);
        for (Parameter* p : decoder.params()) out.push_back(p);
        out.push_back(&output_proj);
        return out;
    }

    void set_mask_mode(MaskMode m) {
        cfg_.mask_mode = m;
        encoder.set_mask_mode(m);
        decoder.set_mask_mode(m);
    }

private:
    ModelConfig cfg_;
    Rng rng_;  // consumed during construction only

public:
    AttentionLayer attention;
    Cell encoder;
    Cell decoder;
    Parameter output_proj;
};

} // namespace dgrnn
