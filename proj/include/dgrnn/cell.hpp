#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dgrnn/autodiff.hpp"
#include "dgrnn/errors.hpp"
#include "dgrnn/graph.hpp"

namespace dgrnn {

/// Ablation lattice. Each step adds one mechanism on top of the previous:
///   static_only: diffusion over the fixed graph, nothing learned about structure
///   multi_graph: adds learned per-head graphs, mixed with fixed uniform weights
///   dyn_weights: adds input-dependent mixing weights
///   full:        adds the learned sparsifying mask on the mixed graph
enum class Variant { static_only, multi_graph, dyn_weights, full };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::static_only: return "s";
        case Variant::multi_graph: return "sm";
        case Variant::dyn_weights: return "smd";
        case Variant::full: return "full";
    }
    return "?";
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "s") return Variant::static_only;
    if (s == "sm") return Variant::multi_graph;
    if (s == "smd") return Variant::dyn_weights;
    if (s == "full") return Variant::full;
    throw config_error("unknown variant '" + s + "' (expected s, sm, smd or full)");
}

/// How the sparsifying mask behaves. `hard` is the production rule: exact
/// 0/1 forward, gradients routed through the gate activation (straight
/// through). `soft` uses the gate activation itself as the mask, which is
/// the differentiable surrogate whose true gradient equals the straight
/// through rule; `frozen` samples the hard mask once per step and detaches
/// it. The last two exist so finite differences can audit the backward pass.
enum class MaskMode { hard, soft, frozen };

struct CellConfig {
    std::size_t n_nodes = 0;
    std::size_t in_channels = 0;
    std::size_t hidden_dim = 0;       // q
    std::size_t head_dim = 0;         // width of one graph head
    std::size_t n_heads = 0;          // m
    std::size_t diffusion_steps = 1;  // K
    Variant variant = Variant::full;
    MaskMode mask_mode = MaskMode::hard;

    std::size_t input_dim() const { return in_channels + hidden_dim; }

    void validate() const {
        if (n_nodes == 0 || in_channels == 0 || hidden_dim == 0) {
            throw config_error("cell: n_nodes, in_channels and hidden_dim must be positive");
        }
        if (diffusion_steps < 1) throw config_error("cell: diffusion_steps must be >= 1");
        if (variant != Variant::static_only && (n_heads < 1 || head_dim < 1)) {
            throw config_error("cell: n_heads and head_dim must be positive for dynamic variants");
        }
    }
};

/// Everything that went into one step's mixed adjacency, for inspection.
struct FusedAdjacency {
    Tensor graphs;   // [(n_graphs) x N x N], static graph last
    Tensor weights;  // [n_graphs]
    Tensor mask;     // [N x N]
    Tensor fused;    // [N x N]
};

/// Recurrent cell whose GRU gates use diffusion convolution over a graph
/// mixed per step from learned heads and the fixed topology.
class Cell {
public:
    Cell(const CellConfig& cfg, Tensor static_adj, const std::string& prefix, Rng& rng)
        : cfg_(cfg), static_adj_(std::move(static_adj)) {
        cfg_.validate();
        const std::size_t N = cfg_.n_nodes;
        if (static_adj_.shape() != Shape{N, N}) {
            throw shape_error("cell: static adjacency must be [" + std::to_string(N) + " x " +
                              std::to_string(N) + "], got " + shape_str(static_adj_.shape()));
        }
        const std::size_t d_in = cfg_.input_dim();
        const std::size_t q = cfg_.hidden_dim;
        reset_w = Parameter(prefix + ".reset_w", init_uniform({d_in, q}, d_in, rng));
        reset_b = Parameter(prefix + ".reset_b", Tensor::zeros({q}));
        update_w = Parameter(prefix + ".update_w", init_uniform({d_in, q}, d_in, rng));
        update_b = Parameter(prefix + ".update_b", Tensor::zeros({q}));
        cand_w = Parameter(prefix + ".cand_w", init_uniform({d_in, q}, d_in, rng));
        cand_b = Parameter(prefix + ".cand_b", Tensor::zeros({q}));
        if (cfg_.variant != Variant::static_only) {
            const std::size_t span = cfg_.n_heads * cfg_.head_dim;
            graph_src_proj = Parameter(prefix + ".graph_src_proj", init_uniform({d_in, span}, d_in, rng));
            graph_dst_proj = Parameter(prefix + ".graph_dst_proj", init_uniform({d_in, span}, d_in, rng));
        }
        if (cfg_.variant == Variant::dyn_weights || cfg_.variant == Variant::full) {
            weight_proj = Parameter(prefix + ".weight_proj",
                                    init_uniform({d_in, cfg_.n_heads + 1}, d_in, rng));
        }
        if (cfg_.variant == Variant::full) {
            mask_src_proj = Parameter(prefix + ".mask_src_proj",
                                      init_uniform({d_in, cfg_.head_dim}, d_in, rng));
            mask_dst_proj = Parameter(prefix + ".mask_dst_proj",
                                      init_uniform({d_in, cfg_.head_dim}, d_in, rng));
        }
    }

    const CellConfig& config() const { return cfg_; }
    const Tensor& static_adjacency() const { return static_adj_; }

    /// I = x ‖ h along the feature axis.
    static Var build_input(const Var& x_t, const Var& h_prev) {
        return concat_last_axis({x_t, h_prev});
    }

    /// Learned graph for one head: rows of softmax(relu(P1 P2^T)).
    Var dynamic_graph(const Var& input, std::size_t head) const {
        const std::size_t lo = head * cfg_.head_dim;
        const std::size_t hi = lo + cfg_.head_dim;
        const Var p1 = slice_last_axis(matmul(input, graph_src_proj.var), lo, hi);
        const Var p2 = slice_last_axis(matmul(input, graph_dst_proj.var), lo, hi);
        return softmax_rows(relu(matmul(p1, transpose(p2))));
    }

    /// Mixing weights over the learned heads plus the static graph (last).
    Var mixing_weights(const Var& input) const {
        if (weight_override) return constant(*weight_override);
        const std::size_t n_graphs = cfg_.n_heads + 1;
        switch (cfg_.variant) {
            case Variant::static_only: {
                Tensor w = Tensor::zeros({1});
                w[0] = 1.0;
                return constant(w);
            }
            case Variant::multi_graph:
                return constant(Tensor::full({n_graphs}, 1.0 / static_cast<double>(n_graphs)));
            default:
                return softmax_rows(mean_axis0(matmul(input, weight_proj.var)));
        }
    }

    /// (mask, gate activation z). z = sigmoid(phi4(I) phi5(I)^T); the mask's
    /// forward/backward pair depends on mask_mode.
    std::pair<Var, Var> gated_kernel(const Var& input) const {
        const Var a = matmul(input, mask_src_proj.var);
        const Var b = matmul(input, mask_dst_proj.var);
        const Var z = sigmoid(matmul(a, transpose(b)));
        switch (cfg_.mask_mode) {
            case MaskMode::soft:
                return {z, z};
            case MaskMode::frozen: {
                Tensor m(z.value().shape());
                for (std::size_t i = 0; i < m.size(); ++i) m[i] = z.value()[i] > 0.5 ? 1.0 : 0.0;
                return {constant(std::move(m)), z};
            }
            case MaskMode::hard:
            default:
                return {hard_threshold(z, 0.5), z};
        }
    }

    /// Mixed per-step adjacency D̂ = (sum_e w_e G_e) ⊙ M, static graph last.
    Var fused_adjacency(const Var& input) const {
        if (cfg_.variant == Variant::static_only) {
            return constant(static_adj_);
        }
        const Var w = mixing_weights(input);
        Var acc;
        for (std::size_t e = 0; e < cfg_.n_heads; ++e) {
            Var term = mul_scalar(index_flat(w, e), dynamic_graph(input, e));
            acc = acc.defined() ? add(acc, term) : term;
        }
        Var static_term = mul_scalar(index_flat(w, cfg_.n_heads), constant(static_adj_));
        acc = acc.defined() ? add(acc, static_term) : static_term;
        if (cfg_.variant == Variant::full && !mask_override_ones) {
            acc = hadamard(acc, gated_kernel(input).first);
        }
        return acc;
    }

    /// sum_{k=0}^{K-1} adj^k x, accumulated hop by hop.
    static Var diffusion_conv(const Var& adj, const Var& x, std::size_t steps) {
        Var acc = x;
        Var hop = x;
        for (std::size_t k = 1; k < steps; ++k) {
            hop = matmul(adj, hop);
            acc = add(acc, hop);
        }
        return acc;
    }

    /// One GRU step. The same mixed adjacency, derived from I = x ‖ h,
    /// serves the reset, update and candidate convolutions.
    Var step(const Var& x_t, const Var& h_prev) const {
        const Var input = build_input(x_t, h_prev);
        const Var adj = fused_adjacency(input);
        const Var conv_in = diffusion_conv(adj, input, cfg_.diffusion_steps);
        const Var r = sigmoid(linear(conv_in, reset_w.var, &reset_b.var));
        const Var u = sigmoid(linear(conv_in, update_w.var, &update_b.var));
        const Var gated = concat_last_axis({x_t, hadamard(r, h_prev)});
        const Var conv_c = diffusion_conv(adj, gated, cfg_.diffusion_steps);
        const Var cand = tanh_act(linear(conv_c, cand_w.var, &cand_b.var));
        const Var keep = hadamard(u, h_prev);
        const Var ones = constant(Tensor::full(u.shape(), 1.0));
        return add(keep, hadamard(sub(ones, u), cand));
    }

    Tensor initial_state() const { return Tensor::zeros({cfg_.n_nodes, cfg_.hidden_dim}); }

    /// Evaluates one step's graph pipeline on plain tensors, for inspection.
    FusedAdjacency snapshot(const Tensor& x_t, const Tensor& h_prev) const {
        const Var input = build_input(constant(x_t), constant(h_prev));
        FusedAdjacency out;
        const std::size_t N = cfg_.n_nodes;
        const bool dynamic = cfg_.variant != Variant::static_only;
        const std::size_t n_graphs = dynamic ? cfg_.n_heads + 1 : 1;
        out.graphs = Tensor({n_graphs, N, N});
        for (std::size_t e = 0; e + 1 < n_graphs; ++e) {
            Tensor g = dynamic_graph(input, e).value();
            std::copy(g.data(), g.data() + N * N, out.graphs.data() + e * N * N);
        }
        std::copy(static_adj_.data(), static_adj_.data() + N * N,
                  out.graphs.data() + (n_graphs - 1) * N * N);
        out.weights = mixing_weights(input).value();
        if (cfg_.variant == Variant::full && !mask_override_ones) {
            out.mask = gated_kernel(input).first.value();
        } else {
            out.mask = Tensor::full({N, N}, 1.0);
        }
        out.fused = fused_adjacency(input).value();
        return out;
    }

    std::vector<Parameter*> params() {
        std::vector<Parameter*> out{&reset_w, &reset_b, &update_w, &update_b, &cand_w, &cand_b};
        if (cfg_.variant != Variant::static_only) {
            out.push_back(&graph_src_proj);
            out.push_back(&graph_dst_proj);
        }
        if (cfg_.variant == Variant::dyn_weights || cfg_.variant == Variant::full) {
            out.push_back(&weight_proj);
        }
        if (cfg_.variant == Variant::full) {
            out.push_back(&mask_src_proj);
            out.push_back(&mask_dst_proj);
        }
        return out;
    }

    void set_mask_mode(MaskMode m) { cfg_.mask_mode = m; }

    // Test hooks: force the mixing weights or drop the mask.
    std::optional<Tensor> weight_override;
    bool mask_override_ones = false;

    Parameter reset_w, reset_b, update_w, update_b, cand_w, cand_b;
    Parameter graph_src_proj, graph_dst_proj;
    Parameter weight_proj;
    Parameter mask_src_proj, mask_dst_proj;

private:
    CellConfig cfg_;
    Tensor static_adj_;
};

} // namespace dgrnn
