#pragma once

#include <cstddef>
#include <vector>

#include "dgrnn/autodiff.hpp"
#include "dgrnn/dataset.hpp"
#include "dgrnn/errors.hpp"

namespace dgrnn {

/// Number of temporal resolutions stacked into the channel axis.
inline constexpr std::size_t kResolutions = 3;

/// Stacks the current/day/week blocks into [S x N x 3], channel order fixed.
inline Tensor fuse_resolutions(const WindowSample& sample) {
    check_same_shape(sample.x_current, sample.x_day, "fuse_resolutions");
    check_same_shape(sample.x_current, sample.x_week, "fuse_resolutions");
    const std::size_t S = sample.x_current.dim(0);
    const std::size_t N = sample.x_current.dim(1);
    Tensor out({S, N, kResolutions});
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t n = 0; n < N; ++n) {
            out.at(s, n, 0) = sample.x_current.at(s, n);
            out.at(s, n, 1) = sample.x_day.at(s, n);
            out.at(s, n, 2) = sample.x_week.at(s, n);
        }
    }
    return out;
}

/// Self-attention over nodes, applied independently at each history step.
/// Channels carry the three resolutions; the residual keeps the raw signal
/// available downstream, which constrains the output width to the input
/// width.
class AttentionLayer {
public:
    AttentionLayer(std::size_t out_channels, Rng& rng) {
        if (out_channels != kResolutions) {
            throw config_error("attention: output channels must equal the " +
                               std::to_string(kResolutions) +
                               " resolution channels (residual shape), got " +
                               std::to_string(out_channels));
        }
        const Shape shape{kResolutions, out_channels};
        query_proj = Parameter("attention.query_proj", init_uniform(shape, kResolutions, rng));
        key_proj = Parameter("attention.key_proj", init_uniform(shape, kResolutions, rng));
        value_proj = Parameter("attention.value_proj", init_uniform(shape, kResolutions, rng));
    }

    /// fused: [S x N x 3] -> [S x N x 3]
    Var forward(const Var& fused) const {
        if (fused.shape().size() != 3 || fused.shape()[2] != kResolutions) {
            throw shape_error("attention: expected [S x N x 3] input, got " +
                              shape_str(fused.shape()));
        }
        const std::size_t S = fused.shape()[0];
        std::vector<Var> steps;
        steps.reserve(S);
        for (std::size_t s = 0; s < S; ++s) {
            const Var x_s = index_axis0(fused, s);
            const Var q = matmul(x_s, query_proj.var);
            const Var k = matmul(x_s, key_proj.var);
            const Var v = matmul(x_s, value_proj.var);
            const Var weights = softmax_rows(matmul(q, transpose(k)));
            steps.push_back(add(matmul(weights, v), x_s));
        }
        return stack_axis0(steps);
    }

    /// Attention matrix [N x N] for one step, for inspection.
    Tensor attention_rows(const Tensor& x_s) const {
        Var x = constant(x_s);
        Var q = matmul(x, query_proj.var);
        Var k = matmul(x, key_proj.var);
        return softmax_rows(matmul(q, transpose(k))).value();
    }

    std::vector<Parameter*> params() {
        return {&query_proj, &key_proj, &value_proj};
    }

    Parameter query_proj, key_proj, value_proj;
};

} // namespace dgrnn
