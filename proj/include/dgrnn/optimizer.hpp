#pragma once

#include <cmath>
#include <vector>

#include "dgrnn/autodiff.hpp"

namespace dgrnn {

inline double gradient_global_norm(const std::vector<Parameter*>& params) {
    double sq = 0.0;
    for (const Parameter* p : params) {
        const Tensor& g = p->grad();
        for (std::size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
    }
    return std::sqrt(sq);
}

/// Scales all gradients so the global norm is at most max_norm.
/// Returns the pre-clip norm.
inline double clip_gradients(const std::vector<Parameter*>& params, double max_norm) {
    const double norm = gradient_global_norm(params);
    if (norm > max_norm && norm > 0.0) {
        const double factor = max_norm / norm;
        for (Parameter* p : params) {
            Tensor& g = p->grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= factor;
        }
    }
    return norm;
}

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive moment estimation over a fixed parameter list.
class Adam {
public:
    Adam(std::vector<Parameter*> params, AdamConfig cfg = {})
        : params_(std::move(params)), cfg_(cfg) {
        for (const Parameter* p : params_) {
            m_.emplace_back(Tensor::zeros(p->tensor().shape()));
            v_.emplace_back(Tensor::zeros(p->tensor().shape()));
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            Tensor& theta = params_[k]->tensor();
            const Tensor& g = params_[k]->grad();
            Tensor& m = m_[k];
            Tensor& v = v_[k];
            for (std::size_t i = 0; i < theta.size(); ++i) {
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                const double m_hat = m[i] / bc1;
                const double v_hat = v[i] / bc2;
                theta[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
            }
        }
    }

    void zero_grad() {
        for (Parameter* p : params_) p->zero_grad();
    }

    std::size_t iterations() const { return t_; }
    const std::vector<Parameter*>& params() const { return params_; }

private:
    std::vector<Parameter*> params_;
    AdamConfig cfg_;
    std::vector<Tensor> m_, v_;
    std::size_t t_ = 0;
};

} // namespace dgrnn
