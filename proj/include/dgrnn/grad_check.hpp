#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dgrnn/autodiff.hpp"

namespace dgrnn {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Compares the analytic gradient of a scalar-valued function against central
/// finite differences. `f` must be deterministic: every random choice inside
/// it has to be frozen by seed so repeated evaluations see the same function.
/// Per-entry error is |analytic - central| / max(1, |central|).
inline GradCheckReport grad_check_report(const std::function<Var()>& f,
                                         std::span<Parameter* const> params, double h) {
    for (Parameter* p : params) p->zero_grad();
    Var root = f();
    backward(root);

    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (Parameter* p : params) analytic.push_back(p->grad());

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter* p = params[pi];
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double saved = p->tensor()[i];
            p->tensor()[i] = saved + h;
            const double f_plus = f().value()[0];
            p->tensor()[i] = saved - h;
            const double f_minus = f().value()[0];
            p->tensor()[i] = saved;

            const double central = (f_plus - f_minus) / (2.0 * h);
            const double rel = std::fabs(analytic[pi][i] - central) /
                               std::max(1.0, std::fabs(central));
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = p->name;
                report.worst_index = i;
                report.analytic = analytic[pi][i];
                report.numeric = central;
            }
        }
    }
    return report;
}

inline double grad_check(const std::function<Var()>& f, std::span<Parameter* const> params,
                         double h = 1e-5) {
    return grad_check_report(f, params, h).max_rel_error;
}

} // namespace dgrnn
