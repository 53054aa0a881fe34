#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dgrnn/rng.hpp"
#include "dgrnn/tensor.hpp"

namespace dgrnn {

/// One vertex of the reverse-mode computation graph. Nodes are created by the
/// operations below and form a DAG through `parents`; `backward_fn` pulls the
/// gradient already accumulated at this node into the parents' gradients.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn;
    std::uint64_t visit = 0;

    explicit Node(Tensor v, bool rg = false) : value(std::move(v)), requires_grad(rg) {
        if (requires_grad) grad = Tensor(value.shape());
    }

    void ensure_grad() {
        if (grad.size() != value.size()) grad = Tensor(value.shape());
    }
};

using NodePtr = std::shared_ptr<Node>;

/// Value-semantics handle to a graph node.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false)
        : node_(std::make_shared<Node>(std::move(value), requires_grad)) {}
    explicit Var(NodePtr n) : node_(std::move(n)) {}

    const Tensor& value() const { return node_->value; }
    Tensor& value_mut() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    const NodePtr& node() const { return node_; }
    bool defined() const { return static_cast<bool>(node_); }

    std::size_t size() const { return node_->value.size(); }
    const Shape& shape() const { return node_->value.shape(); }

private:
    NodePtr node_;
};

inline Var constant(Tensor t) { return Var(std::move(t), false); }
inline Var constant_scalar(double v) { return Var(Tensor::scalar(v), false); }

namespace detail {

inline NodePtr make_op(Tensor value, std::initializer_list<NodePtr> parents) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    auto n = std::make_shared<Node>(std::move(value), false);
    if (rg) {
        n->requires_grad = true;
        n->ensure_grad();
        n->parents.assign(parents);
    }
    return n;
}

inline NodePtr make_op(Tensor value, const std::vector<NodePtr>& parents) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    auto n = std::make_shared<Node>(std::move(value), false);
    if (rg) {
        n->requires_grad = true;
        n->ensure_grad();
        n->parents = parents;
    }
    return n;
}

} // namespace detail

// ---------------------------------------------------------------------------
// elementwise arithmetic
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
    auto n = detail::make_op(t_add(a.value(), b.value()), {a.node(), b.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* pa = a.node().get();
        Node* pb = b.node().get();
        n->backward_fn = [self, pa, pb] {
            const std::size_t sz = self->grad.size();
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < sz; ++i) pa->grad[i] += self->grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < sz; ++i) pb->grad[i] += self->grad[i];
            }
        };
    }
    return Var(n);
}

inline Var sub(const Var& a, const Var& b) {
    auto n = detail::make_op(t_sub(a.value(), b.value()), {a.node(), b.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* pa = a.node().get();
        Node* pb = b.node().get();
        n->backward_fn = [self, pa, pb] {
            const std::size_t sz = self->grad.size();
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < sz; ++i) pa->grad[i] += self->grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < sz; ++i) pb->grad[i] -= self->grad[i];
            }
        };
    }
    return Var(n);
}

/// Hadamard (elementwise) product.
inline Var hadamard(const Var& a, const Var& b) {
    auto n = detail::make_op(t_mul(a.value(), b.value()), {a.node(), b.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* pa = a.node().get();
        Node* pb = b.node().get();
        n->backward_fn = [self, pa, pb] {
            const std::size_t sz = self->grad.size();
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < sz; ++i) pa->grad[i] += self->grad[i] * pb->value[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < sz; ++i) pb->grad[i] += self->grad[i] * pa->value[i];
            }
        };
    }
    return Var(n);
}

inline Var scale(const Var& a, double c) {
    auto n = detail::make_op(t_scale(a.value(), c), {a.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* pa = a.node().get();
        n->backward_fn = [self, pa, c] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self->grad.size(); ++i) pa->grad[i] += c * self->grad[i];
        };
    }
    return Var(n);
}

inline Var neg(const Var& a) { return scale(a, -1.0); }

/// Product of a 1-element scalar variable with a tensor variable.
inline Var mul_scalar(const Var& s, const Var& x) {
    if (s.size() != 1) {
        throw shape_error("mul_scalar: scalar operand has shape " + shape_str(s.shape()));
    }
    auto n = detail::make_op(t_scale(x.value(), s.value()[0]), {s.node(), x.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* ps = s.node().get();
        Node* px = x.node().get();
        n->backward_fn = [self, ps, px] {
            const std::size_t sz = self->grad.size();
            if (ps->requires_grad) {
                ps->ensure_grad();
                double acc = 0.0;
                for (std::size_t i = 0; i < sz; ++i) acc += self->grad[i] * px->value[i];
                ps->grad[0] += acc;
            }
            if (px->requires_grad) {
                px->ensure_grad();
                const double sv = ps->value[0];
                for (std::size_t i = 0; i < sz; ++i) px->grad[i] += sv * self->grad[i];
            }
        };
    }
    return Var(n);
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

/// relu, with the subgradient at 0 taken as 0.
inline Var relu(const Var& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x.value()[i] > 0.0 ? x.value()[i] : 0.0;
    auto n = detail::make_op(std::move(out), {x.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* px = x.node().get();
        n->backward_fn = [self, px] {
            px->ensure_grad();
            for (std::size_t i = 0; i < self->grad.size(); ++i)
                if (px->value[i] > 0.0) px->grad[i] += self->grad[i];
        };
    }
    return Var(n);
}

inline Var sigmoid(const Var& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x.value()[i]));
    auto n = detail::make_op(std::move(out), {x.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* px = x.node().get();
        n->backward_fn = [self, px] {
            px->ensure_grad();
            for (std::size_t i = 0; i < self->grad.size(); ++i) {
                const double y = self->value[i];
                px->grad[i] += self->grad[i] * y * (1.0 - y);
            }
        };
    }
    return Var(n);
}

inline Var tanh_act(const Var& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x.value()[i]);
    auto n = detail::make_op(std::move(out), {x.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* px = x.node().get();
        n->backward_fn = [self, px] {
            px->ensure_grad();
            for (std::size_t i = 0; i < self->grad.size(); ++i) {
                const double y = self->value[i];
                px->grad[i] += self->grad[i] * (1.0 - y * y);
            }
        };
    }
    return Var(n);
}

/// |x| elementwise; subgradient at 0 is 0.
inline Var abs_val(const Var& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::fabs(x.value()[i]);
    auto n = detail::make_op(std::move(out), {x.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* px = x.node().get();
        n->backward_fn = [self, px] {
            px->ensure_grad();
            for (std::size_t i = 0; i < self->grad.size(); ++i) {
                const double v = px->value[i];
                if (v > 0.0) px->grad[i] += self->grad[i];
                else if (v < 0.0) px->grad[i] -= self->grad[i];
            }
        };
    }
    return Var(n);
}

/// Binarises z at the given threshold. Forward is exactly the hard step;
/// backward applies the straight-through rule (gradient of the output is
/// passed to z unchanged).
inline Var hard_threshold(const Var& z, double threshold) {
    Tensor out(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z.value()[i] > threshold ? 1.0 : 0.0;
    auto n = detail::make_op(std::move(out), {z.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* pz = z.node().get();
        n->backward_fn = [self, pz] {
            pz->ensure_grad();
            for (std::size_t i = 0; i < self->grad.size(); ++i) pz->grad[i] += self->grad[i];
        };
    }
    return Var(n);
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
    auto n = detail::make_op(t_matmul(a.value(), b.value()), {a.node(), b.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* pa = a.node().get();
        Node* pb = b.node().get();
        n->backward_fn = [self, pa, pb] {
            const std::size_t rows = pa->value.dim(0);
            const std::size_t inner = pa->value.dim(1);
            const std::size_t cols = pb->value.dim(1);
            const double* dy = self->grad.data();
            if (pa->requires_grad) {
                pa->ensure_grad();
                const double* bv = pb->value.data();
                double* da = pa->grad.data();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t l = 0; l < inner; ++l) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < cols; ++j)
                            acc += dy[i * cols + j] * bv[l * cols + j];
                        da[i * inner + l] += acc;
                    }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                const double* av = pa->value.data();
                double* db = pb->grad.data();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t l = 0; l < inner; ++l) {
                        const double avl = av[i * inner + l];
                        if (avl == 0.0) continue;
                        for (std::size_t j = 0; j < cols; ++j)
                            db[l * cols + j] += avl * dy[i * cols + j];
                    }
            }
        };
    }
    return Var(n);
}

inline Var transpose(const Var& a) {
    auto n = detail::make_op(t_transpose(a.value()), {a.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* pa = a.node().get();
        n->backward_fn = [self, pa] {
            pa->ensure_grad();
            const std::size_t r = pa->value.dim(0), c = pa->value.dim(1);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    pa->grad[i * c + j] += self->grad[j * r + i];
        };
    }
    return Var(n);
}

/// Affine map along the last axis: y = x W (+ b). Leading axes pass through.
inline Var linear(const Var& x, const Var& w, const Var* bias = nullptr) {
    const Shape& xs = x.shape();
    if (xs.empty() || w.shape().size() != 2 || xs.back() != w.shape()[0]) {
        throw shape_error("linear: input " + shape_str(xs) + " incompatible with weight " +
                          shape_str(w.shape()));
    }
    const std::size_t d_in = w.shape()[0];
    const std::size_t d_out = w.shape()[1];
    const std::size_t rows = x.size() / d_in;
    if (bias && bias->size() != d_out) {
        throw shape_error("linear: bias " + shape_str(bias->shape()) + " does not match output width " +
                          std::to_string(d_out));
    }
    Shape out_shape(xs.begin(), xs.end() - 1);
    out_shape.push_back(d_out);
    Tensor out(out_shape);
    {
        const double* xv = x.value().data();
        const double* wv = w.value().data();
        double* ov = out.data();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < d_in; ++i) {
                const double xri = xv[r * d_in + i];
                if (xri == 0.0) continue;
                const double* wrow = wv + i * d_out;
                double* orow = ov + r * d_out;
                for (std::size_t o = 0; o < d_out; ++o) orow[o] += xri * wrow[o];
            }
        if (bias) {
            const double* bv = bias->value().data();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t o = 0; o < d_out; ++o) ov[r * d_out + o] += bv[o];
        }
    }
    std::vector<NodePtr> parents{x.node(), w.node()};
    if (bias) parents.push_back(bias->node());
    auto n = detail::make_op(std::move(out), parents);
    if (n->requires_grad) {
        Node* self = n.get();
        Node* px = x.node().get();
        Node* pw = w.node().get();
        Node* pb = bias ? bias->node().get() : nullptr;
        n->backward_fn = [self, px, pw, pb, rows, d_in, d_out] {
            const double* dy = self->grad.data();
            if (px->requires_grad) {
                px->ensure_grad();
                const double* wv = pw->value.data();
                double* dx = px->grad.data();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t i = 0; i < d_in; ++i) {
                        const double* wrow = wv + i * d_out;
                        const double* dyrow = dy + r * d_out;
                        double acc = 0.0;
                        for (std::size_t o = 0; o < d_out; ++o) acc += dyrow[o] * wrow[o];
                        dx[r * d_in + i] += acc;
                    }
            }
            if (pw->requires_grad) {
                pw->ensure_grad();
                const double* xv = px->value.data();
                double* dw = pw->grad.data();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t i = 0; i < d_in; ++i) {
                        const double xri = xv[r * d_in + i];
                        if (xri == 0.0) continue;
                        const double* dyrow = dy + r * d_out;
                        double* dwrow = dw + i * d_out;
                        for (std::size_t o = 0; o < d_out; ++o) dwrow[o] += xri * dyrow[o];
                    }
            }
            if (pb && pb->requires_grad) {
                pb->ensure_grad();
                double* db = pb->grad.data();
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t o = 0; o < d_out; ++o) db[o] += dy[r * d_out + o];
            }
        };
    }
    return Var(n);
}

// ---------------------------------------------------------------------------
// softmax and reductions
// ---------------------------------------------------------------------------

/// Softmax over the last axis (each leading-index row independently),
/// computed with max-subtraction. A rank-1 tensor is a single row.
inline Var softmax_rows(const Var& x) {
    if (x.shape().empty()) throw shape_error("softmax_rows: scalar input");
    const std::size_t m = x.shape().back();
    const std::size_t rows = x.size() / m;
    Tensor out(x.shape());
    const double* xv = x.value().data();
    double* ov = out.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = xv + r * m;
        double* orow = ov + r * m;
        double mx = row[0];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        for (std::size_t j = 0; j < m; ++j) orow[j] /= sum;
    }
    auto n = detail::make_op(std::move(out), {x.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* px = x.node().get();
        n->backward_fn = [self, px, rows, m] {
            px->ensure_grad();
            const double* y = self->value.data();
            const double* dy = self->grad.data();
            double* dx = px->grad.data();
            for (std::size_t r = 0; r < rows; ++r) {
                const double* yr = y + r * m;
                const double* dyr = dy + r * m;
                double dot = 0.0;
                for (std::size_t j = 0; j < m; ++j) dot += dyr[j] * yr[j];
                double* dxr = dx + r * m;
                for (std::size_t j = 0; j < m; ++j) dxr[j] += yr[j] * (dyr[j] - dot);
            }
        };
    }
    return Var(n);
}

inline Var sum_all(const Var& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x.value()[i];
    auto n = detail::make_op(Tensor::scalar(acc), {x.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* px = x.node().get();
        n->backward_fn = [self, px] {
            px->ensure_grad();
            const double g = self->grad[0];
            for (std::size_t i = 0; i < px->grad.size(); ++i) px->grad[i] += g;
        };
    }
    return Var(n);
}

/// Column means of a rank-2 tensor: [R x C] -> [C].
inline Var mean_axis0(const Var& x) {
    if (x.shape().size() != 2) {
        throw shape_error("mean_axis0: expected rank-2 tensor, got " + shape_str(x.shape()));
    }
    const std::size_t r = x.shape()[0], c = x.shape()[1];
    Tensor out({c});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j] += x.value()[i * c + j];
    for (std::size_t j = 0; j < c; ++j) out[j] /= static_cast<double>(r);
    auto n = detail::make_op(std::move(out), {x.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* px = x.node().get();
        n->backward_fn = [self, px, r, c] {
            px->ensure_grad();
            const double inv = 1.0 / static_cast<double>(r);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) px->grad[i * c + j] += self->grad[j] * inv;
        };
    }
    return Var(n);
}

// ---------------------------------------------------------------------------
// shape surgery
// ---------------------------------------------------------------------------

inline Var reshape(const Var& x, Shape shape) {
    Tensor out = x.value().reshaped(std::move(shape));
    auto n = detail::make_op(std::move(out), {x.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* px = x.node().get();
        n->backward_fn = [self, px] {
            px->ensure_grad();
            for (std::size_t i = 0; i < self->grad.size(); ++i) px->grad[i] += self->grad[i];
        };
    }
    return Var(n);
}

/// Joins tensors along the last axis; every leading axis must agree.
inline Var concat_last_axis(std::span<const Var> xs) {
    if (xs.empty()) throw shape_error("concat_last_axis: no operands");
    const Shape& lead = xs[0].shape();
    if (lead.empty()) throw shape_error("concat_last_axis: scalar operand");
    std::size_t total_last = 0;
    for (const Var& v : xs) {
        const Shape& s = v.shape();
        if (s.size() != lead.size() ||
            !std::equal(s.begin(), s.end() - 1, lead.begin(), lead.end() - 1)) {
            throw shape_error("concat_last_axis: leading shape of " + shape_str(s) +
                              " differs from " + shape_str(lead));
        }
        total_last += s.back();
    }
    const std::size_t rows = xs[0].size() / lead.back();
    Shape out_shape(lead.begin(), lead.end() - 1);
    out_shape.push_back(total_last);
    Tensor out(out_shape);
    std::vector<std::size_t> widths;
    widths.reserve(xs.size());
    {
        std::size_t off = 0;
        for (const Var& v : xs) {
            const std::size_t w = v.shape().back();
            widths.push_back(w);
            const double* src = v.value().data();
            for (std::size_t r = 0; r < rows; ++r)
                std::copy(src + r * w, src + (r + 1) * w, out.data() + r * total_last + off);
            off += w;
        }
    }
    std::vector<NodePtr> parents;
    parents.reserve(xs.size());
    for (const Var& v : xs) parents.push_back(v.node());
    auto n = detail::make_op(std::move(out), parents);
    if (n->requires_grad) {
        Node* self = n.get();
        std::vector<Node*> raw;
        raw.reserve(parents.size());
        for (auto& p : self->parents) raw.push_back(p.get());
        n->backward_fn = [self, raw, widths, rows, total_last] {
            std::size_t off = 0;
            for (std::size_t k = 0; k < raw.size(); ++k) {
                const std::size_t w = widths[k];
                if (raw[k]->requires_grad) {
                    raw[k]->ensure_grad();
                    double* dst = raw[k]->grad.data();
                    const double* src = self->grad.data();
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < w; ++j)
                            dst[r * w + j] += src[r * total_last + off + j];
                }
                off += w;
            }
        };
    }
    return Var(n);
}

inline Var concat_last_axis(std::initializer_list<Var> xs) {
    return concat_last_axis(std::span<const Var>(xs.begin(), xs.size()));
}

/// Columns [lo, hi) of the last axis.
inline Var slice_last_axis(const Var& x, std::size_t lo, std::size_t hi) {
    const Shape& s = x.shape();
    if (s.empty() || lo >= hi || hi > s.back()) {
        throw shape_error("slice_last_axis: range [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + ") invalid for " + shape_str(s));
    }
    const std::size_t last = s.back();
    const std::size_t w = hi - lo;
    const std::size_t rows = x.size() / last;
    Shape out_shape(s.begin(), s.end() - 1);
    out_shape.push_back(w);
    Tensor out(out_shape);
    for (std::size_t r = 0; r < rows; ++r)
        std::copy(x.value().data() + r * last + lo, x.value().data() + r * last + hi,
                  out.data() + r * w);
    auto n = detail::make_op(std::move(out), {x.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* px = x.node().get();
        n->backward_fn = [self, px, lo, w, last, rows] {
            px->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < w; ++j)
                    px->grad[r * last + lo + j] += self->grad[r * w + j];
        };
    }
    return Var(n);
}

/// Drops the first axis at the given index: [L, rest...] -> [rest...].
inline Var index_axis0(const Var& x, std::size_t i) {
    const Shape& s = x.shape();
    if (s.size() < 2 || i >= s[0]) {
        throw shape_error("index_axis0: index " + std::to_string(i) + " invalid for " + shape_str(s));
    }
    const std::size_t block = x.size() / s[0];
    Shape out_shape(s.begin() + 1, s.end());
    Tensor out(out_shape);
    std::copy(x.value().data() + i * block, x.value().data() + (i + 1) * block, out.data());
    auto n = detail::make_op(std::move(out), {x.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* px = x.node().get();
        n->backward_fn = [self, px, i, block] {
            px->ensure_grad();
            for (std::size_t j = 0; j < block; ++j) px->grad[i * block + j] += self->grad[j];
        };
    }
    return Var(n);
}

/// Stacks equally shaped tensors along a new leading axis.
inline Var stack_axis0(std::span<const Var> xs) {
    if (xs.empty()) throw shape_error("stack_axis0: no operands");
    const Shape& inner = xs[0].shape();
    for (const Var& v : xs) {
        if (v.shape() != inner) {
            throw shape_error("stack_axis0: shape " + shape_str(v.shape()) + " differs from " +
                              shape_str(inner));
        }
    }
    const std::size_t block = xs[0].size();
    Shape out_shape{xs.size()};
    out_shape.insert(out_shape.end(), inner.begin(), inner.end());
    Tensor out(out_shape);
    for (std::size_t k = 0; k < xs.size(); ++k)
        std::copy(xs[k].value().data(), xs[k].value().data() + block, out.data() + k * block);
    std::vector<NodePtr> parents;
    parents.reserve(xs.size());
    for (const Var& v : xs) parents.push_back(v.node());
    auto n = detail::make_op(std::move(out), parents);
    if (n->requires_grad) {
        Node* self = n.get();
        std::vector<Node*> raw;
        for (auto& p : self->parents) raw.push_back(p.get());
        n->backward_fn = [self, raw, block] {
            for (std::size_t k = 0; k < raw.size(); ++k) {
                if (!raw[k]->requires_grad) continue;
                raw[k]->ensure_grad();
                for (std::size_t j = 0; j < block; ++j)
                    raw[k]->grad[j] += self->grad[k * block + j];
            }
        };
    }
    return Var(n);
}

/// Scalar entry v[i] as a 1-element variable.
inline Var index_flat(const Var& v, std::size_t i) {
    if (i >= v.size()) {
        throw shape_error("index_flat: index " + std::to_string(i) + " out of range for " +
                          shape_str(v.shape()));
    }
    auto n = detail::make_op(Tensor::scalar(v.value()[i]), {v.node()});
    if (n->requires_grad) {
        Node* self = n.get();
        Node* pv = v.node().get();
        n->backward_fn = [self, pv, i] {
            pv->ensure_grad();
            pv->grad[i] += self->grad[0];
        };
    }
    return Var(n);
}

// ---------------------------------------------------------------------------
// backward pass
// ---------------------------------------------------------------------------

namespace detail {
inline std::atomic<std::uint64_t> g_visit_epoch{0};
}

/// Reverse-mode sweep from a scalar root. Gradients accumulate into every
/// reachable node that requires them; callers zero parameter gradients first.
inline void backward(const Var& root) {
    if (root.size() != 1) {
        throw value_error("backward: root must be scalar, got shape " + shape_str(root.shape()));
    }
    if (!root.requires_grad()) return;

    const std::uint64_t epoch = ++detail::g_visit_epoch;
    // Iterative post-order DFS gives a topological order; the reverse sweep
    // then visits each node exactly once with its gradient complete.
    std::vector<Node*> order;
    std::vector<std::pair<Node*, std::size_t>> stack;
    root.node()->visit = epoch;
    stack.emplace_back(root.node().get(), 0);
    while (!stack.empty()) {
        Node* node = stack.back().first;
        const std::size_t next = stack.back().second;
        if (next < node->parents.size()) {
            stack.back().second = next + 1;
            Node* p = node->parents[next].get();
            if (p->requires_grad && p->visit != epoch) {
                p->visit = epoch;
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->ensure_grad();
    root.node()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn();
    }
}

// ---------------------------------------------------------------------------
// parameters
// ---------------------------------------------------------------------------

/// Named trainable leaf. The node persists across forward passes, so
/// gradients accumulate over every graph that uses it until zeroed.
struct Parameter {
    std::string name;
    Var var;

    Parameter() = default;
    Parameter(std::string n, Tensor init) : name(std::move(n)), var(std::move(init), true) {}

    const Tensor& tensor() const { return var.node()->value; }
    Tensor& tensor() { return var.node()->value; }
    const Tensor& grad() const { return var.node()->grad; }
    Tensor& grad() { return var.node()->grad; }
    std::size_t size() const { return var.size(); }

    void zero_grad() { var.node()->grad.fill(0.0); }
};

/// Fan-in uniform initialisation in [-1/sqrt(d_in), 1/sqrt(d_in)].
inline Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

} // namespace dgrnn
