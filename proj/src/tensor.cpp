#include "stdhl/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace stdhl {

namespace {

std::atomic<std::uint64_t> g_node_counter{1};
thread_local Tape* t_current_tape = nullptr;

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> value, bool requires_grad) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->id = g_node_counter.fetch_add(1, std::memory_order_relaxed);
    return n;
}

bool any_requires(std::initializer_list<const Tensor*> ts) {
    for (const Tensor* t : ts)
        if (t->defined() && t->requires_grad()) return true;
    return false;
}

bool tracking(std::initializer_list<const Tensor*> ts) {
    return Tape::current() != nullptr && any_requires(ts);
}

// Flat-index decomposition around one axis.
struct AxisSplit {
    std::int64_t outer, len, inner;
};

AxisSplit split_axis(const Shape& s, int axis) {
    AxisSplit r{1, s[static_cast<std::size_t>(axis)], 1};
    for (int i = 0; i < axis; ++i) r.outer *= s[static_cast<std::size_t>(i)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i)
        r.inner *= s[i];
    return r;
}

void check_axis(const char* op, const Shape& s, int axis) {
    if (axis < 0 || axis >= static_cast<int>(s.size()))
        throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) +
                                    " out of range for shape " + shape_str(s));
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw_shape_mismatch(op, a.shape(), b.shape());
}

constexpr double kExpClamp = 700.0;  // exp stays finite on finite input

}  // namespace

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

void throw_shape_mismatch(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                                shape_str(b));
}

void TensorNode::ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape) {
    auto n = shape_numel(shape);
    return Tensor(make_node(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0),
                            false));
}

Tensor Tensor::full(Shape shape, double v) {
    auto n = shape_numel(shape);
    return Tensor(make_node(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), v),
                            false));
}

Tensor Tensor::scalar(double v) { return full({1}, v); }

Tensor Tensor::from(std::vector<double> data, Shape shape) {
    if (static_cast<std::int64_t>(data.size()) != shape_numel(shape))
        throw std::invalid_argument("Tensor::from: data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    return Tensor(make_node(std::move(shape), std::move(data), false));
}

Tensor Tensor::leaf(std::vector<double> data, Shape shape) {
    Tensor t = from(std::move(data), std::move(shape));
    t.set_requires_grad(true);
    return t;
}

double Tensor::item() const {
    if (numel() != 1)
        throw std::invalid_argument("Tensor::item: tensor is not scalar, shape " +
                                    shape_str(shape()));
    return n_->value[0];
}

std::span<const double> Tensor::grad() const {
    n_->ensure_grad();
    return n_->grad;
}

std::span<double> Tensor::grad_mutable() {
    n_->ensure_grad();
    return n_->grad;
}

void Tensor::zero_grad() {
    std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
}

Tensor Tensor::detached_copy() const {
    return Tensor(make_node(n_->shape, n_->value, false));
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Tape::Scope::Scope(Tape& t) : prev_(t_current_tape) { t_current_tape = &t; }
Tape::Scope::~Scope() { t_current_tape = prev_; }

Tape* Tape::current() { return t_current_tape; }

void Tape::record(const char* op, std::initializer_list<const Tensor*> inputs,
                  const Tensor& output, std::function<void()> backward) {
    record(op, std::vector<const Tensor*>(inputs), output, std::move(backward));
}

void Tape::record(const char* op, const std::vector<const Tensor*>& inputs, const Tensor& output,
                  std::function<void()> backward) {
    Record r;
    r.op = op;
    for (const Tensor* t : inputs)
        if (t->defined()) r.input_ids.push_back(t->node()->id);
    r.output_id = output.node()->id;
    r.output_node = output.node();
    r.backward = std::move(backward);
    records_.push_back(std::move(r));
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(loss.shape()));
    // Grads on op outputs are transient per sweep; only leaves accumulate
    // across repeated backward calls.
    for (auto& r : records_)
        std::fill(r.output_node->grad.begin(), r.output_node->grad.end(), 0.0);
    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->backward();
}

// ---------------------------------------------------------------------------
// op helpers
// ---------------------------------------------------------------------------

namespace {

Tensor make_out(Shape shape, std::initializer_list<const Tensor*> ins) {
    Tensor out = Tensor::zeros(std::move(shape));
    out.set_requires_grad(any_requires(ins));
    return out;
}

using NodePtr = std::shared_ptr<TensorNode>;

bool has_out_grad(const NodePtr& n) { return !n->grad.empty(); }

}  // namespace

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    Tensor out = make_out(a.shape(), {&a, &b});
    kernels::add(a.data().data(), b.data().data(), out.data().data(), a.numel());
    if (tracking({&a, &b})) {
        NodePtr an = a.node(), bn = b.node(), on = out.node();
        Tape::current()->record("add", {&a, &b}, out, [an, bn, on] {
            if (!has_out_grad(on)) return;
            const auto n = on->numel();
            if (an->requires_grad) {
                an->ensure_grad();
                kernels::axpy(1.0, on->grad.data(), an->grad.data(), n);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                kernels::axpy(1.0, on->grad.data(), bn->grad.data(), n);
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    Tensor out = make_out(a.shape(), {&a, &b});
    const auto n = a.numel();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
    if (tracking({&a, &b})) {
        NodePtr an = a.node(), bn = b.node(), on = out.node();
        Tape::current()->record("sub", {&a, &b}, out, [an, bn, on] {
            if (!has_out_grad(on)) return;
            const auto m = on->numel();
            if (an->requires_grad) {
                an->ensure_grad();
                kernels::axpy(1.0, on->grad.data(), an->grad.data(), m);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                kernels::axpy(-1.0, on->grad.data(), bn->grad.data(), m);
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    Tensor out = make_out(a.shape(), {&a, &b});
    kernels::mul(a.data().data(), b.data().data(), out.data().data(), a.numel());
    if (tracking({&a, &b})) {
        NodePtr an = a.node(), bn = b.node(), on = out.node();
        Tape::current()->record("mul", {&a, &b}, out, [an, bn, on] {
            if (!has_out_grad(on)) return;
            const auto m = on->numel();
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::int64_t i = 0; i < m; ++i)
                    an->grad[static_cast<std::size_t>(i)] +=
                        on->grad[static_cast<std::size_t>(i)] * bn->value[static_cast<std::size_t>(i)];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::int64_t i = 0; i < m; ++i)
                    bn->grad[static_cast<std::size_t>(i)] +=
                        on->grad[static_cast<std::size_t>(i)] * an->value[static_cast<std::size_t>(i)];
            }
        });
    }
    return out;
}

Tensor add_scalar(const Tensor& a, double c) {
    Tensor out = make_out(a.shape(), {&a});
    const auto n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) out.data()[static_cast<std::size_t>(i)] =
        a.data()[static_cast<std::size_t>(i)] + c;
    if (tracking({&a})) {
        NodePtr an = a.node(), on = out.node();
        Tape::current()->record("add_scalar", {&a}, out, [an, on] {
            if (!has_out_grad(on)) return;
            an->ensure_grad();
            kernels::axpy(1.0, on->grad.data(), an->grad.data(), on->numel());
        });
    }
    return out;
}

Tensor mul_scalar(const Tensor& a, double c) {
    Tensor out = make_out(a.shape(), {&a});
    const auto n = a.numel();
    for (std::int64_t i = 0; i < n; ++i)
        out.data()[static_cast<std::size_t>(i)] = a.data()[static_cast<std::size_t>(i)] * c;
    if (tracking({&a})) {
        NodePtr an = a.node(), on = out.node();
        Tape::current()->record("mul_scalar", {&a}, out, [an, on, c] {
            if (!has_out_grad(on)) return;
            an->ensure_grad();
            kernels::axpy(c, on->grad.data(), an->grad.data(), on->numel());
        });
    }
    return out;
}

Tensor maximum(const Tensor& a, const Tensor& b) {
    check_same_shape("maximum", a, b);
    Tensor out = make_out(a.shape(), {&a, &b});
    const auto n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        out.data()[u] = a.data()[u] >= b.data()[u] ? a.data()[u] : b.data()[u];
    }
    if (tracking({&a, &b})) {
        NodePtr an = a.node(), bn = b.node(), on = out.node();
        Tape::current()->record("maximum", {&a, &b}, out, [an, bn, on] {
            if (!has_out_grad(on)) return;
            const auto m = on->numel();
            if (an->requires_grad) an->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            for (std::int64_t i = 0; i < m; ++i) {
                const auto u = static_cast<std::size_t>(i);
                if (an->value[u] >= bn->value[u]) {
                    if (an->requires_grad) an->grad[u] += on->grad[u];
                } else if (bn->requires_grad) {
                    bn->grad[u] += on->grad[u];
                }
            }
        });
    }
    return out;
}

Tensor exp(const Tensor& a) {
    Tensor out = make_out(a.shape(), {&a});
    const auto n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        out.data()[u] = std::exp(std::min(a.data()[u], kExpClamp));
    }
    if (tracking({&a})) {
        NodePtr an = a.node(), on = out.node();
        Tape::current()->record("exp", {&a}, out, [an, on] {
            if (!has_out_grad(on)) return;
            an->ensure_grad();
            const auto m = on->numel();
            for (std::int64_t i = 0; i < m; ++i) {
                const auto u = static_cast<std::size_t>(i);
                if (an->value[u] < kExpClamp) an->grad[u] += on->grad[u] * on->value[u];
            }
        });
    }
    return out;
}

Tensor relu(const Tensor& a) {
    Tensor out = make_out(a.shape(), {&a});
    kernels::relu(a.data().data(), out.data().data(), a.numel());
    if (tracking({&a})) {
        NodePtr an = a.node(), on = out.node();
        Tape::current()->record("relu", {&a}, out, [an, on] {
            if (!has_out_grad(on)) return;
            an->ensure_grad();
            const auto m = on->numel();
            for (std::int64_t i = 0; i < m; ++i) {
                const auto u = static_cast<std::size_t>(i);
                if (an->value[u] > 0.0) an->grad[u] += on->grad[u];
            }
        });
    }
    return out;
}

Tensor sigmoid(const Tensor& a) {
    Tensor out = make_out(a.shape(), {&a});
    const auto n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        const double x = a.data()[u];
        out.data()[u] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                 : std::exp(x) / (1.0 + std::exp(x));
    }
    if (tracking({&a})) {
        NodePtr an = a.node(), on = out.node();
        Tape::current()->record("sigmoid", {&a}, out, [an, on] {
            if (!has_out_grad(on)) return;
            an->ensure_grad();
            const auto m = on->numel();
            for (std::int64_t i = 0; i < m; ++i) {
                const auto u = static_cast<std::size_t>(i);
                const double s = on->value[u];
                an->grad[u] += on->grad[u] * s * (1.0 - s);
            }
        });
    }
    return out;
}

Tensor tanh(const Tensor& a) {
    Tensor out = make_out(a.shape(), {&a});
    const auto n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        const auto u = static_cast<std::size_t>(i);
        out.data()[u] = std::tanh(a.data()[u]);
    }
    if (tracking({&a})) {
        NodePtr an = a.node(), on = out.node();
        Tape::current()->record("tanh", {&a}, out, [an, on] {
            if (!has_out_grad(on)) return;
            an->ensure_grad();
            const auto m = on->numel();
            for (std::int64_t i = 0; i < m; ++i) {
                const auto u = static_cast<std::size_t>(i);
                const double y = on->value[u];
                an->grad[u] += on->grad[u] * (1.0 - y * y);
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& x, const Tensor& s) {
    if (s.numel() != 1)
        throw std::invalid_argument("scale: scale factor must be scalar, got " +
                                    shape_str(s.shape()));
    Tensor out = make_out(x.shape(), {&x, &s});
    const double sv = s.data()[0];
    const auto n = x.numel();
    for (std::int64_t i = 0; i < n; ++i)
        out.data()[static_cast<std::size_t>(i)] = x.data()[static_cast<std::size_t>(i)] * sv;
    if (tracking({&x, &s})) {
        NodePtr xn = x.node(), sn = s.node(), on = out.node();
        Tape::current()->record("scale", {&x, &s}, out, [xn, sn, on] {
            if (!has_out_grad(on)) return;
            const auto m = on->numel();
            if (xn->requires_grad) {
                xn->ensure_grad();
                kernels::axpy(sn->value[0], on->grad.data(), xn->grad.data(), m);
            }
            if (sn->requires_grad) {
                sn->ensure_grad();
                double acc = 0.0;
                for (std::int64_t i = 0; i < m; ++i)
                    acc += on->grad[static_cast<std::size_t>(i)] *
                           xn->value[static_cast<std::size_t>(i)];
                sn->grad[0] += acc;
            }
        });
    }
    return out;
}

Tensor apply_activation(const Tensor& x, Activation a) {
    switch (a) {
        case Activation::kReLU: return relu(x);
        case Activation::kTanh: return tanh(x);
        case Activation::kSigmoid: return sigmoid(x);
        case Activation::kIdentity: return x;
    }
    return x;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Tensor sum(const Tensor& a) {
    Tensor out = make_out({1}, {&a});
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    out.data()[0] = acc;
    if (tracking({&a})) {
        NodePtr an = a.node(), on = out.node();
        Tape::current()->record("sum", {&a}, out, [an, on] {
            if (!has_out_grad(on)) return;
            an->ensure_grad();
            const double g = on->grad[0];
            for (auto& v : an->grad) v += g;
        });
    }
    return out;
}

Tensor mean(const Tensor& a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum_axis(const Tensor& a, int axis) {
    check_axis("sum_axis", a.shape(), axis);
    const auto sp = split_axis(a.shape(), axis);
    Shape os;
    for (int i = 0; i < a.ndim(); ++i)
        if (i != axis) os.push_back(a.dim(i));
    if (os.empty()) os.push_back(1);
    Tensor out = make_out(os, {&a});
    const double* pa = a.data().data();
    double* po = out.data().data();
    for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t l = 0; l < sp.len; ++l)
            for (std::int64_t i = 0; i < sp.inner; ++i)
                po[o * sp.inner + i] += pa[(o * sp.len + l) * sp.inner + i];
    if (tracking({&a})) {
        NodePtr an = a.node(), on = out.node();
        Tape::current()->record("sum_axis", {&a}, out, [an, on, sp] {
            if (!has_out_grad(on)) return;
            an->ensure_grad();
            for (std::int64_t o = 0; o < sp.outer; ++o)
                for (std::int64_t l = 0; l < sp.len; ++l)
                    for (std::int64_t i = 0; i < sp.inner; ++i)
                        an->grad[static_cast<std::size_t>((o * sp.len + l) * sp.inner + i)] +=
                            on->grad[static_cast<std::size_t>(o * sp.inner + i)];
        });
    }
    return out;
}

Tensor mean_axis(const Tensor& a, int axis) {
    check_axis("mean_axis", a.shape(), axis);
    return mul_scalar(sum_axis(a, axis), 1.0 / static_cast<double>(a.dim(axis)));
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                    shape_str(shape));
    Tensor out = make_out(std::move(shape), {&a});
    std::copy(a.data().begin(), a.data().end(), out.data().begin());
    if (tracking({&a})) {
        NodePtr an = a.node(), on = out.node();
        Tape::current()->record("reshape", {&a}, out, [an, on] {
            if (!has_out_grad(on)) return;
            an->ensure_grad();
            kernels::axpy(1.0, on->grad.data(), an->grad.data(), on->numel());
        });
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.ndim() != 2)
        throw std::invalid_argument("transpose: expected 2-d tensor, got " + shape_str(a.shape()));
    const auto r = a.dim(0), c = a.dim(1);
    Tensor out = make_out({c, r}, {&a});
    for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < c; ++j)
            out.data()[static_cast<std::size_t>(j * r + i)] =
                a.data()[static_cast<std::size_t>(i * c + j)];
    if (tracking({&a})) {
        NodePtr an = a.node(), on = out.node();
        Tape::current()->record("transpose", {&a}, out, [an, on, r, c] {
            if (!has_out_grad(on)) return;
            an->ensure_grad();
            for (std::int64_t i = 0; i < r; ++i)
                for (std::int64_t j = 0; j < c; ++j)
                    an->grad[static_cast<std::size_t>(i * c + j)] +=
                        on->grad[static_cast<std::size_t>(j * r + i)];
        });
    }
    return out;
}

namespace {

std::vector<std::int64_t> row_major_strides(const Shape& s) {
    std::vector<std::int64_t> st(s.size(), 1);
    for (std::int64_t i = static_cast<std::int64_t>(s.size()) - 2; i >= 0; --i)
        st[static_cast<std::size_t>(i)] =
            st[static_cast<std::size_t>(i + 1)] * s[static_cast<std::size_t>(i + 1)];
    return st;
}

// map: out flat index -> in flat index, for a permutation of axes
std::vector<std::int64_t> permute_map(const Shape& in_shape, const std::vector<int>& perm) {
    Shape out_shape(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i)
        out_shape[i] = in_shape[static_cast<std::size_t>(perm[i])];
    const auto in_st = row_major_strides(in_shape);
    const auto n = shape_numel(in_shape);
    std::vector<std::int64_t> map(static_cast<std::size_t>(n));
    std::vector<std::int64_t> idx(perm.size(), 0);
    for (std::int64_t f = 0; f < n; ++f) {
        std::int64_t src = 0;
        for (std::size_t d = 0; d < perm.size(); ++d)
            src += idx[d] * in_st[static_cast<std::size_t>(perm[d])];
        map[static_cast<std::size_t>(f)] = src;
        for (std::int64_t d = static_cast<std::int64_t>(perm.size()) - 1; d >= 0; --d) {
            auto ud = static_cast<std::size_t>(d);
            if (++idx[ud] < out_shape[ud]) break;
            idx[ud] = 0;
        }
    }
    return map;
}

}  // namespace

Tensor permute(const Tensor& a, const std::vector<int>& perm) {
    if (static_cast<int>(perm.size()) != a.ndim())
        throw std::invalid_argument("permute: permutation size does not match rank of " +
                                    shape_str(a.shape()));
    Shape os(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) os[i] = a.dim(perm[i]);
    Tensor out = make_out(os, {&a});
    auto map = permute_map(a.shape(), perm);
    for (std::size_t f = 0; f < map.size(); ++f)
        out.data()[f] = a.data()[static_cast<std::size_t>(map[f])];
    if (tracking({&a})) {
        NodePtr an = a.node(), on = out.node();
        Tape::current()->record("permute", {&a}, out, [an, on, map = std::move(map)] {
            if (!has_out_grad(on)) return;
            an->ensure_grad();
            for (std::size_t f = 0; f < map.size(); ++f)
                an->grad[static_cast<std::size_t>(map[f])] += on->grad[f];
        });
    }
    return out;
}

Tensor slice(const Tensor& a, int axis, std::int64_t start, std::int64_t len) {
    check_axis("slice", a.shape(), axis);
    if (start < 0 || len < 1 || start + len > a.dim(axis))
        throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") invalid for axis " +
                                    std::to_string(axis) + " of " + shape_str(a.shape()));
    const auto sp = split_axis(a.shape(), axis);
    Shape os = a.shape();
    os[static_cast<std::size_t>(axis)] = len;
    Tensor out = make_out(os, {&a});
    const double* pa = a.data().data();
    double* po = out.data().data();
    for (std::int64_t o = 0; o < sp.outer; ++o)
        for (std::int64_t l = 0; l < len; ++l)
            std::copy_n(pa + ((o * sp.len + start + l) * sp.inner), sp.inner,
                        po + ((o * len + l) * sp.inner));
    if (tracking({&a})) {
        NodePtr an = a.node(), on = out.node();
        Tape::current()->record("slice", {&a}, out, [an, on, sp, start, len] {
            if (!has_out_grad(on)) return;
            an->ensure_grad();
            for (std::int64_t o = 0; o < sp.outer; ++o)
                for (std::int64_t l = 0; l < len; ++l)
                    for (std::int64_t i = 0; i < sp.inner; ++i)
                        an->grad[static_cast<std::size_t>(
                            (o * sp.len + start + l) * sp.inner + i)] +=
                            on->grad[static_cast<std::size_t>((o * len + l) * sp.inner + i)];
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no tensors given");
    check_axis("concat", parts[0].shape(), axis);
    Shape os = parts[0].shape();
    std::int64_t total = 0;
    for (const auto& p : parts) {
        if (p.ndim() != parts[0].ndim())
            throw_shape_mismatch("concat", parts[0].shape(), p.shape());
        for (int i = 0; i < p.ndim(); ++i)
            if (i != axis && p.dim(i) != parts[0].dim(i))
                throw_shape_mismatch("concat", parts[0].shape(), p.shape());
        total += p.dim(axis);
    }
    os[static_cast<std::size_t>(axis)] = total;

    std::vector<const Tensor*> ins;
    for (const auto& p : parts) ins.push_back(&p);
    Tensor out = Tensor::zeros(os);
    bool rg = false;
    for (const auto& p : parts) rg = rg || p.requires_grad();
    out.set_requires_grad(rg);

    const auto osp = split_axis(os, axis);
    std::int64_t at = 0;
    std::vector<std::int64_t> offsets;
    for (const auto& p : parts) {
        offsets.push_back(at);
        const auto len = p.dim(axis);
        const double* pp = p.data().data();
        double* po = out.data().data();
        for (std::int64_t o = 0; o < osp.outer; ++o)
            for (std::int64_t l = 0; l < len; ++l)
                std::copy_n(pp + ((o * len + l) * osp.inner), osp.inner,
                            po + ((o * osp.len + at + l) * osp.inner));
        at += len;
    }
    if (Tape::current() != nullptr && rg) {
        std::vector<NodePtr> pns;
        for (const auto& p : parts) pns.push_back(p.node());
        NodePtr on = out.node();
        Tape::current()->record("concat", ins, out, [pns, on, osp, offsets] {
            if (!has_out_grad(on)) return;
            for (std::size_t pi = 0; pi < pns.size(); ++pi) {
                auto& pn = pns[pi];
                if (!pn->requires_grad) continue;
                pn->ensure_grad();
                const std::int64_t len = pn->numel() / (osp.outer * osp.inner);
                const std::int64_t at = offsets[pi];
                for (std::int64_t o = 0; o < osp.outer; ++o)
                    for (std::int64_t l = 0; l < len; ++l)
                        for (std::int64_t i = 0; i < osp.inner; ++i)
                            pn->grad[static_cast<std::size_t>((o * len + l) * osp.inner + i)] +=
                                on->grad[static_cast<std::size_t>(
                                    (o * osp.len + at + l) * osp.inner + i)];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// linear algebra / network ops
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw_shape_mismatch("matmul", a.shape(), b.shape());
    const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out = make_out({m, n}, {&a, &b});
    kernels::matmul_nn(a.data().data(), b.data().data(), out.data().data(), m, k, n, false);
    if (tracking({&a, &b})) {
        NodePtr an = a.node(), bn = b.node(), on = out.node();
        Tape::current()->record("matmul", {&a, &b}, out, [an, bn, on, m, k, n] {
            if (!has_out_grad(on)) return;
            if (an->requires_grad) {
                an->ensure_grad();
                kernels::matmul_nt(on->grad.data(), bn->value.data(), an->grad.data(), m, n, k,
                                   true);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                kernels::matmul_tn(an->value.data(), on->grad.data(), bn->grad.data(), k, m, n,
                                   true);
            }
        });
    }
    return out;
}

Tensor add_rows(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 1 || b.dim(0) != a.dim(1))
        throw_shape_mismatch("add_rows", a.shape(), b.shape());
    const auto r = a.dim(0), c = a.dim(1);
    Tensor out = make_out(a.shape(), {&a, &b});
    for (std::int64_t i = 0; i < r; ++i)
        for (std::int64_t j = 0; j < c; ++j)
            out.data()[static_cast<std::size_t>(i * c + j)] =
                a.data()[static_cast<std::size_t>(i * c + j)] + b.data()[static_cast<std::size_t>(j)];
    if (tracking({&a, &b})) {
        NodePtr an = a.node(), bn = b.node(), on = out.node();
        Tape::current()->record("add_rows", {&a, &b}, out, [an, bn, on, r, c] {
            if (!has_out_grad(on)) return;
            if (an->requires_grad) {
                an->ensure_grad();
                kernels::axpy(1.0, on->grad.data(), an->grad.data(), r * c);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::int64_t i = 0; i < r; ++i)
                    for (std::int64_t j = 0; j < c; ++j)
                        bn->grad[static_cast<std::size_t>(j)] +=
                            on->grad[static_cast<std::size_t>(i * c + j)];
            }
        });
    }
    return out;
}

Tensor softmax(const Tensor& a, int axis) {
    check_axis("softmax", a.shape(), axis);
    const auto sp = split_axis(a.shape(), axis);
    Tensor out = make_out(a.shape(), {&a});
    const double* pa = a.data().data();
    double* po = out.data().data();
    for (std::int64_t o = 0; o < sp.outer; ++o) {
        for (std::int64_t i = 0; i < sp.inner; ++i) {
            double mx = -1e308;
            for (std::int64_t l = 0; l < sp.len; ++l)
                mx = std::max(mx, pa[(o * sp.len + l) * sp.inner + i]);
            double z = 0.0;
            for (std::int64_t l = 0; l < sp.len; ++l) {
                const double e = std::exp(pa[(o * sp.len + l) * sp.inner + i] - mx);
                po[(o * sp.len + l) * sp.inner + i] = e;
                z += e;
            }
            for (std::int64_t l = 0; l < sp.len; ++l) po[(o * sp.len + l) * sp.inner + i] /= z;
        }
    }
    if (tracking({&a})) {
        NodePtr an = a.node(), on = out.node();
        Tape::current()->record("softmax", {&a}, out, [an, on, sp] {
            if (!has_out_grad(on)) return;
            an->ensure_grad();
            for (std::int64_t o = 0; o < sp.outer; ++o) {
                for (std::int64_t i = 0; i < sp.inner; ++i) {
                    double dot = 0.0;
                    for (std::int64_t l = 0; l < sp.len; ++l) {
                        const auto u = static_cast<std::size_t>((o * sp.len + l) * sp.inner + i);
                        dot += on->grad[u] * on->value[u];
                    }
                    for (std::int64_t l = 0; l < sp.len; ++l) {
                        const auto u = static_cast<std::size_t>((o * sp.len + l) * sp.inner + i);
                        an->grad[u] += on->value[u] * (on->grad[u] - dot);
                    }
                }
            }
        });
    }
    return out;
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias, std::int64_t dilation,
              ConvMode mode) {
    if (dilation < 1)
        throw std::invalid_argument("conv1d: dilation must be >= 1, got " +
                                    std::to_string(dilation));
    if (x.ndim() != 2 || kernel.ndim() != 3 || kernel.dim(1) != x.dim(0))
        throw_shape_mismatch("conv1d", x.shape(), kernel.shape());
    const auto in_ch = x.dim(0), time_len = x.dim(1);
    const auto out_ch = kernel.dim(0), width = kernel.dim(2);
    if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != out_ch))
        throw_shape_mismatch("conv1d bias", bias.shape(), kernel.shape());
    const auto shift = kernels::conv_future_reach(mode, width, dilation);

    Tensor out = bias.defined() ? make_out({out_ch, time_len}, {&x, &kernel, &bias})
                                : make_out({out_ch, time_len}, {&x, &kernel});
    kernels::conv1d_forward(x.data().data(), kernel.data().data(),
                            bias.defined() ? bias.data().data() : nullptr, out.data().data(),
                            in_ch, out_ch, time_len, width, dilation, shift);
    const bool tr = bias.defined() ? tracking({&x, &kernel, &bias}) : tracking({&x, &kernel});
    if (tr) {
        NodePtr xn = x.node(), kn = kernel.node(), on = out.node();
        NodePtr bn = bias.defined() ? bias.node() : nullptr;
        auto fn = [xn, kn, bn, on, in_ch, out_ch, time_len, width, dilation, shift] {
            if (!has_out_grad(on)) return;
            if (xn->requires_grad) {
                xn->ensure_grad();
                kernels::conv1d_grad_x(on->grad.data(), kn->value.data(), xn->grad.data(), in_ch,
                                       out_ch, time_len, width, dilation, shift);
            }
            if (kn->requires_grad) {
                kn->ensure_grad();
                kernels::conv1d_grad_k(on->grad.data(), xn->value.data(), kn->grad.data(), in_ch,
                                       out_ch, time_len, width, dilation, shift);
            }
            if (bn && bn->requires_grad) {
                bn->ensure_grad();
                for (std::int64_t co = 0; co < out_ch; ++co) {
                    double s = 0.0;
                    for (std::int64_t t = 0; t < time_len; ++t)
                        s += on->grad[static_cast<std::size_t>(co * time_len + t)];
                    bn->grad[static_cast<std::size_t>(co)] += s;
                }
            }
        };
        if (bias.defined())
            Tape::current()->record("conv1d", {&x, &kernel, &bias}, out, std::move(fn));
        else
            Tape::current()->record("conv1d", {&x, &kernel}, out, std::move(fn));
    }
    return out;
}

Tensor node_mix(const Tensor& m, const Tensor& x) {
    if (m.ndim() != 2 || x.ndim() != 3 || m.dim(1) != x.dim(1))
        throw_shape_mismatch("node_mix", m.shape(), x.shape());
    const auto rows = m.dim(0), nodes = m.dim(1);
    const auto ch = x.dim(0), time_len = x.dim(2);
    Tensor out = make_out({ch, rows, time_len}, {&m, &x});
    for (std::int64_t c = 0; c < ch; ++c)
        kernels::matmul_nn(m.data().data(), x.data().data() + c * nodes * time_len,
                           out.data().data() + c * rows * time_len, rows, nodes, time_len, false);
    if (tracking({&m, &x})) {
        NodePtr mn = m.node(), xn = x.node(), on = out.node();
        Tape::current()->record("node_mix", {&m, &x}, out,
                                [mn, xn, on, rows, nodes, ch, time_len] {
            if (!has_out_grad(on)) return;
            if (mn->requires_grad) {
                mn->ensure_grad();
                for (std::int64_t c = 0; c < ch; ++c)
                    kernels::matmul_nt(on->grad.data() + c * rows * time_len,
                                       xn->value.data() + c * nodes * time_len, mn->grad.data(),
                                       rows, time_len, nodes, true);
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (std::int64_t c = 0; c < ch; ++c)
                    kernels::matmul_tn(mn->value.data(), on->grad.data() + c * rows * time_len,
                                       xn->grad.data() + c * nodes * time_len, nodes, rows,
                                       time_len, true);
            }
        });
    }
    return out;
}

Tensor channel_map(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.ndim() != 3 || w.ndim() != 2 || w.dim(1) != x.dim(0))
        throw_shape_mismatch("channel_map", w.shape(), x.shape());
    const auto in_ch = x.dim(0), nodes = x.dim(1), time_len = x.dim(2);
    const auto out_ch = w.dim(0);
    if (b.defined() && (b.ndim() != 1 || b.dim(0) != out_ch))
        throw_shape_mismatch("channel_map bias", b.shape(), w.shape());
    const auto cols = nodes * time_len;
    Tensor out = b.defined() ? make_out({out_ch, nodes, time_len}, {&x, &w, &b})
                             : make_out({out_ch, nodes, time_len}, {&x, &w});
    kernels::matmul_nn(w.data().data(), x.data().data(), out.data().data(), out_ch, in_ch, cols,
                       false);
    if (b.defined()) {
        for (std::int64_t c = 0; c < out_ch; ++c) {
            const double bv = b.data()[static_cast<std::size_t>(c)];
            for (std::int64_t i = 0; i < cols; ++i)
                out.data()[static_cast<std::size_t>(c * cols + i)] += bv;
        }
    }
    const bool tr = b.defined() ? tracking({&x, &w, &b}) : tracking({&x, &w});
    if (tr) {
        NodePtr xn = x.node(), wn = w.node(), on = out.node();
        NodePtr bn = b.defined() ? b.node() : nullptr;
        auto fn = [xn, wn, bn, on, in_ch, out_ch, cols] {
            if (!has_out_grad(on)) return;
            if (wn->requires_grad) {
                wn->ensure_grad();
                kernels::matmul_nt(on->grad.data(), xn->value.data(), wn->grad.data(), out_ch,
                                   cols, in_ch, true);
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                kernels::matmul_tn(wn->value.data(), on->grad.data(), xn->grad.data(), in_ch,
                                   out_ch, cols, true);
            }
            if (bn && bn->requires_grad) {
                bn->ensure_grad();
                for (std::int64_t c = 0; c < out_ch; ++c) {
                    double s = 0.0;
                    for (std::int64_t i = 0; i < cols; ++i)
                        s += on->grad[static_cast<std::size_t>(c * cols + i)];
                    bn->grad[static_cast<std::size_t>(c)] += s;
                }
            }
        };
        if (b.defined()) Tape::current()->record("channel_map", {&x, &w, &b}, out, std::move(fn));
        else Tape::current()->record("channel_map", {&x, &w}, out, std::move(fn));
    }
    return out;
}

Tensor time_project(const Tensor& x, const Tensor& p, const Tensor& b) {
    if (x.ndim() != 3 || p.ndim() != 3 || p.dim(0) != x.dim(1) || p.dim(1) != x.dim(2))
        throw_shape_mismatch("time_project", x.shape(), p.shape());
    const auto ch = x.dim(0), nodes = x.dim(1), t1 = x.dim(2), t2 = p.dim(2);
    if (b.defined() && (b.ndim() != 2 || b.dim(0) != nodes || b.dim(1) != t2))
        throw_shape_mismatch("time_project bias", b.shape(), p.shape());
    Tensor out = b.defined() ? make_out({ch, nodes, t2}, {&x, &p, &b})
                             : make_out({ch, nodes, t2}, {&x, &p});
    for (std::int64_t c = 0; c < ch; ++c) {
        for (std::int64_t n = 0; n < nodes; ++n) {
            kernels::matmul_nn(x.data().data() + (c * nodes + n) * t1,
                               p.data().data() + n * t1 * t2,
                               out.data().data() + (c * nodes + n) * t2, 1, t1, t2, false);
            if (b.defined())
                for (std::int64_t t = 0; t < t2; ++t)
                    out.data()[static_cast<std::size_t>((c * nodes + n) * t2 + t)] +=
                        b.data()[static_cast<std::size_t>(n * t2 + t)];
        }
    }
    const bool tr = b.defined() ? tracking({&x, &p, &b}) : tracking({&x, &p});
    if (tr) {
        NodePtr xn = x.node(), pn = p.node(), on = out.node();
        NodePtr bn = b.defined() ? b.node() : nullptr;
        auto fn = [xn, pn, bn, on, ch, nodes, t1, t2] {
            if (!has_out_grad(on)) return;
            if (xn->requires_grad) xn->ensure_grad();
            if (pn->requires_grad) pn->ensure_grad();
            if (bn && bn->requires_grad) bn->ensure_grad();
            for (std::int64_t c = 0; c < ch; ++c) {
                for (std::int64_t n = 0; n < nodes; ++n) {
                    const double* g = on->grad.data() + (c * nodes + n) * t2;
                    if (xn->requires_grad)
                        kernels::matmul_nt(g, pn->value.data() + n * t1 * t2,
                                           xn->grad.data() + (c * nodes + n) * t1, 1, t2, t1,
                                           true);
                    if (pn->requires_grad)
                        kernels::matmul_tn(xn->value.data() + (c * nodes + n) * t1, g,
                                           pn->grad.data() + n * t1 * t2, t1, 1, t2, true);
                    if (bn && bn->requires_grad)
                        kernels::axpy(1.0, g, bn->grad.data() + n * t2, t2);
                }
            }
        };
        if (b.defined()) Tape::current()->record("time_project", {&x, &p, &b}, out, std::move(fn));
        else Tape::current()->record("time_project", {&x, &p}, out, std::move(fn));
    }
    return out;
}

Tensor pairwise_distance(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1))
        throw_shape_mismatch("pairwise_distance", a.shape(), b.shape());
    const auto n = a.dim(0), m = b.dim(0), d = a.dim(1);
    Tensor out = make_out({n, m}, {&a, &b});
    // tiny floor keeps the gradient defined at coincident points
    constexpr double kFloor = 1e-24;
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < m; ++j) {
            double s = kFloor;
            for (std::int64_t k = 0; k < d; ++k) {
                const double diff = a.data()[static_cast<std::size_t>(i * d + k)] -
                                    b.data()[static_cast<std::size_t>(j * d + k)];
                s += diff * diff;
            }
            out.data()[static_cast<std::size_t>(i * m + j)] = std::sqrt(s);
        }
    }
    if (tracking({&a, &b})) {
        NodePtr an = a.node(), bn = b.node(), on = out.node();
        Tape::current()->record("pairwise_distance", {&a, &b}, out, [an, bn, on, n, m, d] {
            if (!has_out_grad(on)) return;
            if (an->requires_grad) an->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            for (std::int64_t i = 0; i < n; ++i) {
                for (std::int64_t j = 0; j < m; ++j) {
                    const auto u = static_cast<std::size_t>(i * m + j);
                    const double w = on->grad[u] / on->value[u];
                    if (w == 0.0) continue;
                    for (std::int64_t k = 0; k < d; ++k) {
                        const double diff = an->value[static_cast<std::size_t>(i * d + k)] -
                                            bn->value[static_cast<std::size_t>(j * d + k)];
                        if (an->requires_grad)
                            an->grad[static_cast<std::size_t>(i * d + k)] += w * diff;
                        if (bn->requires_grad)
                            bn->grad[static_cast<std::size_t>(j * d + k)] -= w * diff;
                    }
                }
            }
        });
    }
    return out;
}

}  // namespace stdhl
