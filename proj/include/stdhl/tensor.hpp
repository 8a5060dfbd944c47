#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stdhl/kernels.hpp"

namespace stdhl {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until a gradient reaches this node
    bool requires_grad = false;
    std::uint64_t id = 0;  // creation order, used for tape ordering checks

    std::int64_t numel() const { return static_cast<std::int64_t>(value.size()); }
    void ensure_grad();
};

// Value-semantic handle to a shared node. Copying a Tensor aliases the same
// storage (parameters handed out by a model refer to the live values).
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor scalar(double v);
    static Tensor from(std::vector<double> data, Shape shape);
    // leaf with requires_grad set; the unit the backward pass reports into
    static Tensor leaf(std::vector<double> data, Shape shape);

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    int ndim() const { return static_cast<int>(n_->shape.size()); }
    std::int64_t dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }
    std::int64_t numel() const { return n_->numel(); }

    std::span<double> data() { return n_->value; }
    std::span<const double> data() const { return n_->value; }
    double item() const;

    double operator()(std::int64_t i) const { return n_->value[static_cast<std::size_t>(i)]; }
    double operator()(std::int64_t i, std::int64_t j) const {
        return n_->value[static_cast<std::size_t>(i * dim(1) + j)];
    }
    double operator()(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return n_->value[static_cast<std::size_t>((i * dim(1) + j) * dim(2) + k)];
    }

    bool requires_grad() const { return n_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        n_->requires_grad = v;
        return *this;
    }

    std::span<const double> grad() const;  // zero-filled if nothing reached the node
    std::span<double> grad_mutable();
    void zero_grad();

    // Detached copy of the values (fresh node, no grad flag).
    Tensor detached_copy() const;

    std::shared_ptr<TensorNode> node() const { return n_; }

private:
    explicit Tensor(std::shared_ptr<TensorNode> n) : n_(std::move(n)) {}
    std::shared_ptr<TensorNode> n_;
    friend class Tape;
};

// Execution-ordered record of differentiable operations. Ops append as they
// run, so the record is topologically ordered by construction; backward is a
// single reverse sweep that visits each record exactly once. A tape and the
// tensors built on it stay on one thread.
class Tape {
public:
    struct Record {
        const char* op;
        std::vector<std::uint64_t> input_ids;
        std::uint64_t output_id;
        std::shared_ptr<TensorNode> output_node;
        std::function<void()> backward;
    };

    class Scope {
    public:
        explicit Scope(Tape& t);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

    static Tape* current();

    void record(const char* op, std::initializer_list<const Tensor*> inputs,
                const Tensor& output, std::function<void()> backward);
    void record(const char* op, const std::vector<const Tensor*>& inputs,
                const Tensor& output, std::function<void()> backward);

    // Seeds d(loss)/d(loss) = 1 and replays the records in reverse. Grads
    // accumulate; call zero_grad on leaves between uses if that is not wanted.
    void backward(const Tensor& loss);

    std::size_t size() const { return records_.size(); }
    const std::vector<Record>& records() const { return records_; }
    void clear() { records_.clear(); }

private:
    std::vector<Record> records_;
};

enum class Activation { kReLU, kIdentity, kTanh, kSigmoid };
Tensor apply_activation(const Tensor& x, Activation a);

using kernels::ConvMode;

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor maximum(const Tensor& a, const Tensor& b);  // ties route gradient to a
Tensor exp(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
// x * s with s a 1-element tensor (gradients flow to both)
Tensor scale(const Tensor& x, const Tensor& s);

// ---- reductions ----
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_axis(const Tensor& a, int axis);
Tensor mean_axis(const Tensor& a, int axis);

// ---- shape ----
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);  // 2-d
Tensor permute(const Tensor& a, const std::vector<int>& perm);
Tensor slice(const Tensor& a, int axis, std::int64_t start, std::int64_t len);
Tensor concat(const std::vector<Tensor>& parts, int axis);

// ---- linear algebra / nets ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add_rows(const Tensor& a, const Tensor& b);  // a R×C, b C: add b to each row
Tensor softmax(const Tensor& a, int axis);
// out[co,t] = sum_c sum_w k[co,c,w]*x[c,t-d*w(+reach)] + bias[co]
Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              std::int64_t dilation, ConvMode mode);
// op M (A×N) applied on the node axis of x (C×N×T) -> C×A×T
Tensor node_mix(const Tensor& m, const Tensor& x);
// 1x1 convolution over channels: x C×N×T, w C'×C, b C' (optional) -> C'×N×T
Tensor channel_map(const Tensor& x, const Tensor& w, const Tensor& b);
// per-node linear map on the time axis: x C×N×T1, p N×T1×T2, b N×T2 -> C×N×T2
Tensor time_project(const Tensor& x, const Tensor& p, const Tensor& b);
// d[i,j] = ||a_i - b_j||_2, a N×D, b I×D
Tensor pairwise_distance(const Tensor& a, const Tensor& b);

[[noreturn]] void throw_shape_mismatch(const char* op, const Shape& a, const Shape& b);

}  // namespace stdhl
