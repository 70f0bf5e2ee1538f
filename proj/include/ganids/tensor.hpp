#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ganids/errors.hpp"

namespace ganids {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor;

struct TensorNode {
    Shape shape;
    std::vector<double> values;  // row-major
    bool requires_grad = false;
    bool is_leaf = true;
    std::uint64_t seq = 0;  // creation order; parents always precede children
    std::vector<std::shared_ptr<TensorNode>> parents;
    // Maps (output tensor, upstream grad) to one grad per parent. Written in
    // terms of tensor ops so that grads themselves stay differentiable when
    // grad mode is on (double backward for the gradient penalty).
    std::function<std::vector<Tensor>(const Tensor&, const Tensor&)> backward;
    std::vector<double> grad_accum;  // leaf gradient buffer, filled by backward()
};

// Thread-local autodiff switch. When disabled, ops compute values only and
// record no edges; the backward pass runs its own formulas under this guard
// unless a caller asks for a differentiable gradient graph.
struct GradMode {
    static bool enabled();
    static void set(bool on);
};

struct NoGradGuard {
    NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set(false); }
    ~NoGradGuard() { GradMode::set(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Dense tensor handle with value semantics over a shared node. Values are
// immutable after creation except for leaf parameters updated by an
// optimizer and the grad buffer. All values are checked finite on creation.
class Tensor {
public:
    Tensor() = default;

    static Tensor leaf(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value);
    // Row-major matrix literal, e.g. {{1,2},{3,4}}.
    static Tensor matrix(const std::vector<std::vector<double>>& rows, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    std::size_t rows() const;  // first dim (2-D only)
    std::size_t cols() const;  // second dim (2-D only)
    const std::vector<double>& values() const;
    double item() const;  // single-element tensors only
    bool requires_grad() const;
    bool is_leaf() const;

    // Same values, detached from the graph; never requires grad.
    Tensor detach() const;

    // Leaf-only mutators used by optimizers and tests.
    void set_values(const std::vector<double>& v);
    void add_to_values(const std::vector<double>& delta);
    const std::vector<double>& grad() const;
    bool has_grad() const;
    void zero_grad();

    std::shared_ptr<TensorNode> node() const { return node_; }
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<TensorNode> node_;
};

// ---- primitive ops (all record grads when grad mode is on) ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);          // [m,k]x[k,n]
Tensor transpose(const Tensor& a);                        // 2-D
Tensor bmm(const Tensor& a, const Tensor& b);             // [B,m,k]x[B,k,n]
Tensor transpose_last2(const Tensor& a);                  // 3-D

Tensor reshape(const Tensor& a, Shape shape);
Tensor add_rowvec(const Tensor& x, const Tensor& b);      // [m,n] + [n]
Tensor broadcast_col(const Tensor& c, std::size_t n);     // [m,1] -> [m,n]
Tensor broadcast_row(const Tensor& r, std::size_t m);     // [n] -> [m,n]
Tensor broadcast_to(const Tensor& s, Shape shape);        // scalar -> any
Tensor sum(const Tensor& a);                              // -> [1]
Tensor mean(const Tensor& a);                             // -> [1]
Tensor sum_rows(const Tensor& a);                         // [m,n] -> [m,1]
Tensor sum_cols(const Tensor& a);                         // [m,n] -> [n]

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);   // branch-stable
Tensor softplus(const Tensor& a);  // log(1+e^x), overflow-safe
Tensor leaky_relu(const Tensor& a, double slope);
Tensor softmax_rows(const Tensor& a);  // max-subtracted
// Per-row max as a constant (no grad path); used for stable log-softmax.
Tensor rowmax_detached(const Tensor& a);

// ---- autodiff entry points ----

// Populates grad buffers of every reachable requires-grad leaf. Repeated
// calls accumulate; use zero_grad() between steps.
void backward(const Tensor& loss);

// Functional gradients of a scalar loss w.r.t. `wrt` (leaves or interior
// nodes). With create_graph the returned tensors are differentiable.
// Unreached entries come back as zeros.
std::vector<Tensor> gradients(const Tensor& loss, const std::vector<Tensor>& wrt,
                              bool create_graph = false);

// Gradient of a scalar-valued function at x, itself differentiable so the
// penalty built from it can be backpropagated into network parameters.
Tensor grad_of_output_wrt_input(const std::function<Tensor(const Tensor&)>& net, const Tensor& x);

}  // namespace ganids
