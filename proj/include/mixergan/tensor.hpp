#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mixergan/common.hpp"

namespace mixergan {

namespace detail {

// One node of the autodiff graph. Nodes own their parents, so a tensor handle
// to the loss keeps the whole graph alive; the graph is a DAG (ops never form
// cycles). `data` is shared so views (reshape, detach) cost no copy.
struct Node {
    Shape shape;
    std::shared_ptr<std::vector<double>> data;
    std::vector<double> grad;  // sized by backward() for reachable nodes
    bool requires_grad = false;
    uint64_t id = 0;  // creation order; increases from parameters toward the loss
    std::string name;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backprop;  // accumulates into parent grads

    int64_t numel() const { return numel_of(shape); }
};

using NodePtr = std::shared_ptr<Node>;

}  // namespace detail

// Counts floats allocated for op outputs (the activations retained between
// forward and backward). Leaf tensors, views, and transient workspaces do not
// count. Scoped: start(), run the forward of interest, stop().
class ActivationCounter {
public:
    static void start();
    static uint64_t stop();
    static void record(uint64_t floats);

private:
    static thread_local bool active_;
    static thread_local uint64_t count_;
};

// Dense f64 tensor participating in a reverse-mode autodiff graph.
// Value-semantic handle; copying shares the underlying node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(detail::NodePtr n) : node_(std::move(n)) {}

    static Tensor zeros(const Shape& s, bool requires_grad = false);
    static Tensor full(const Shape& s, double value);
    static Tensor from_data(const Shape& s, std::vector<double> d, bool requires_grad = false);
    // Trainable leaf with a diagnostic name.
    static Tensor param(const Shape& s, std::vector<double> d, const std::string& name);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    int64_t numel() const { return node_->numel(); }
    int64_t dim(size_t i) const { return node_->shape[i]; }
    bool requires_grad() const { return node_->requires_grad; }
    const std::string& name() const { return node_->name; }
    void set_name(const std::string& n) { node_->name = n; }

    const std::vector<double>& data() const { return *node_->data; }
    // Leaf-only mutation (optimizer updates, test probes). Throws on op outputs.
    std::vector<double>& mutable_data();

    // Gradient copy; zeros if this tensor never participated in a backward.
    std::vector<double> grad() const;
    void zero_grad();

    double item() const;

    // Reverse-mode sweep from a scalar. Zeroes grads of every reachable node,
    // seeds d(loss)=1, then visits nodes in exact reverse topological order;
    // accumulation into parents is additive.
    void backward();

    // New leaf sharing this tensor's buffer, gradient flow severed.
    Tensor detach() const;

    const detail::NodePtr& node() const { return node_; }

private:
    detail::NodePtr node_;
};

// --- primitive ops -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);           // [m,k]x[k,p]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);  // x[m,i] w[i,o] b[o]

// Cross-correlation with symmetric zero padding; w is [c_out, c_in, k, k].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int64_t stride, int64_t pad);
// Exact adjoint of conv2d; w is [c_in, c_out, k, k].
// Output spatial size (H-1)*stride - 2*pad + k + output_pad.
Tensor conv2d_transpose(const Tensor& x, const Tensor& w, const Tensor& b, int64_t stride,
                        int64_t pad, int64_t output_pad = 0);

// Per-row normalization of a [rows, c] tensor over the channel axis.
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
// Per-(sample, channel) normalization of [b,c,H,W] over the spatial axes.
Tensor instance_norm(const Tensor& x, double eps);

Tensor gelu(const Tensor& x);  // exact x * Phi(x), erf-based
Tensor tanh_act(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& x, double c);
Tensor scale(const Tensor& x, double c);
Tensor square(const Tensor& x);
Tensor abs_val(const Tensor& x);
Tensor mean_all(const Tensor& x);  // scalar of shape [1]

Tensor transpose_last2(const Tensor& x);
Tensor reshape(const Tensor& x, const Shape& s);  // view, no copy

// Non-overlapping p x p patches of [b,c,H,W], flattened rows (b, gy, gx)
// with columns ordered (c, dy, dx): output [b*n, p*p*c], n = (H/p)*(W/p).
Tensor extract_patches(const Tensor& x, int64_t p);
// Exact inverse of extract_patches back to [b,c,H,W].
Tensor fold_patches(const Tensor& x, int64_t b, int64_t c, int64_t H, int64_t W, int64_t p);

}  // namespace mixergan
