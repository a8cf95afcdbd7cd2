#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gestgan/tensor.hpp"

namespace gestgan {

// Plain (tape-free) versions of the loss/activation primitives. The tape ops
// below reuse the same forward math.
Tensor selu(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
double huber_loss(const Tensor& pred, const Tensor& target, double delta);
Tensor group_norm(const Tensor& x, std::size_t groups, const Tensor& gain, const Tensor& bias);

constexpr double kGroupNormEps = 1e-5;

// Reverse-mode tape. Ops append nodes; backward() replays the record once in
// reverse, accumulating vector-Jacobian products into every node that is
// reachable from a grad-requiring leaf. Nodes that are not reachable keep an
// exactly-zero gradient. One thread per tape.
class Tape {
public:
    struct Var {
        std::uint32_t id = UINT32_MAX;
        bool valid() const { return id != UINT32_MAX; }
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad);
    Var constant(Tensor value) { return leaf(std::move(value), false); }
    Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    // Linear algebra
    Var matmul(Var a, Var b);     // A @ B
    Var matmul_nt(Var a, Var b);  // A @ B^T
    Var matmul_tn(Var a, Var b);  // A^T @ B

    // Elementwise / broadcast
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var add_rowvec(Var x, Var v);  // (r x c) + (c,) per row

    // Shape plumbing
    Var reshape(Var a, std::vector<std::size_t> shape);
    Var slice_rows(Var a, std::size_t r0, std::size_t r1);
    Var slice_cols(Var a, std::size_t c0, std::size_t c1);
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(const std::vector<Var>& parts);
    Var mean_pool_rows(Var a, std::size_t window);

    // Nonlinearities
    Var softmax_rows(Var a);
    Var selu(Var a);
    Var gelu(Var a);
    Var sigmoid(Var a);
    Var softplus(Var a);

    // Normalization: per row, channels split into `groups` contiguous groups,
    // each normalized to zero mean / unit variance (eps-stabilized), then
    // scaled/shifted per channel.
    Var group_norm(Var x, std::size_t groups, Var gain, Var bias);

    // Reductions / losses
    Var sum(Var a);
    Var mean(Var a);
    Var huber_mean(Var pred, Var target, double delta);

    // Propagates d(loss)/d(node) for every reachable node. loss must be a
    // scalar; throws NumericError if a NaN/Inf shows up in the loss or any
    // gradient. The tape is consumed: no further ops may be recorded.
    void backward(Var loss);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    // Gradient of a node after backward(); exactly zero if the node was not
    // reached from the loss.
    const Tensor& grad(Var v);

    std::size_t node_count() const { return nodes_.size(); }
    bool consumed() const { return backward_done_; }

private:
    struct Node {
        Tensor value;
        Tensor grad;                       // allocated on first touch
        bool live = false;                 // downstream of a requires_grad leaf
        bool grad_set = false;
        std::function<void(Tape&)> vjp;    // null for leaves
    };

    Var push(Tensor value, bool live, std::function<void(Tape&)> vjp);
    Tensor& grad_buf(std::uint32_t id);
    void accum(std::uint32_t id, const Tensor& delta);
    void accum_scaled(std::uint32_t id, const Tensor& delta, double s);
    bool live(Var v) const { return nodes_[v.id].live; }
    const Tensor& val(Var v) const { return nodes_[v.id].value; }

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

using Var = Tape::Var;

}  // namespace gestgan
