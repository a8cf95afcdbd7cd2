#include "gestgan/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "gestgan/kernels.hpp"

namespace gestgan {

namespace {

// Self-normalizing constants (fixed points of the SELU moment equations).
constexpr double kSeluLambda = 1.0507009873554804934193349852946;
constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

double selu_fwd(double x) {
    return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

double selu_grad(double x) {
    return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
}

constexpr double kGeluC = 0.044715;

double gelu_fwd(double x) {
    const double s = std::sqrt(2.0 / std::numbers::pi);
    return 0.5 * x * (1.0 + std::tanh(s * (x + kGeluC * x * x * x)));
}

double gelu_grad(double x) {
    const double s = std::sqrt(2.0 / std::numbers::pi);
    const double u = s * (x + kGeluC * x * x * x);
    const double t = std::tanh(u);
    const double du = s * (1.0 + 3.0 * kGeluC * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

double sigmoid_fwd(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_fwd(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double huber_point(double r, double delta) {
    const double a = std::abs(r);
    return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_grad_point(double r, double delta) {
    if (r > delta) return delta;
    if (r < -delta) return -delta;
    return r;
}

struct GroupNormCtx {
    Tensor xhat;   // normalized pre-affine values
    Tensor inv_w;  // 1/sqrt(var + eps), one per (row, group)
};

Tensor group_norm_fwd(const Tensor& x, std::size_t groups, const Tensor& gain,
                      const Tensor& bias, GroupNormCtx* ctx) {
    require(x.rank() == 2, "group_norm: rank-2 input required");
    const std::size_t rows = x.rows(), ch = x.cols();
    require(groups >= 1 && ch % groups == 0, "group_norm: channel count not divisible by groups");
    require(gain.size() == ch && bias.size() == ch, "group_norm: gain/bias must be per-channel");
    const std::size_t gs = ch / groups;

    Tensor out = Tensor::matrix(rows, ch);
    Tensor xhat = Tensor::matrix(rows, ch);
    Tensor inv_w = Tensor::matrix(rows, groups);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t g = 0; g < groups; ++g) {
            const std::size_t c0 = g * gs;
            double mean = 0.0;
            for (std::size_t c = 0; c < gs; ++c) mean += x.at(r, c0 + c);
            mean /= static_cast<double>(gs);
            double var = 0.0;
            for (std::size_t c = 0; c < gs; ++c) {
                const double d = x.at(r, c0 + c) - mean;
                var += d * d;
            }
            var /= static_cast<double>(gs);
            const double iw = 1.0 / std::sqrt(var + kGroupNormEps);
            inv_w.at(r, g) = iw;
            for (std::size_t c = 0; c < gs; ++c) {
                const double xh = (x.at(r, c0 + c) - mean) * iw;
                xhat.at(r, c0 + c) = xh;
                out.at(r, c0 + c) = gain[c0 + c] * xh + bias[c0 + c];
            }
        }
    }
    if (ctx) {
        ctx->xhat = std::move(xhat);
        ctx->inv_w = std::move(inv_w);
    }
    return out;
}

}  // namespace

Tensor selu(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = selu_fwd(x[i]);
    return out;
}

Tensor gelu(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = gelu_fwd(x[i]);
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid_fwd(x[i]);
    return out;
}

double huber_loss(const Tensor& pred, const Tensor& target, double delta) {
    require(pred.same_shape(target), "huber_loss: shape mismatch");
    require(delta > 0.0, "huber_loss: delta must be positive");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += huber_point(pred[i] - target[i], delta);
    return acc / static_cast<double>(pred.size());
}

Tensor group_norm(const Tensor& x, std::size_t groups, const Tensor& gain, const Tensor& bias) {
    return group_norm_fwd(x, groups, gain, bias, nullptr);
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(Tensor value, bool live, std::function<void(Tape&)> vjp) {
    require(!backward_done_, "Tape: cannot record ops after backward()");
    Node n;
    n.value = std::move(value);
    n.live = live;
    n.vjp = std::move(vjp);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buf(std::uint32_t id) {
    Node& n = nodes_[id];
    if (!n.grad_set) {
        n.grad = Tensor(n.value.shape());
        n.grad_set = true;
    }
    return n.grad;
}

void Tape::accum(std::uint32_t id, const Tensor& delta) {
    if (!nodes_[id].live) return;
    Tensor& g = grad_buf(id);
    kern::active().add(g.data(), delta.data(), g.data(), g.size());
}

void Tape::accum_scaled(std::uint32_t id, const Tensor& delta, double s) {
    if (!nodes_[id].live) return;
    Tensor& g = grad_buf(id);
    kern::active().axpy(s, delta.data(), g.data(), g.size());
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

Var Tape::matmul(Var a, Var b) {
    Tensor out = gestgan::matmul(val(a), val(b));
    const auto ai = a.id, bi = b.id;
    auto self = push(std::move(out), live(a) || live(b), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, bi, si](Tape& t) {
        const Tensor& dc = t.nodes_[si].grad;
        if (t.nodes_[ai].live) t.accum(ai, gestgan::matmul_nt(dc, t.nodes_[bi].value));
        if (t.nodes_[bi].live) t.accum(bi, gestgan::matmul_tn(t.nodes_[ai].value, dc));
    };
    return self;
}

Var Tape::matmul_nt(Var a, Var b) {
    Tensor out = gestgan::matmul_nt(val(a), val(b));
    const auto ai = a.id, bi = b.id;
    auto self = push(std::move(out), live(a) || live(b), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, bi, si](Tape& t) {
        const Tensor& dc = t.nodes_[si].grad;
        if (t.nodes_[ai].live) t.accum(ai, gestgan::matmul(dc, t.nodes_[bi].value));
        if (t.nodes_[bi].live) t.accum(bi, gestgan::matmul_tn(dc, t.nodes_[ai].value));
    };
    return self;
}

Var Tape::matmul_tn(Var a, Var b) {
    Tensor out = gestgan::matmul_tn(val(a), val(b));
    const auto ai = a.id, bi = b.id;
    auto self = push(std::move(out), live(a) || live(b), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, bi, si](Tape& t) {
        const Tensor& dc = t.nodes_[si].grad;
        if (t.nodes_[ai].live) t.accum(ai, gestgan::matmul_nt(t.nodes_[bi].value, dc));
        if (t.nodes_[bi].live) t.accum(bi, gestgan::matmul(t.nodes_[ai].value, dc));
    };
    return self;
}

Var Tape::add(Var a, Var b) {
    Tensor out = gestgan::add(val(a), val(b));
    const auto ai = a.id, bi = b.id;
    auto self = push(std::move(out), live(a) || live(b), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, bi, si](Tape& t) {
        const Tensor& dc = t.nodes_[si].grad;
        t.accum(ai, dc);
        t.accum(bi, dc);
    };
    return self;
}

Var Tape::sub(Var a, Var b) {
    Tensor out = gestgan::sub(val(a), val(b));
    const auto ai = a.id, bi = b.id;
    auto self = push(std::move(out), live(a) || live(b), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, bi, si](Tape& t) {
        const Tensor& dc = t.nodes_[si].grad;
        t.accum(ai, dc);
        t.accum_scaled(bi, dc, -1.0);
    };
    return self;
}

Var Tape::mul(Var a, Var b) {
    Tensor out = gestgan::mul(val(a), val(b));
    const auto ai = a.id, bi = b.id;
    auto self = push(std::move(out), live(a) || live(b), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, bi, si](Tape& t) {
        const Tensor& dc = t.nodes_[si].grad;
        if (t.nodes_[ai].live) t.accum(ai, gestgan::mul(dc, t.nodes_[bi].value));
        if (t.nodes_[bi].live) t.accum(bi, gestgan::mul(dc, t.nodes_[ai].value));
    };
    return self;
}

Var Tape::scale(Var a, double s) {
    Tensor out = gestgan::scale(val(a), s);
    const auto ai = a.id;
    auto self = push(std::move(out), live(a), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, si, s](Tape& t) { t.accum_scaled(ai, t.nodes_[si].grad, s); };
    return self;
}

Var Tape::add_rowvec(Var x, Var v) {
    const Tensor& xv = val(x);
    const Tensor& vv = val(v);
    require(xv.rank() == 2 && vv.size() == xv.cols(), "add_rowvec: shape mismatch");
    Tensor out = xv;
    for (std::size_t r = 0; r < xv.rows(); ++r) {
        kern::active().add(out.data() + r * xv.cols(), vv.data(), out.data() + r * xv.cols(),
                           xv.cols());
    }
    const auto xi = x.id, vi = v.id;
    auto self = push(std::move(out), live(x) || live(v), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [xi, vi, si](Tape& t) {
        const Tensor& dc = t.nodes_[si].grad;
        t.accum(xi, dc);
        if (t.nodes_[vi].live) {
            Tensor dv(t.nodes_[vi].value.shape());
            const std::size_t c = dc.cols();
            for (std::size_t r = 0; r < dc.rows(); ++r) {
                kern::active().add(dv.data(), dc.data() + r * c, dv.data(), c);
            }
            t.accum(vi, dv);
        }
    };
    return self;
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
    Tensor out = val(a).reshaped(shape);
    const auto ai = a.id;
    auto self = push(std::move(out), live(a), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, si](Tape& t) {
        t.accum(ai, t.nodes_[si].grad.reshaped(t.nodes_[ai].value.shape()));
    };
    return self;
}

Var Tape::slice_rows(Var a, std::size_t r0, std::size_t r1) {
    const Tensor& av = val(a);
    require(av.rank() == 2 && r0 < r1 && r1 <= av.rows(), "slice_rows: bad range");
    const std::size_t c = av.cols();
    Tensor out = Tensor::matrix(r1 - r0, c);
    std::copy(av.data() + r0 * c, av.data() + r1 * c, out.data());
    const auto ai = a.id;
    auto self = push(std::move(out), live(a), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, si, r0, c](Tape& t) {
        if (!t.nodes_[ai].live) return;
        const Tensor& dc = t.nodes_[si].grad;
        Tensor& g = t.grad_buf(ai);
        kern::active().add(g.data() + r0 * c, dc.data(), g.data() + r0 * c, dc.size());
    };
    return self;
}

Var Tape::slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Tensor& av = val(a);
    require(av.rank() == 2 && c0 < c1 && c1 <= av.cols(), "slice_cols: bad range");
    const std::size_t w = c1 - c0, c = av.cols();
    Tensor out = Tensor::matrix(av.rows(), w);
    for (std::size_t r = 0; r < av.rows(); ++r) {
        std::copy(av.data() + r * c + c0, av.data() + r * c + c1, out.data() + r * w);
    }
    const auto ai = a.id;
    auto self = push(std::move(out), live(a), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, si, c0, w, c](Tape& t) {
        if (!t.nodes_[ai].live) return;
        const Tensor& dc = t.nodes_[si].grad;
        Tensor& g = t.grad_buf(ai);
        for (std::size_t r = 0; r < dc.rows(); ++r) {
            kern::active().add(g.data() + r * c + c0, dc.data() + r * w, g.data() + r * c + c0, w);
        }
    };
    return self;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_rows: empty");
    const std::size_t c = val(parts[0]).cols();
    std::size_t rows = 0;
    bool any_live = false;
    for (Var p : parts) {
        require(val(p).rank() == 2 && val(p).cols() == c, "concat_rows: column mismatch");
        rows += val(p).rows();
        any_live = any_live || live(p);
    }
    Tensor out = Tensor::matrix(rows, c);
    std::size_t r = 0;
    std::vector<std::uint32_t> ids;
    std::vector<std::size_t> offsets;
    for (Var p : parts) {
        const Tensor& pv = val(p);
        std::copy(pv.data(), pv.data() + pv.size(), out.data() + r * c);
        ids.push_back(p.id);
        offsets.push_back(r);
        r += pv.rows();
    }
    auto self = push(std::move(out), any_live, nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ids, offsets, c, si](Tape& t) {
        const Tensor& dc = t.nodes_[si].grad;
        for (std::size_t p = 0; p < ids.size(); ++p) {
            if (!t.nodes_[ids[p]].live) continue;
            Tensor& g = t.grad_buf(ids[p]);
            kern::active().add(g.data(), dc.data() + offsets[p] * c, g.data(), g.size());
        }
    };
    return self;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols: empty");
    const std::size_t rows = val(parts[0]).rows();
    std::size_t cols = 0;
    bool any_live = false;
    for (Var p : parts) {
        require(val(p).rank() == 2 && val(p).rows() == rows, "concat_cols: row mismatch");
        cols += val(p).cols();
        any_live = any_live || live(p);
    }
    Tensor out = Tensor::matrix(rows, cols);
    std::size_t off = 0;
    std::vector<std::uint32_t> ids;
    std::vector<std::size_t> offsets, widths;
    for (Var p : parts) {
        const Tensor& pv = val(p);
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy(pv.data() + r * pv.cols(), pv.data() + (r + 1) * pv.cols(),
                      out.data() + r * cols + off);
        }
        ids.push_back(p.id);
        offsets.push_back(off);
        widths.push_back(pv.cols());
        off += pv.cols();
    }
    auto self = push(std::move(out), any_live, nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ids, offsets, widths, rows, cols, si](Tape& t) {
        const Tensor& dc = t.nodes_[si].grad;
        for (std::size_t p = 0; p < ids.size(); ++p) {
            if (!t.nodes_[ids[p]].live) continue;
            Tensor& g = t.grad_buf(ids[p]);
            const std::size_t w = widths[p];
            for (std::size_t r = 0; r < rows; ++r) {
                kern::active().add(g.data() + r * w, dc.data() + r * cols + offsets[p],
                                   g.data() + r * w, w);
            }
        }
    };
    return self;
}

Var Tape::mean_pool_rows(Var a, std::size_t window) {
    const Tensor& av = val(a);
    require(av.rank() == 2 && window >= 1 && av.rows() % window == 0,
            "mean_pool_rows: rows not divisible by window");
    const std::size_t c = av.cols(), out_r = av.rows() / window;
    Tensor out = Tensor::matrix(out_r, c);
    const double inv = 1.0 / static_cast<double>(window);
    for (std::size_t r = 0; r < out_r; ++r) {
        for (std::size_t w = 0; w < window; ++w) {
            kern::active().add(out.data() + r * c, av.data() + (r * window + w) * c,
                               out.data() + r * c, c);
        }
        kern::active().scale(out.data() + r * c, inv, out.data() + r * c, c);
    }
    const auto ai = a.id;
    auto self = push(std::move(out), live(a), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, si, window, c, inv](Tape& t) {
        if (!t.nodes_[ai].live) return;
        const Tensor& dc = t.nodes_[si].grad;
        Tensor& g = t.grad_buf(ai);
        for (std::size_t r = 0; r < dc.rows(); ++r) {
            for (std::size_t w = 0; w < window; ++w) {
                kern::active().axpy(inv, dc.data() + r * c, g.data() + (r * window + w) * c, c);
            }
        }
    };
    return self;
}

Var Tape::softmax_rows(Var a) {
    const Tensor& av = val(a);
    require(av.rank() == 2, "softmax_rows: rank-2 input required");
    Tensor out = Tensor::matrix(av.rows(), av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r) {
        double mx = av.at(r, 0);
        for (std::size_t j = 1; j < av.cols(); ++j) mx = std::max(mx, av.at(r, j));
        double z = 0.0;
        for (std::size_t j = 0; j < av.cols(); ++j) {
            const double e = std::exp(av.at(r, j) - mx);
            out.at(r, j) = e;
            z += e;
        }
        const double iz = 1.0 / z;
        for (std::size_t j = 0; j < av.cols(); ++j) out.at(r, j) *= iz;
    }
    const auto ai = a.id;
    auto self = push(std::move(out), live(a), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, si](Tape& t) {
        if (!t.nodes_[ai].live) return;
        const Tensor& p = t.nodes_[si].value;
        const Tensor& dp = t.nodes_[si].grad;
        Tensor dx(p.shape());
        for (std::size_t r = 0; r < p.rows(); ++r) {
            double s = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j) s += dp.at(r, j) * p.at(r, j);
            for (std::size_t j = 0; j < p.cols(); ++j) {
                dx.at(r, j) = p.at(r, j) * (dp.at(r, j) - s);
            }
        }
        t.accum(ai, dx);
    };
    return self;
}

Var Tape::selu(Var a) {
    const Tensor& av = val(a);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = selu_fwd(av[i]);
    const auto ai = a.id;
    auto self = push(std::move(out), live(a), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, si](Tape& t) {
        if (!t.nodes_[ai].live) return;
        const Tensor& x = t.nodes_[ai].value;
        const Tensor& dc = t.nodes_[si].grad;
        Tensor dx(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] = dc[i] * selu_grad(x[i]);
        t.accum(ai, dx);
    };
    return self;
}

Var Tape::gelu(Var a) {
    const Tensor& av = val(a);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = gelu_fwd(av[i]);
    const auto ai = a.id;
    auto self = push(std::move(out), live(a), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, si](Tape& t) {
        if (!t.nodes_[ai].live) return;
        const Tensor& x = t.nodes_[ai].value;
        const Tensor& dc = t.nodes_[si].grad;
        Tensor dx(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] = dc[i] * gelu_grad(x[i]);
        t.accum(ai, dx);
    };
    return self;
}

Var Tape::sigmoid(Var a) {
    const Tensor& av = val(a);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = sigmoid_fwd(av[i]);
    const auto ai = a.id;
    auto self = push(std::move(out), live(a), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, si](Tape& t) {
        if (!t.nodes_[ai].live) return;
        const Tensor& s = t.nodes_[si].value;
        const Tensor& dc = t.nodes_[si].grad;
        Tensor dx(s.shape());
        for (std::size_t i = 0; i < s.size(); ++i) dx[i] = dc[i] * s[i] * (1.0 - s[i]);
        t.accum(ai, dx);
    };
    return self;
}

Var Tape::softplus(Var a) {
    const Tensor& av = val(a);
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = softplus_fwd(av[i]);
    const auto ai = a.id;
    auto self = push(std::move(out), live(a), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, si](Tape& t) {
        if (!t.nodes_[ai].live) return;
        const Tensor& x = t.nodes_[ai].value;
        const Tensor& dc = t.nodes_[si].grad;
        Tensor dx(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) dx[i] = dc[i] * sigmoid_fwd(x[i]);
        t.accum(ai, dx);
    };
    return self;
}

Var Tape::group_norm(Var x, std::size_t groups, Var gain, Var bias) {
    GroupNormCtx ctx;
    Tensor out = group_norm_fwd(val(x), groups, val(gain), val(bias), &ctx);
    const auto xi = x.id, gi = gain.id, bi = bias.id;
    auto self = push(std::move(out), live(x) || live(gain) || live(bias), nullptr);
    const auto si = self.id;
    Tensor xhat = std::move(ctx.xhat);
    Tensor inv_w = std::move(ctx.inv_w);
    nodes_[si].vjp = [xi, gi, bi, si, groups, xhat = std::move(xhat),
                      inv_w = std::move(inv_w)](Tape& t) {
        const Tensor& dc = t.nodes_[si].grad;
        const std::size_t rows = dc.rows(), ch = dc.cols(), gs = ch / groups;
        const Tensor& gain_v = t.nodes_[gi].value;
        if (t.nodes_[gi].live) {
            Tensor dgain(gain_v.shape());
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < ch; ++c) dgain[c] += dc.at(r, c) * xhat.at(r, c);
            }
            t.accum(gi, dgain);
        }
        if (t.nodes_[bi].live) {
            Tensor dbias(t.nodes_[bi].value.shape());
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < ch; ++c) dbias[c] += dc.at(r, c);
            }
            t.accum(bi, dbias);
        }
        if (t.nodes_[xi].live) {
            Tensor dx = Tensor::matrix(rows, ch);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t g = 0; g < groups; ++g) {
                    const std::size_t c0 = g * gs;
                    double mean_h = 0.0, mean_hx = 0.0;
                    for (std::size_t c = 0; c < gs; ++c) {
                        const double h = gain_v[c0 + c] * dc.at(r, c0 + c);
                        mean_h += h;
                        mean_hx += h * xhat.at(r, c0 + c);
                    }
                    mean_h /= static_cast<double>(gs);
                    mean_hx /= static_cast<double>(gs);
                    const double iw = inv_w.at(r, g);
                    for (std::size_t c = 0; c < gs; ++c) {
                        const double h = gain_v[c0 + c] * dc.at(r, c0 + c);
                        dx.at(r, c0 + c) =
                            (h - mean_h - xhat.at(r, c0 + c) * mean_hx) * iw;
                    }
                }
            }
            t.accum(xi, dx);
        }
    };
    return self;
}

Var Tape::sum(Var a) {
    const double s = gestgan::sum(val(a));
    const auto ai = a.id;
    auto self = push(Tensor::scalar(s), live(a), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, si](Tape& t) {
        if (!t.nodes_[ai].live) return;
        const double g = t.nodes_[si].grad[0];
        Tensor& buf = t.grad_buf(ai);
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g;
    };
    return self;
}

Var Tape::mean(Var a) {
    const std::size_t n = val(a).size();
    const double s = gestgan::sum(val(a)) / static_cast<double>(n);
    const auto ai = a.id;
    auto self = push(Tensor::scalar(s), live(a), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [ai, si, n](Tape& t) {
        if (!t.nodes_[ai].live) return;
        const double g = t.nodes_[si].grad[0] / static_cast<double>(n);
        Tensor& buf = t.grad_buf(ai);
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g;
    };
    return self;
}

Var Tape::huber_mean(Var pred, Var target, double delta) {
    const Tensor& pv = val(pred);
    const Tensor& tv = val(target);
    require(pv.same_shape(tv), "huber_mean: shape mismatch");
    require(delta > 0.0, "huber_mean: delta must be positive");
    const double loss = gestgan::huber_loss(pv, tv, delta);
    const auto pi = pred.id, ti = target.id;
    auto self = push(Tensor::scalar(loss), live(pred) || live(target), nullptr);
    const auto si = self.id;
    nodes_[si].vjp = [pi, ti, si, delta](Tape& t) {
        const double g = t.nodes_[si].grad[0];
        const Tensor& p = t.nodes_[pi].value;
        const Tensor& tgt = t.nodes_[ti].value;
        const double inv_n = 1.0 / static_cast<double>(p.size());
        Tensor d(p.shape());
        for (std::size_t i = 0; i < p.size(); ++i) {
            d[i] = g * inv_n * huber_grad_point(p[i] - tgt[i], delta);
        }
        t.accum(pi, d);
        t.accum_scaled(ti, d, -1.0);
    };
    return self;
}

void Tape::backward(Var loss) {
    require(loss.valid() && loss.id < nodes_.size(), "backward: invalid loss node");
    require(!backward_done_, "backward: tape already consumed");
    const Tensor& lv = nodes_[loss.id].value;
    if (!lv.is_scalar()) throw std::invalid_argument("backward: loss must be a scalar");
    if (!lv.finite()) throw NumericError("backward: loss is not finite");
    backward_done_ = true;

    grad_buf(loss.id)[0] = 1.0;
    for (std::uint32_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.live || !n.grad_set || !n.vjp) continue;
        n.vjp(*this);
    }
    for (const Node& n : nodes_) {
        if (n.grad_set && !n.grad.finite()) {
            throw NumericError("backward: non-finite gradient encountered");
        }
    }
}

const Tensor& Tape::grad(Var v) {
    require(backward_done_, "grad: backward() has not run");
    return grad_buf(v.id);
}

}  // namespace gestgan
