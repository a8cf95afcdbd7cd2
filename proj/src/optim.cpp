#include "gestgan/optim.hpp"

#include <cmath>

namespace gestgan {

AdamWState make_adamw(double lr, double beta1, double beta2, double eps, double weight_decay) {
    require(lr > 0.0 && eps > 0.0, "make_adamw: lr and eps must be positive");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
            "make_adamw: betas must lie in [0,1)");
    require(weight_decay >= 0.0, "make_adamw: weight decay must be nonnegative");
    AdamWState s;
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    s.weight_decay = weight_decay;
    return s;
}

void adamw_step(AdamWState& state, const std::vector<Tensor*>& params,
                const std::vector<const Tensor*>& grads) {
    require(params.size() == grads.size(), "adamw_step: param/grad count mismatch");
    if (state.m.empty()) {
        state.m.reserve(params.size());
        state.v.reserve(params.size());
        for (const Tensor* p : params) {
            state.m.emplace_back(p->shape());
            state.v.emplace_back(p->shape());
        }
    }
    require(state.m.size() == params.size(), "adamw_step: state sized for a different model");
    for (std::size_t i = 0; i < params.size(); ++i) {
        require(params[i]->same_shape(*grads[i]), "adamw_step: param/grad shape mismatch");
        require(state.m[i].same_shape(*params[i]), "adamw_step: moment/param shape mismatch");
        if (!grads[i]->finite()) throw NumericError("adamw_step: non-finite gradient");
    }

    const std::uint64_t t = state.step_count + 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bc1;
            const double v_hat = v[j] / bc2;
            p[j] -= state.lr * (m_hat / (std::sqrt(v_hat) + state.eps) +
                                state.weight_decay * p[j]);
        }
        if (!p.finite()) throw NumericError("adamw_step: non-finite parameter after update");
    }
    state.step_count = t;
}

EmaState make_ema(double decay, const std::vector<const Tensor*>& params) {
    require(decay >= 0.0 && decay <= 1.0, "make_ema: decay must lie in [0,1]");
    EmaState s;
    s.decay = decay;
    s.shadow.reserve(params.size());
    for (const Tensor* p : params) s.shadow.push_back(*p);
    return s;
}

void ema_update(EmaState& state, const std::vector<const Tensor*>& params) {
    require(state.shadow.size() == params.size(), "ema_update: param count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& sh = state.shadow[i];
        const Tensor& p = *params[i];
        require(sh.same_shape(p), "ema_update: shape mismatch");
        for (std::size_t j = 0; j < sh.size(); ++j) {
            sh[j] = state.decay * sh[j] + (1.0 - state.decay) * p[j];
        }
    }
}

}  // namespace gestgan
