#pragma once

#include <cstdint>
#include <vector>

#include "gestgan/tensor.hpp"

namespace gestgan {

// Decoupled-weight-decay Adam. Moment buffers are allocated lazily on the
// first step so the state can be declared before the parameter shapes exist.
struct AdamWState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    std::uint64_t step_count = 0;
    std::vector<Tensor> m;  // first moments, shapes mirror params
    std::vector<Tensor> v;  // second moments
};

AdamWState make_adamw(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                      double weight_decay = 1e-4);

// One update: p -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p).
// Throws NumericError if any gradient is non-finite (an aborted step leaves
// params and moments untouched).
void adamw_step(AdamWState& state, const std::vector<Tensor*>& params,
                const std::vector<const Tensor*>& grads);

// Exponential moving average of a parameter set.
struct EmaState {
    double decay = 0.999;
    std::vector<Tensor> shadow;
};

EmaState make_ema(double decay, const std::vector<const Tensor*>& params);

// shadow <- decay * shadow + (1 - decay) * params
void ema_update(EmaState& state, const std::vector<const Tensor*>& params);

}  // namespace gestgan
