#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "gestgan/tensor.hpp"

namespace gestgan {

enum class ScheduleKind { linear, geometric_alpha };

std::string to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(const std::string& s);

// Forward-process noise schedule. Step indices are 1-based (t in [1, T]);
// alpha_bars is indexed 0..T with alpha_bars[0] == 1.
// Naming note: alpha_bars[t] = prod_{s<=t} (1 - betas[s]) is the cumulative
// signal fraction (often written ᾱ_t; some papers write it α_t).
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::geometric_alpha;
    std::size_t T = 0;
    std::vector<double> betas;       // betas[t-1] = β_t, t in [1, T]
    std::vector<double> alpha_bars;  // alpha_bars[t], t in [0, T]
    std::vector<double> sigmas;      // sigmas[t-1] = σ_t = sqrt(β_t)

    double beta(std::size_t t) const;       // t in [1, T]
    double alpha_bar(std::size_t t) const;  // t in [0, T]
    double sigma(std::size_t t) const;      // t in [1, T]

    // Throws std::invalid_argument if the type invariants are violated.
    void validate() const;
};

// geometric-alpha: alpha_bars[t] = exp(-c t / T), c = ln(1e4), so
// alpha_bars[T] = 1e-4 (near-total signal destruction for few-step training).
// linear: β ramps linearly with a 1:200 first-to-last ratio (the classic
// DDPM ramp shape), globally rescaled by bisection so alpha_bars[T] = 4e-5.
NoiseSchedule make_schedule(std::size_t T, ScheduleKind kind);

// x_t = sqrt(1 - β_t) x_prev + sqrt(β_t) eps          (one forward step)
Tensor forward_step(const Tensor& x_prev, std::size_t t, const NoiseSchedule& sched,
                    const Tensor& eps);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps        (forward marginal)
Tensor q_sample(const Tensor& x0, std::size_t t, const NoiseSchedule& sched, const Tensor& eps);

struct PosteriorCoeffs {
    double coef_x0 = 0.0;  // multiplies the clean estimate
    double coef_xt = 0.0;  // multiplies the current noisy state
    double sigma = 0.0;    // reverse noise scale (0 at t == 1)
};

PosteriorCoeffs posterior_coeffs(const NoiseSchedule& sched, std::size_t t);

// x_{t-1} = coef_x0 * x0_hat + coef_xt * x_t + sigma * z. At t == 1 the
// result is exactly x0_hat (noise dropped, posterior collapses).
Tensor posterior_step(const Tensor& x_t, const Tensor& x0_hat, std::size_t t,
                      const NoiseSchedule& sched, const Tensor& z);

// DDIM update from step t to t_next < t. eta = 0 is deterministic (z is
// ignored); eta = 1 for adjacent steps matches posterior_step's mean with
// the standard DDIM sigma-term variance (see README: Schedules).
Tensor ddim_step(const Tensor& x_t, const Tensor& x0_hat, std::size_t t, std::size_t t_next,
                 const NoiseSchedule& sched, double eta, const Tensor& z);

// Plain-text key=value serialization (hexfloat values, bit-exact round-trip).
void save_schedule(std::ostream& os, const NoiseSchedule& sched);
NoiseSchedule load_schedule(std::istream& is);

}  // namespace gestgan
