#include "gestgan/schedule.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

namespace gestgan {

std::string to_string(ScheduleKind k) {
    return k == ScheduleKind::linear ? "linear" : "geometric-alpha";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "geometric-alpha") return ScheduleKind::geometric_alpha;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

double NoiseSchedule::beta(std::size_t t) const {
    require(t >= 1 && t <= T, "NoiseSchedule::beta: t outside [1, T]");
    return betas[t - 1];
}

double NoiseSchedule::alpha_bar(std::size_t t) const {
    require(t <= T, "NoiseSchedule::alpha_bar: t outside [0, T]");
    return alpha_bars[t];
}

double NoiseSchedule::sigma(std::size_t t) const {
    require(t >= 1 && t <= T, "NoiseSchedule::sigma: t outside [1, T]");
    return sigmas[t - 1];
}

void NoiseSchedule::validate() const {
    require(T >= 1 && T <= 1000, "NoiseSchedule: T outside [1, 1000]");
    require(betas.size() == T && sigmas.size() == T && alpha_bars.size() == T + 1,
            "NoiseSchedule: array sizes inconsistent with T");
    require(alpha_bars[0] == 1.0, "NoiseSchedule: alpha_bars[0] must be 1");
    for (std::size_t t = 1; t <= T; ++t) {
        require(betas[t - 1] > 0.0 && betas[t - 1] < 1.0, "NoiseSchedule: beta outside (0,1)");
        require(alpha_bars[t] < alpha_bars[t - 1], "NoiseSchedule: alpha_bars not decreasing");
        require(alpha_bars[t] > 0.0, "NoiseSchedule: alpha_bars must stay positive");
    }
    require(alpha_bars[T] < 1e-3, "NoiseSchedule: alpha_bars[T] must be < 1e-3");
}

namespace {

constexpr double kGeometricTerminal = 1e-4;  // alpha_bars[T] for geometric-alpha
constexpr double kLinearTerminal = 4e-5;     // alpha_bars[T] for linear
constexpr double kLinearRatio = 200.0;       // β_T / β_1 ramp ratio

NoiseSchedule from_betas(ScheduleKind kind, std::size_t T, std::vector<double> betas) {
    NoiseSchedule s;
    s.kind = kind;
    s.T = T;
    s.betas = std::move(betas);
    s.alpha_bars.resize(T + 1);
    s.alpha_bars[0] = 1.0;
    for (std::size_t t = 1; t <= T; ++t) {
        s.alpha_bars[t] = s.alpha_bars[t - 1] * (1.0 - s.betas[t - 1]);
    }
    s.sigmas.resize(T);
    for (std::size_t t = 0; t < T; ++t) s.sigmas[t] = std::sqrt(s.betas[t]);
    return s;
}

std::vector<double> linear_betas(std::size_t T, double scale) {
    std::vector<double> betas(T);
    for (std::size_t t = 1; t <= T; ++t) {
        const double frac =
            T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
        betas[t - 1] = scale * (1.0 + frac * (kLinearRatio - 1.0));
    }
    return betas;
}

double linear_log_abar(std::size_t T, double scale) {
    double acc = 0.0;
    for (double b : linear_betas(T, scale)) acc += std::log1p(-b);
    return acc;
}

}  // namespace

NoiseSchedule make_schedule(std::size_t T, ScheduleKind kind) {
    require(T >= 1 && T <= 1000, "make_schedule: T outside [1, 1000]");
    NoiseSchedule s;
    if (kind == ScheduleKind::geometric_alpha) {
        // alpha_bars[t] = exp(-c t / T) means a constant ratio between
        // consecutive alpha_bars, i.e. a single repeated beta.
        const double c = std::log(1.0 / kGeometricTerminal);
        const double ratio = std::exp(-c / static_cast<double>(T));
        s = from_betas(kind, T, std::vector<double>(T, 1.0 - ratio));
    } else {
        if (T == 1) {
            s = from_betas(kind, T, {1.0 - kLinearTerminal});
        } else {
            // Bisection on the global scale: product(1 - β_t) is strictly
            // decreasing in scale; bracket is (0, 1/ratio) where β_T hits 1.
            double lo = 0.0, hi = (1.0 - 1e-12) / kLinearRatio;
            const double target = std::log(kLinearTerminal);
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (linear_log_abar(T, mid) > target) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            s = from_betas(kind, T, linear_betas(T, 0.5 * (lo + hi)));
        }
    }
    s.validate();
    return s;
}

Tensor forward_step(const Tensor& x_prev, std::size_t t, const NoiseSchedule& sched,
                    const Tensor& eps) {
    require(x_prev.same_shape(eps), "forward_step: x/eps shape mismatch");
    const double b = sched.beta(t);
    Tensor out = scale(x_prev, std::sqrt(1.0 - b));
    axpy_inplace(std::sqrt(b), eps, out);
    return out;
}

Tensor q_sample(const Tensor& x0, std::size_t t, const NoiseSchedule& sched, const Tensor& eps) {
    require(x0.same_shape(eps), "q_sample: x/eps shape mismatch");
    require(t >= 1 && t <= sched.T, "q_sample: t outside [1, T]");
    const double ab = sched.alpha_bar(t);
    Tensor out = scale(x0, std::sqrt(ab));
    axpy_inplace(std::sqrt(1.0 - ab), eps, out);
    return out;
}

PosteriorCoeffs posterior_coeffs(const NoiseSchedule& sched, std::size_t t) {
    require(t >= 1 && t <= sched.T, "posterior_coeffs: t outside [1, T]");
    if (t == 1) return {1.0, 0.0, 0.0};
    const double ab_t = sched.alpha_bar(t);
    const double ab_prev = sched.alpha_bar(t - 1);
    const double b = sched.beta(t);
    PosteriorCoeffs c;
    c.coef_x0 = std::sqrt(ab_prev) * b / (1.0 - ab_t);
    c.coef_xt = std::sqrt(1.0 - b) * (1.0 - ab_prev) / (1.0 - ab_t);
    c.sigma = sched.sigma(t);
    return c;
}

Tensor posterior_step(const Tensor& x_t, const Tensor& x0_hat, std::size_t t,
                      const NoiseSchedule& sched, const Tensor& z) {
    require(x_t.same_shape(x0_hat) && x_t.same_shape(z), "posterior_step: shape mismatch");
    require(t >= 1, "posterior_step: t must be >= 1");
    if (t == 1) return x0_hat;  // alpha_bars[0] = 1: posterior collapses onto x0_hat
    const PosteriorCoeffs c = posterior_coeffs(sched, t);
    Tensor out = scale(x0_hat, c.coef_x0);
    axpy_inplace(c.coef_xt, x_t, out);
    axpy_inplace(c.sigma, z, out);
    return out;
}

Tensor ddim_step(const Tensor& x_t, const Tensor& x0_hat, std::size_t t, std::size_t t_next,
                 const NoiseSchedule& sched, double eta, const Tensor& z) {
    require(x_t.same_shape(x0_hat), "ddim_step: shape mismatch");
    require(t >= 1 && t <= sched.T, "ddim_step: t outside [1, T]");
    require(t_next < t, "ddim_step: t_next must precede t");
    require(eta >= 0.0 && eta <= 1.0, "ddim_step: eta outside [0, 1]");
    const double ab_t = sched.alpha_bar(t);
    const double ab_n = sched.alpha_bar(t_next);

    // eps_hat = (x_t - sqrt(ab_t) x0_hat) / sqrt(1 - ab_t)
    Tensor eps_hat = scale(x0_hat, -std::sqrt(ab_t));
    add_inplace(eps_hat, x_t);
    scale_inplace(eps_hat, 1.0 / std::sqrt(1.0 - ab_t));

    // Standard DDIM sigma-term; s == 0 when eta == 0 or t_next == 0 maps the
    // update onto the deterministic probability-flow trajectory.
    const double s =
        eta * std::sqrt((1.0 - ab_n) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_n);
    const double dir = std::sqrt(std::max(1.0 - ab_n - s * s, 0.0));

    Tensor out = scale(x0_hat, std::sqrt(ab_n));
    axpy_inplace(dir, eps_hat, out);
    if (s != 0.0) {
        require(x_t.same_shape(z), "ddim_step: z shape mismatch");
        axpy_inplace(s, z, out);
    }
    return out;
}

void save_schedule(std::ostream& os, const NoiseSchedule& sched) {
    os << "schedule.kind=" << to_string(sched.kind) << "\n";
    os << "schedule.T=" << sched.T << "\n";
    char buf[64];
    auto put = [&](const char* key, const std::vector<double>& xs) {
        os << key << "=";
        for (std::size_t i = 0; i < xs.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%a", xs[i]);
            os << (i ? " " : "") << buf;
        }
        os << "\n";
    };
    put("schedule.betas", sched.betas);
    put("schedule.alpha_bars", sched.alpha_bars);
    put("schedule.sigmas", sched.sigmas);
    if (!os) throw IoError("save_schedule: stream write failed");
}

namespace {

std::vector<double> parse_hex_list(const std::string& line) {
    std::vector<double> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(std::strtod(tok.c_str(), nullptr));
    return out;
}

std::string expect_kv(std::istream& is, const std::string& key) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("load_schedule: truncated stream");
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.substr(0, eq) != key) {
        throw IoError("load_schedule: expected key '" + key + "', got '" + line + "'");
    }
    return line.substr(eq + 1);
}

}  // namespace

NoiseSchedule load_schedule(std::istream& is) {
    NoiseSchedule s;
    s.kind = schedule_kind_from_string(expect_kv(is, "schedule.kind"));
    s.T = static_cast<std::size_t>(std::stoull(expect_kv(is, "schedule.T")));
    s.betas = parse_hex_list(expect_kv(is, "schedule.betas"));
    s.alpha_bars = parse_hex_list(expect_kv(is, "schedule.alpha_bars"));
    s.sigmas = parse_hex_list(expect_kv(is, "schedule.sigmas"));
    s.validate();
    return s;
}

}  // namespace gestgan
