#include <cmath>
#include <sstream>

#include "doctest.h"
#include "gestgan/rng.hpp"
#include "gestgan/schedule.hpp"
#include "gestgan/tensor.hpp"

using namespace gestgan;

namespace {

// Hand-built schedule (bypasses make_schedule) for targeted algebra checks.
NoiseSchedule manual_schedule(std::vector<double> betas) {
    NoiseSchedule s;
    s.kind = ScheduleKind::linear;
    s.T = betas.size();
    s.betas = std::move(betas);
    s.alpha_bars.assign(s.T + 1, 1.0);
    for (std::size_t t = 1; t <= s.T; ++t) {
        s.alpha_bars[t] = s.alpha_bars[t - 1] * (1.0 - s.betas[t - 1]);
    }
    s.sigmas.resize(s.T);
    for (std::size_t t = 0; t < s.T; ++t) s.sigmas[t] = std::sqrt(s.betas[t]);
    return s;
}

}  // namespace

TEST_CASE("make_schedule: geometric-alpha endpoints and closed form") {
    SUBCASE("T=1: single step removes nearly all signal") {
        NoiseSchedule s = make_schedule(1, ScheduleKind::geometric_alpha);
        CHECK(s.beta(1) == doctest::Approx(1.0 - 1e-4).epsilon(1e-12));
        CHECK(s.alpha_bar(1) == doctest::Approx(1e-4).epsilon(1e-12));
    }
    SUBCASE("T=10: alpha_bar at the midpoint is 1e-2") {
        NoiseSchedule s = make_schedule(10, ScheduleKind::geometric_alpha);
        CHECK(s.alpha_bar(5) == doctest::Approx(1e-2).epsilon(1e-12));
        CHECK(s.alpha_bar(10) == doctest::Approx(1e-4).epsilon(1e-12));
    }
    SUBCASE("closed form exp(-c t / T) holds for every t") {
        NoiseSchedule s = make_schedule(20, ScheduleKind::geometric_alpha);
        const double c = std::log(1e4);
        for (std::size_t t = 0; t <= 20; ++t) {
            CHECK(s.alpha_bar(t) == doctest::Approx(std::exp(-c * t / 20.0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("make_schedule: definitional product identity and invariants") {
    for (ScheduleKind kind : {ScheduleKind::geometric_alpha, ScheduleKind::linear}) {
        for (std::size_t T : {std::size_t{1}, std::size_t{5}, std::size_t{10}, std::size_t{50},
                              std::size_t{100}}) {
            CAPTURE(to_string(kind));
            CAPTURE(T);
            NoiseSchedule s = make_schedule(T, kind);
            CHECK(s.alpha_bar(0) == 1.0);
            double prod = 1.0;
            for (std::size_t t = 1; t <= T; ++t) {
                CHECK(s.beta(t) > 0.0);
                CHECK(s.beta(t) < 1.0);
                prod *= 1.0 - s.beta(t);
                CHECK(std::abs(prod - s.alpha_bar(t)) < 1e-12);
                CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
                CHECK(s.sigma(t) * s.sigma(t) == doctest::Approx(s.beta(t)).epsilon(1e-15));
            }
            CHECK(s.alpha_bar(T) < 1e-3);
        }
    }
    SUBCASE("linear: terminal alpha_bar hits 4e-5 and the ramp ratio is 200") {
        NoiseSchedule s = make_schedule(50, ScheduleKind::linear);
        CHECK(s.alpha_bar(50) == doctest::Approx(4e-5).epsilon(1e-9));
        CHECK(s.beta(50) / s.beta(1) == doctest::Approx(200.0).epsilon(1e-9));
    }
    CHECK_THROWS_AS(make_schedule(0, ScheduleKind::linear), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(1001, ScheduleKind::linear), std::invalid_argument);
}

TEST_CASE("forward_step boundary cases") {
    NoiseSchedule s = manual_schedule({0.5, 0.5});
    s.betas[0] = 0.0;  // beta=0: identity
    s.betas[1] = 1.0;  // beta=1: pure noise
    Tensor x({4}, {1, -2, 3, -4});
    Tensor eps({4}, {0.1, 0.2, 0.3, 0.4});
    CHECK(max_abs_diff(forward_step(x, 1, s, eps), x) == 0.0);
    CHECK(max_abs_diff(forward_step(x, 2, s, eps), eps) == 0.0);
    CHECK_THROWS_AS(forward_step(x, 3, s, eps), std::invalid_argument);
    CHECK_THROWS_AS(forward_step(x, 0, s, eps), std::invalid_argument);
}

TEST_CASE("q_sample closed form and terminal coefficient") {
    NoiseSchedule s = make_schedule(10, ScheduleKind::geometric_alpha);
    Tensor zero({3});
    Tensor eps({3}, {1.0, -1.0, 2.0});
    // x0 = 0: pure noise path
    Tensor xt = q_sample(zero, 4, s, eps);
    const double coef = std::sqrt(1.0 - s.alpha_bar(4));
    for (std::size_t i = 0; i < 3; ++i) CHECK(xt[i] == doctest::Approx(coef * eps[i]));
    // t = T: signal coefficient is sqrt(1e-4) = 0.01
    Tensor x0({1}, {1.0});
    Tensor e0({1}, {0.0});
    CHECK(q_sample(x0, 10, s, e0)[0] == doctest::Approx(0.01).epsilon(1e-10));
}

TEST_CASE("forward_step composition matches q_sample moments (Monte Carlo)") {
    const std::size_t n = 100000;
    NoiseSchedule s = make_schedule(5, ScheduleKind::geometric_alpha);
    const std::size_t t = 3;
    const double x0v = 0.7;
    Rng rng(31415);
    Tensor x0({1}, {x0v});

    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor x = x0;
        for (std::size_t step = 1; step <= t; ++step) {
            Tensor eps({1}, {rng.normal()});
            x = forward_step(x, step, s, eps);
        }
        s1 += x[0];
        s2 += x[0] * x[0];
    }
    const double mean = s1 / double(n);
    const double var = s2 / double(n) - mean * mean;
    const double want_mean = std::sqrt(s.alpha_bar(t)) * x0v;
    const double want_var = 1.0 - s.alpha_bar(t);
    const double se_mean = std::sqrt(want_var / double(n));
    const double se_var = want_var * std::sqrt(2.0 / double(n - 1));
    CHECK(std::abs(mean - want_mean) < 3.0 * se_mean);
    CHECK(std::abs(var - want_var) < 3.0 * se_var);
}

TEST_CASE("posterior_step: collapse at t=1, coefficient identities") {
    NoiseSchedule s = make_schedule(10, ScheduleKind::geometric_alpha);
    Tensor xt({3}, {0.3, -0.6, 0.9});
    Tensor x0({3}, {1.0, 2.0, 3.0});
    Tensor z({3}, {0.5, 0.5, 0.5});

    SUBCASE("t=1 returns x0_hat exactly, noise dropped") {
        CHECK(max_abs_diff(posterior_step(xt, x0, 1, s, z), x0) == 0.0);
    }
    SUBCASE("coefficients sum to 1 as beta -> 0") {
        NoiseSchedule tiny = manual_schedule({1e-4, 1e-10});
        const PosteriorCoeffs c = posterior_coeffs(tiny, 2);
        CHECK(c.coef_x0 + c.coef_xt == doctest::Approx(1.0).epsilon(1e-8));
    }
    SUBCASE("t=0 is an error") {
        CHECK_THROWS_AS(posterior_step(xt, x0, 0, s, z), std::invalid_argument);
    }
    SUBCASE("shape mismatch is an error") {
        Tensor bad({2});
        CHECK_THROWS_AS(posterior_step(xt, bad, 2, s, z), std::invalid_argument);
    }
}

TEST_CASE("posterior_step mean equals the quadrature conditional mean") {
    // Scalar chain, x0 known exactly: E[x_{t-1} | x_t, x0] by numerical
    // integration over x_{t-1} against q(x_{t-1}|x0) q(x_t|x_{t-1}).
    NoiseSchedule s = make_schedule(6, ScheduleKind::geometric_alpha);
    const std::size_t t = 4;
    const double x0v = 0.8, xtv = -0.4;
    const double ab_p = s.alpha_bar(t - 1), b = s.beta(t);

    const double m_prev = std::sqrt(ab_p) * x0v;
    const double v_prev = 1.0 - ab_p;
    const std::size_t n = 200001;
    const double lo = m_prev - 10.0 * std::sqrt(v_prev), hi = m_prev + 10.0 * std::sqrt(v_prev);
    const double h = (hi - lo) / double(n - 1);
    double mass = 0.0, mom = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xp = lo + h * double(i);
        const double d1 = xp - m_prev;
        const double q_prev = std::exp(-0.5 * d1 * d1 / v_prev);
        const double d2 = xtv - std::sqrt(1.0 - b) * xp;
        const double q_step = std::exp(-0.5 * d2 * d2 / b);
        const double w = q_prev * q_step * ((i == 0 || i == n - 1) ? 0.5 : 1.0);
        mass += w;
        mom += w * xp;
    }
    const double quad_mean = mom / mass;

    Tensor xt({1}, {xtv}), x0({1}, {x0v}), z({1}, {0.0});
    const double step_mean = posterior_step(xt, x0, t, s, z)[0];
    CHECK(step_mean == doctest::Approx(quad_mean).epsilon(1e-8));
}

TEST_CASE("posterior_step marginalization moments (sigma^2 = beta convention)") {
    // Drawing x_t ~ q(.|x0) then x_{t-1} = posterior_step(x_t, x0, z):
    // the mean reproduces q(x_{t-1}|x0)'s mean exactly; the variance carries
    // the documented offset (beta_t - beta_tilde_t) because sigma_t^2 is
    // pinned to beta_t rather than the posterior variance beta_tilde_t.
    NoiseSchedule s = make_schedule(10, ScheduleKind::geometric_alpha);
    const std::size_t t = 5;
    const double x0v = 0.6;
    const double ab_t = s.alpha_bar(t), ab_p = s.alpha_bar(t - 1), b = s.beta(t);
    const double beta_tilde = b * (1.0 - ab_p) / (1.0 - ab_t);

    const std::size_t n = 100000;
    Rng rng(777);
    Tensor x0({1}, {x0v});
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor eps({1}, {rng.normal()});
        Tensor xt = q_sample(x0, t, s, eps);
        Tensor z({1}, {rng.normal()});
        Tensor xp = posterior_step(xt, x0, t, s, z);
        s1 += xp[0];
        s2 += xp[0] * xp[0];
    }
    const double mean = s1 / double(n);
    const double var = s2 / double(n) - mean * mean;
    const double want_mean = std::sqrt(ab_p) * x0v;
    const double want_var = (1.0 - ab_p) + (b - beta_tilde);  // exact for sigma^2 = beta
    const double se_mean = std::sqrt(want_var / double(n));
    const double se_var = want_var * std::sqrt(2.0 / double(n - 1));
    CHECK(std::abs(mean - want_mean) < 3.0 * se_mean);
    CHECK(std::abs(var - want_var) < 3.0 * se_var);

    SUBCASE("with sigma^2 = beta_tilde the match to q(x_{t-1}|x0) is exact") {
        NoiseSchedule st = s;
        st.sigmas[t - 1] = std::sqrt(beta_tilde);
        Rng rng2(778);
        double u1 = 0.0, u2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            Tensor eps({1}, {rng2.normal()});
            Tensor xt = q_sample(x0, t, st, eps);
            Tensor z({1}, {rng2.normal()});
            Tensor xp = posterior_step(xt, x0, t, st, z);
            u1 += xp[0];
            u2 += xp[0] * xp[0];
        }
        const double m2 = u1 / double(n);
        const double v2 = u2 / double(n) - m2 * m2;
        const double wv = 1.0 - ab_p;
        CHECK(std::abs(m2 - want_mean) < 3.0 * std::sqrt(wv / double(n)));
        CHECK(std::abs(v2 - wv) < 3.0 * wv * std::sqrt(2.0 / double(n - 1)));
    }
}

TEST_CASE("ddim_step: determinism, collapse at t_next=0, eta=1 moments") {
    NoiseSchedule s = make_schedule(10, ScheduleKind::geometric_alpha);
    Tensor xt({3}, {0.3, -0.6, 0.9});
    Tensor x0({3}, {1.0, -2.0, 0.5});
    Tensor z({3}, {0.7, -0.7, 0.7});
    Tensor z0({3});

    SUBCASE("t_next=0 with eta=0 returns x0_hat") {
        CHECK(max_abs_diff(ddim_step(xt, x0, 3, 0, s, 0.0, z0), x0) == 0.0);
    }
    SUBCASE("eta=0 is bitwise deterministic") {
        Tensor a = ddim_step(xt, x0, 7, 3, s, 0.0, z0);
        Tensor b = ddim_step(xt, x0, 7, 3, s, 0.0, z0);
        CHECK(max_abs_diff(a, b) == 0.0);
    }
    SUBCASE("eta=1 adjacent step: mean equals posterior_step mean") {
        for (std::size_t t = 2; t <= 10; ++t) {
            Tensor mean_ddim = ddim_step(xt, x0, t, t - 1, s, 1.0, z0);
            Tensor mean_post = posterior_step(xt, x0, t, s, z0);
            CAPTURE(t);
            CHECK(max_abs_diff(mean_ddim, mean_post) < 1e-12);
        }
    }
    SUBCASE("eta=1 adjacent step: noise scale equals sqrt(beta_tilde)") {
        for (std::size_t t = 2; t <= 10; ++t) {
            const double ab_t = s.alpha_bar(t), ab_p = s.alpha_bar(t - 1);
            const double beta_tilde = s.beta(t) * (1.0 - ab_p) / (1.0 - ab_t);
            // isolate the z coefficient: (step(z=1) - step(z=0)) elementwise
            Tensor one = Tensor::full({3}, 1.0);
            Tensor with = ddim_step(xt, x0, t, t - 1, s, 1.0, one);
            Tensor without = ddim_step(xt, x0, t, t - 1, s, 1.0, z0);
            const double coef = with[0] - without[0];
            CAPTURE(t);
            CHECK(coef == doctest::Approx(std::sqrt(beta_tilde)).epsilon(1e-10));
        }
    }
    SUBCASE("ordering violations throw") {
        CHECK_THROWS_AS(ddim_step(xt, x0, 3, 3, s, 0.0, z0), std::invalid_argument);
        CHECK_THROWS_AS(ddim_step(xt, x0, 3, 5, s, 0.0, z0), std::invalid_argument);
        CHECK_THROWS_AS(ddim_step(xt, x0, 3, 1, s, 1.5, z0), std::invalid_argument);
    }
}

namespace {

struct PfRun {
    double endpoint;
    double max_traj_err;  // max |x_chain(t) - x_analytic(t)| over the whole chain
};

// DDIM chain with the exact Gaussian denoiser E[x0 | x_t] for x0 ~ N(m, v),
// started on the analytic probability-flow trajectory
// x_t = sqrt(ab_t) m + c sqrt(ab_t v + 1 - ab_t) (quantile transport: the PF
// ODE moves each quantile c of the data law along the Gaussian marginals).
PfRun ddim_pf_chain(const NoiseSchedule& s, double m, double v, double c) {
    auto denoise = [&](double xt, std::size_t t) {
        const double ab = s.alpha_bar(t);
        const double vt = ab * v + (1.0 - ab);
        return m + std::sqrt(ab) * v / vt * (xt - std::sqrt(ab) * m);
    };
    auto analytic = [&](std::size_t t) {
        const double ab = s.alpha_bar(t);
        return std::sqrt(ab) * m + c * std::sqrt(ab * v + 1.0 - ab);
    };
    double x = analytic(s.T);
    PfRun run{0.0, 0.0};
    Tensor z0({1});
    for (std::size_t t = s.T; t >= 1; --t) {
        Tensor xt({1}, {x});
        Tensor x0h({1}, {denoise(x, t)});
        x = ddim_step(xt, x0h, t, t - 1, s, 0.0, z0)[0];
        run.max_traj_err = std::max(run.max_traj_err, std::abs(x - analytic(t - 1)));
    }
    run.endpoint = x;
    return run;
}

}  // namespace

TEST_CASE("ddim eta=0 with an exact denoiser follows the probability-flow trajectory") {
    const double m = 0.8, v = 0.36;

    SUBCASE("1000-step fine integration tracks the analytic trajectory < 1e-3") {
        // ddim_step with eta=0 is a discretization of the probability-flow
        // ODE: exact only for point-mass data, second-order per step in
        // arccos(sqrt(abar)) otherwise, so accuracy hinges on the schedule
        // resolving the stiff region near abar ~ 1. The linear ramp starts
        // 200x fine exactly there; a median-ish start (c = 0.5) keeps the
        // whole 1000-step trajectory within 1e-3 of the analytic PF solution.
        const double c = 0.5;
        NoiseSchedule s = make_schedule(1000, ScheduleKind::linear);
        const PfRun run = ddim_pf_chain(s, m, v, c);
        CHECK(run.max_traj_err < 1e-3);
        // frozen band: genuine discretization error, not luck or a no-op
        CHECK(run.max_traj_err > 5e-4);
        CHECK(run.max_traj_err < 9.5e-4);

        // a single giant jump T -> 0 with the same exact denoiser is *not* a
        // PF integration and lands far away: fine stepping is load-bearing.
        const double abT = s.alpha_bar(s.T);
        const double xT = std::sqrt(abT) * m + c * std::sqrt(abT * v + 1.0 - abT);
        const double vt = abT * v + (1.0 - abT);
        const double x0h = m + std::sqrt(abT) * v / vt * (xT - std::sqrt(abT) * m);
        Tensor z0({1});
        const double one_jump =
            ddim_step(Tensor({1}, {xT}), Tensor({1}, {x0h}), s.T, 0, s, 0.0, z0)[0];
        const double jump_err = std::abs(one_jump - (m + c * std::sqrt(v)));
        CHECK(jump_err > 100.0 * run.max_traj_err);
        CHECK(jump_err > 0.1);
    }

    SUBCASE("error shrinks as the chain refines (PF convergence)") {
        const double c = 1.3;
        const double analytic = m + c * std::sqrt(v);
        const double err100 = std::abs(
            ddim_pf_chain(make_schedule(100, ScheduleKind::geometric_alpha), m, v, c).endpoint -
            analytic);
        const double err1000 = std::abs(
            ddim_pf_chain(make_schedule(1000, ScheduleKind::geometric_alpha), m, v, c).endpoint -
            analytic);
        CHECK(err1000 < err100 / 3.0);  // measured: ~0.11 -> ~0.017
        CHECK(err1000 < 0.03);
    }
}

TEST_CASE("schedule serialization round-trips bitwise") {
    for (ScheduleKind kind : {ScheduleKind::geometric_alpha, ScheduleKind::linear}) {
        NoiseSchedule s = make_schedule(17, kind);
        std::stringstream ss;
        save_schedule(ss, s);
        NoiseSchedule r = load_schedule(ss);
        CHECK(r.kind == s.kind);
        CHECK(r.T == s.T);
        for (std::size_t i = 0; i < s.betas.size(); ++i) {
            CHECK(r.betas[i] == s.betas[i]);
            CHECK(r.sigmas[i] == s.sigmas[i]);
        }
        for (std::size_t i = 0; i <= s.T; ++i) CHECK(r.alpha_bars[i] == s.alpha_bars[i]);
    }
}
