#include "gestgan/oracle.hpp"

#include <cmath>
#include <numbers>

#include "gestgan/common.hpp"

namespace gestgan {

double normal_pdf(double x, double mean, double var) {
    const double d = x - mean;
    return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

double GaussianMixture1D::pdf(double x) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < components(); ++k) {
        acc += weights[k] * normal_pdf(x, means[k], stds[k] * stds[k]);
    }
    return acc;
}

double GaussianMixture1D::pdf_derivative(double x) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < components(); ++k) {
        const double var = stds[k] * stds[k];
        acc += weights[k] * normal_pdf(x, means[k], var) * (means[k] - x) / var;
    }
    return acc;
}

double GaussianMixture1D::mean() const {
    double m = 0.0;
    for (std::size_t k = 0; k < components(); ++k) m += weights[k] * means[k];
    return m;
}

double GaussianMixture1D::variance() const {
    const double m = mean();
    double acc = 0.0;
    for (std::size_t k = 0; k < components(); ++k) {
        acc += weights[k] * (stds[k] * stds[k] + means[k] * means[k]);
    }
    return acc - m * m;
}

void GaussianMixture1D::validate() const {
    require(!weights.empty(), "GaussianMixture1D: empty mixture");
    require(weights.size() == means.size() && weights.size() == stds.size(),
            "GaussianMixture1D: parallel lists disagree in length");
    double sum = 0.0;
    for (std::size_t k = 0; k < components(); ++k) {
        require(weights[k] > 0.0, "GaussianMixture1D: weights must be positive");
        require(stds[k] > 0.0, "GaussianMixture1D: stds must be positive");
        sum += weights[k];
    }
    require(std::abs(sum - 1.0) < 1e-12, "GaussianMixture1D: weights must sum to 1");
}

GaussianMixture1D diffuse_gmm(const GaussianMixture1D& data, double abar) {
    data.validate();
    require(abar > 0.0 && abar <= 1.0, "diffuse_gmm: abar outside (0, 1]");
    GaussianMixture1D out = data;
    const double root = std::sqrt(abar);
    for (std::size_t k = 0; k < out.components(); ++k) {
        out.means[k] = root * data.means[k];
        out.stds[k] = std::sqrt(abar * data.stds[k] * data.stds[k] + (1.0 - abar));
    }
    return out;
}

PosteriorResult exact_posterior(const GaussianMixture1D& data, double abar_t, double abar_prev,
                                double x_t) {
    data.validate();
    require(abar_t > 0.0 && abar_t < abar_prev && abar_prev <= 1.0,
            "exact_posterior: need 0 < abar_t < abar_prev <= 1");
    const std::size_t K = data.components();
    // Transition x_t = a x_prev + sqrt(1 - a^2) eps with a = sqrt(abar_t/abar_prev).
    const double a = std::sqrt(abar_t / abar_prev);

    GaussianMixture1D post;
    post.weights.resize(K);
    post.means.resize(K);
    post.stds.resize(K);
    double wsum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        const double var0 = data.stds[k] * data.stds[k];
        const double m_prev = std::sqrt(abar_prev) * data.means[k];
        const double v_prev = abar_prev * var0 + (1.0 - abar_prev);
        const double m_t = a * m_prev;
        const double v_t = a * a * v_prev + (1.0 - a * a);
        const double cov = a * v_prev;
        post.means[k] = m_prev + (cov / v_t) * (x_t - m_t);
        post.stds[k] = std::sqrt(v_prev - cov * cov / v_t);
        const double resp = data.weights[k] * normal_pdf(x_t, m_t, v_t);
        post.weights[k] = resp;
        wsum += resp;
    }
    require(wsum > 0.0, "exact_posterior: x_t has zero likelihood under every component");
    for (double& w : post.weights) w /= wsum;

    PosteriorResult res;
    res.mixture = std::move(post);
    ModeReport modes = count_modes(res.mixture);
    res.mode_locations = std::move(modes.locations);
    res.is_multimodal = modes.count >= 2;
    return res;
}

DensityGrid quadrature_posterior(const GaussianMixture1D& data, double abar_t, double abar_prev,
                                 double x_t, std::size_t grid) {
    data.validate();
    require(abar_t > 0.0 && abar_t < abar_prev && abar_prev <= 1.0,
            "quadrature_posterior: need 0 < abar_t < abar_prev <= 1");
    require(grid >= 16, "quadrature_posterior: degenerate grid");

    const GaussianMixture1D prev = diffuse_gmm(data, abar_prev);
    const double m = prev.mean();
    const double sd = std::sqrt(prev.variance());

    const double a = std::sqrt(abar_t / abar_prev);
    const double trans_var = 1.0 - a * a;

    // Cover >= 8 sigma of the prev-step marginal, widened by the 8-sigma
    // range of the likelihood in x_prev (center x_t/a) so the posterior
    // cannot be pushed off the grid when x_t sits far in the prior's tail.
    const double like_c = x_t / a;
    const double like_sd = std::sqrt(trans_var) / a;
    const double lo = std::min(m - 8.0 * sd, like_c - 8.0 * like_sd);
    const double hi = std::max(m + 8.0 * sd, like_c + 8.0 * like_sd);

    DensityGrid out;
    out.x.resize(grid);
    out.density.resize(grid);
    const double h = (hi - lo) / static_cast<double>(grid - 1);
    for (std::size_t i = 0; i < grid; ++i) {
        const double xp = lo + h * static_cast<double>(i);
        out.x[i] = xp;
        out.density[i] = prev.pdf(xp) * normal_pdf(x_t, a * xp, trans_var);
    }
    // Trapezoidal normalization.
    double mass = 0.0;
    for (std::size_t i = 0; i + 1 < grid; ++i) {
        mass += 0.5 * (out.density[i] + out.density[i + 1]) * h;
    }
    require(mass > 0.0, "quadrature_posterior: zero mass on grid");
    for (double& d : out.density) d /= mass;
    return out;
}

namespace {

// Bisection on the density derivative inside a bracketing interval.
double refine_mode(const GaussianMixture1D& mix, double lo, double hi) {
    double flo = mix.pdf_derivative(lo);
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = mix.pdf_derivative(mid);
        if ((flo > 0.0) == (fm > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

ModeReport count_modes(const GaussianMixture1D& mixture) {
    mixture.validate();
    const double m = mixture.mean();
    const double sd = std::sqrt(mixture.variance());
    const std::size_t n = 10000;
    const double lo = m - 8.0 * sd, hi = m + 8.0 * sd;
    const double h = (hi - lo) / static_cast<double>(n - 1);

    ModeReport rep;
    double prev_d = mixture.pdf_derivative(lo);
    for (std::size_t i = 1; i < n; ++i) {
        const double x = lo + h * static_cast<double>(i);
        const double d = mixture.pdf_derivative(x);
        if (prev_d > 0.0 && d < 0.0) {  // strict + -> - sign change: local max
            rep.locations.push_back(refine_mode(mixture, x - h, x));
        }
        prev_d = d;
    }
    rep.count = rep.locations.size();
    return rep;
}

ModeReport count_modes(const std::vector<double>& x, const std::vector<double>& density) {
    require(x.size() == density.size() && x.size() >= 3, "count_modes: degenerate grid");
    ModeReport rep;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        if (density[i] > density[i - 1] && density[i] > density[i + 1]) {
            rep.locations.push_back(x[i]);
        }
    }
    rep.count = rep.locations.size();
    return rep;
}

}  // namespace gestgan
