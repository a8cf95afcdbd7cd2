#pragma once

#include <cstddef>
#include <vector>

namespace gestgan {

// 1-D Gaussian mixture: the analytically tractable stand-in data
// distribution used to demonstrate that large diffusion step gaps make the
// true denoising posterior q(x_{t-1} | x_t) multimodal.
struct GaussianMixture1D {
    std::vector<double> weights;  // positive, sum to 1
    std::vector<double> means;
    std::vector<double> stds;  // positive

    std::size_t components() const { return weights.size(); }
    double pdf(double x) const;
    double pdf_derivative(double x) const;
    double mean() const;
    double variance() const;
    void validate() const;  // throws std::invalid_argument on violation
};

struct ModeReport {
    std::size_t count = 0;
    std::vector<double> locations;
};

struct PosteriorResult {
    GaussianMixture1D mixture;  // exact q(x_{t-1} | x_t)
    std::vector<double> mode_locations;
    bool is_multimodal = false;
};

// Forward marginal of the diffusion applied to a mixture: component k maps
// to mean sqrt(abar) mu_k, variance abar sigma_k^2 + (1 - abar).
GaussianMixture1D diffuse_gmm(const GaussianMixture1D& data, double abar);

// Exact q(x_{t-1} | x_t) for a mixture data distribution and the step pair
// (abar_prev, abar_t): per component, the jointly-Gaussian conditional of
// (x_{t-1} | x_t); responsibilities proportional to
// w_k * N(x_t; sqrt(abar_t) mu_k, abar_t sigma_k^2 + 1 - abar_t).
PosteriorResult exact_posterior(const GaussianMixture1D& data, double abar_t, double abar_prev,
                                double x_t);

struct DensityGrid {
    std::vector<double> x;
    std::vector<double> density;  // normalized by trapezoidal rule
};

// Brute-force oracle for the same posterior: q(x_prev) q(x_t | x_prev) on a
// grid spanning >= 8 standard deviations of the prev-step marginal,
// trapezoid-normalized.
DensityGrid quadrature_posterior(const GaussianMixture1D& data, double abar_t, double abar_prev,
                                 double x_t, std::size_t grid);

// Strict local maxima of the mixture density on a 10^4-point grid over
// +/- 8 sigma, each confirmed by a derivative sign change and refined by
// bisection on the derivative.
ModeReport count_modes(const GaussianMixture1D& mixture);

// Same search applied to tabulated density values (no derivative available;
// uses strict discrete local maxima).
ModeReport count_modes(const std::vector<double>& x, const std::vector<double>& density);

double normal_pdf(double x, double mean, double var);

}  // namespace gestgan
