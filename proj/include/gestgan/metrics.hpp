#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gestgan/params.hpp"
#include "gestgan/sampling.hpp"
#include "gestgan/synthdata.hpp"
#include "gestgan/tensor.hpp"

namespace gestgan {

// ---- feature extractor -------------------------------------------------------
// Small position-sequence autoencoder (flatten -> d_hidden -> d_f -> d_hidden ->
// flatten, SELU) trained on real clips only; its d_f-dim latent defines the
// feature space the Fréchet gesture distance is computed in.
struct FeatureExtractor {
    std::size_t input_dim = 0;  // frames * frame_dim
    std::size_t d_f = 32;
    std::size_t d_hidden = 128;
    TensorDict params;
};

// Deterministic given (clips, seed). Requires at least 100 clips.
FeatureExtractor train_feature_extractor(const std::vector<const GestureClip*>& clips,
                                         std::uint64_t seed, std::size_t epochs = 20,
                                         std::size_t batch = 32, double lr = 1e-3);

Tensor extract_features(const FeatureExtractor& fx, const GestureClip& clip);  // {d_f}
double reconstruction_error(const FeatureExtractor& fx, const GestureClip& clip);  // mean sq.

void save_extractor(const std::string& path, const FeatureExtractor& fx);
FeatureExtractor load_extractor(const std::string& path);

// ---- distribution distance ---------------------------------------------------
// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
std::vector<double> sym_eigenvalues(const Tensor& m);

// Sample mean {d} and shrinkage-regularized covariance {d, d} (+1e-6 I).
void feature_moments(const std::vector<Tensor>& feats, Tensor& mu, Tensor& cov);

// |mu_a - mu_b|^2 + tr(cov_a + cov_b - 2 (cov_a cov_b)^{1/2}); tiny negative
// results (< 1e-6 in magnitude) are clamped to 0.
double frechet_from_moments(const Tensor& mu_a, const Tensor& cov_a, const Tensor& mu_b,
                            const Tensor& cov_b);

// Fréchet distance between Gaussian fits of two feature sets. Each set needs
// at least dim + 1 vectors (nondegenerate covariance after shrinkage).
double frechet_distance(const std::vector<Tensor>& a, const std::vector<Tensor>& b);

// ---- kinematic metrics ---------------------------------------------------------
// Gesture beats: strict local minima of the end-effector speed (central
// difference) that fall below the speed's 30th percentile. Score: mean over
// control beats b of exp(-min_g (t_b - t_g)^2 / (2 sigma^2)); 0 if the clip
// has no gesture beats.
double beat_align(const std::vector<std::size_t>& control_beats, const GestureClip& clip,
                  double sigma_seconds = 0.1);

// Detected gesture-beat frame indices (exposed for inspection/tests).
std::vector<std::size_t> gesture_beats(const GestureClip& clip);

// Mean L1 distance over all unordered pairs of flattened position sequences,
// normalized by element count. Needs >= 2 clips.
double diversity(const std::vector<GestureClip>& clips);

// ---- assembled report ----------------------------------------------------------
struct MetricsReport {
    double fgd = 0.0;
    double ba = 0.0;
    double div = 0.0;
    double ms_per_frame = 0.0;
    std::uint64_t config_fingerprint = 0;
};

struct EvalOptions {
    std::size_t div_tracks = 8;   // controls used for the diversity probe
    std::size_t div_k = 5;        // samples per control
    std::size_t bench_tracks = 4; // controls timed by the latency probe
    std::size_t bench_reps = 5;
};

// FGD between real test features and one generated clip per test track, BA
// averaged over test tracks, DIV with div_k samples per track, plus the
// benchmark ms/frame.
MetricsReport evaluate(const Generator& g, const SamplerSpec& spec, const NoiseSchedule& sched,
                       const std::vector<ClipExample>& test, const FeatureExtractor& fx,
                       const SynthConfig& data_cfg, const EvalOptions& opt = {});

}  // namespace gestgan
