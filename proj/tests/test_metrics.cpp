#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "gestgan/common.hpp"
#include "gestgan/io.hpp"
#include "gestgan/metrics.hpp"
#include "gestgan/rng.hpp"

using namespace gestgan;

namespace {

ModelConfig tiny_arch() {
    ModelConfig cfg;
    cfg.frames = 16;
    cfg.styles = 2;
    cfg.d_model = 16;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.d_ff = 24;
    cfg.d_z = 4;
    cfg.d_hidden = 24;
    cfg.d_cond = 8;
    cfg.gn_groups = 4;
    return cfg;
}

SynthConfig tiny_data() {
    SynthConfig cfg;
    cfg.frames = 16;
    cfg.styles = 2;
    return cfg;
}

// Hand-built two-joint clip whose end-effector drifts at unit increments per
// frame except at the given beats, where the increment collapses to 0.05 for
// two frames: the central-difference speed then has a strict local minimum
// exactly at each beat, far below the 30th percentile.
GestureClip dip_clip(std::size_t frames, const std::vector<std::size_t>& beats) {
    GestureClip clip;
    clip.frames = frames;
    clip.fps = 20.0;
    clip.positions = Tensor::matrix(frames, 4);
    std::vector<double> inc(frames, 1.0);
    for (std::size_t b : beats) {
        inc[b] = 0.05;
        inc[b + 1] = 0.05;
    }
    double x = 0.0;
    for (std::size_t f = 0; f < frames; ++f) {
        if (f > 0) x += inc[f];
        clip.positions.at(f, 2) = x;  // end-effector x; y stays 0
    }
    return clip;
}

Tensor vec(const std::vector<double>& v) {
    return Tensor({v.size()}, v);
}

Tensor diag(const std::vector<double>& d) {
    Tensor m = Tensor::matrix(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m.at(i, i) = d[i];
    return m;
}

Tensor random_psd(Rng& rng, std::size_t d) {
    Tensor r = Tensor::matrix(d, d);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = rng.normal();
    Tensor m = Tensor::matrix(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double acc = (i == j) ? 0.5 : 0.0;  // + 0.5 I keeps it well-conditioned
            for (std::size_t k = 0; k < d; ++k) acc += r.at(i, k) * r.at(j, k);
            m.at(i, j) = acc;
        }
    }
    return m;
}

double mean_recon(const FeatureExtractor& fx, const std::vector<ClipExample>& split) {
    double acc = 0.0;
    for (const ClipExample& ex : split) acc += reconstruction_error(fx, ex.clip);
    return acc / static_cast<double>(split.size());
}

}  // namespace

TEST_CASE("symmetric eigenvalues: analytic cases") {
    Tensor m = Tensor::matrix(2, 2);
    m.at(0, 0) = 2.0;
    m.at(0, 1) = 1.0;
    m.at(1, 0) = 1.0;
    m.at(1, 1) = 2.0;
    const std::vector<double> ev = sym_eigenvalues(m);
    REQUIRE(ev.size() == 2);
    CHECK(ev[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ev[1] == doctest::Approx(3.0).epsilon(1e-12));

    const std::vector<double> dd = sym_eigenvalues(diag({3.0, -1.0, 2.0}));
    CHECK(dd == std::vector<double>{-1.0, 2.0, 3.0});

    const std::vector<double> id = sym_eigenvalues(diag({1.0, 1.0, 1.0, 1.0}));
    for (double v : id) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("frechet distance from moments: analytic cases") {
    SUBCASE("identical moments give zero") {
        Rng rng(11);
        const Tensor cov = random_psd(rng, 5);
        Tensor mu({5});
        for (std::size_t i = 0; i < 5; ++i) mu[i] = rng.normal();
        CHECK(frechet_from_moments(mu, cov, mu, cov) < 1e-8);
        CHECK(frechet_from_moments(mu, cov, mu, cov) >= 0.0);
    }

    SUBCASE("swapped diagonal covariances: tr terms contribute exactly 2") {
        const Tensor mu = vec({0.0, 0.0});
        // tr(diag(1,4)) + tr(diag(4,1)) - 2 tr(sqrt(diag(4,4))) = 5 + 5 - 8.
        const double d = frechet_from_moments(mu, diag({1.0, 4.0}), mu, diag({4.0, 1.0}));
        CHECK(d == doctest::Approx(2.0).epsilon(1e-9));
    }

    SUBCASE("equal covariances reduce to the squared mean shift") {
        const Tensor cov = diag({1.0, 1.0, 1.0});
        const double d =
            frechet_from_moments(vec({0.0, 0.0, 0.0}), cov, vec({0.3, -0.4, 1.2}), cov);
        CHECK(d == doctest::Approx(0.09 + 0.16 + 1.44).epsilon(1e-9));
    }

    SUBCASE("symmetry under argument swap") {
        Rng rng(12);
        const Tensor ca = random_psd(rng, 4);
        const Tensor cb = random_psd(rng, 4);
        Tensor ma({4}), mb({4});
        for (std::size_t i = 0; i < 4; ++i) {
            ma[i] = rng.normal();
            mb[i] = rng.normal();
        }
        const double ab = frechet_from_moments(ma, ca, mb, cb);
        const double ba = frechet_from_moments(mb, cb, ma, ca);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
        CHECK(ab >= 0.0);
    }
}

TEST_CASE("feature moments: hand-checked 2-point case") {
    Tensor mu, cov;
    feature_moments({vec({0.0, 0.0}), vec({2.0, 0.0})}, mu, cov);
    CHECK(mu[0] == 1.0);
    CHECK(mu[1] == 0.0);
    // Unbiased (n - 1) covariance plus the 1e-6 shrinkage ridge.
    CHECK(cov.at(0, 0) == doctest::Approx(2.0 + 1e-6).epsilon(1e-12));
    CHECK(cov.at(1, 1) == doctest::Approx(1e-6).epsilon(1e-12));
    CHECK(cov.at(0, 1) == 0.0);
}

TEST_CASE("frechet distance on samples") {
    Rng rng(13);
    std::vector<Tensor> a;
    for (int i = 0; i < 64; ++i) {
        Tensor t({4});
        for (std::size_t j = 0; j < 4; ++j) t[j] = rng.normal();
        a.push_back(t);
    }
    CHECK(frechet_distance(a, a) < 1e-8);

    SUBCASE("unit mean shift at n = 10000 lands near 1") {
        std::vector<Tensor> big_a, big_b;
        for (int i = 0; i < 10000; ++i) {
            Tensor ta({4}), tb({4});
            for (std::size_t j = 0; j < 4; ++j) {
                ta[j] = rng.normal();
                tb[j] = rng.normal();
            }
            tb[0] += 1.0;
            big_a.push_back(ta);
            big_b.push_back(tb);
        }
        const double d = frechet_distance(big_a, big_b);
        CHECK(d == doctest::Approx(1.0).epsilon(0.05));
    }

    SUBCASE("each set needs at least dim + 1 vectors") {
        const std::vector<Tensor> four(a.begin(), a.begin() + 4);
        CHECK_THROWS((void)frechet_distance(four, a));
        CHECK_THROWS((void)frechet_distance(a, four));
    }
}

TEST_CASE("gesture beats and beat alignment: analytic clip") {
    const std::vector<std::size_t> beats = {10, 20, 30};
    const GestureClip clip = dip_clip(40, beats);
    CHECK(gesture_beats(clip) == beats);

    SUBCASE("perfect alignment scores exactly 1") {
        CHECK(beat_align(beats, clip) == 1.0);
    }

    SUBCASE("a k-frame offset scores exp(-k^2 / 8) at fps 20, sigma 0.1 s") {
        double prev = 1.0;
        for (std::size_t off = 1; off <= 3; ++off) {
            std::vector<std::size_t> shifted;
            for (std::size_t b : beats) shifted.push_back(b + off);
            const double score = beat_align(shifted, clip);
            const double dt = static_cast<double>(off) / clip.fps;
            CHECK(score == doctest::Approx(std::exp(-dt * dt / 0.02)).epsilon(1e-12));
            CHECK(score < prev);  // monotone falloff with misalignment
            prev = score;
        }
    }

    SUBCASE("wider sigma forgives the same offset more") {
        const std::vector<std::size_t> shifted = {12, 22, 32};
        CHECK(beat_align(shifted, clip, 0.1) < beat_align(shifted, clip, 0.3));
    }

    SUBCASE("no detectable gesture beats scores 0") {
        GestureClip flat;
        flat.frames = 10;
        flat.fps = 20.0;
        flat.positions = Tensor::matrix(10, 4);  // motionless: no strict minima
        CHECK(gesture_beats(flat).empty());
        CHECK(beat_align({3, 7}, flat) == 0.0);
    }

    SUBCASE("argument validation") {
        CHECK_THROWS((void)beat_align({}, clip));
        CHECK_THROWS((void)beat_align(beats, clip, 0.0));
        GestureClip tiny;
        tiny.frames = 3;
        tiny.fps = 20.0;
        tiny.positions = Tensor::matrix(3, 4);
        CHECK_THROWS((void)gesture_beats(tiny));
    }
}

TEST_CASE("real clips align with their own control beats") {
    const SynthConfig cfg;  // default desk-scale corpus settings
    for (std::size_t style = 0; style < cfg.styles; ++style) {
        const ClipExample ex = generate_clip(500 + style, style, cfg);
        const std::vector<std::size_t> gb = gesture_beats(ex.clip);
        REQUIRE(!gb.empty());
        for (std::size_t b : gb) {
            CHECK(b >= 2);
            CHECK(b + 2 < cfg.frames);
        }
        CHECK(beat_align(ex.track.beat_frames, ex.clip) > 0.8);
    }
}

TEST_CASE("diversity: analytic cases") {
    const SynthConfig dc = tiny_data();
    const GestureClip base = generate_clip(40, 0, dc).clip;
    GestureClip plus1 = base;
    GestureClip plus3 = base;
    for (std::size_t i = 0; i < base.positions.size(); ++i) {
        plus1.positions[i] += 1.0;
        plus3.positions[i] += 3.0;
    }

    CHECK(diversity({base, base}) == 0.0);
    CHECK(diversity({base, plus1}) == doctest::Approx(1.0).epsilon(1e-12));
    // Pairs: |0-1| = 1, |0-3| = 3, |1-3| = 2 -> mean 2.
    CHECK(diversity({base, plus1, plus3}) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(diversity({plus3, base, plus1}) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS((void)diversity({base}));
}

TEST_CASE("feature extractor: determinism, capacity, generalization, persistence") {
    const SynthConfig dc = tiny_data();
    const Dataset ds = make_dataset(170, 0.6, 0.2, dc, 31);
    REQUIRE(ds.train.size() >= 100);
    std::vector<const GestureClip*> clips;
    for (const ClipExample& ex : ds.train) clips.push_back(&ex.clip);

    const FeatureExtractor fx = train_feature_extractor(clips, 7);
    CHECK(fx.input_dim == dc.frames * dc.skeleton.frame_dim());

    SUBCASE("same seed reproduces the parameters bitwise; a different seed does not") {
        const FeatureExtractor fx2 = train_feature_extractor(clips, 7);
        CHECK(fx2.params.checksum() == fx.params.checksum());
        const FeatureExtractor fx3 = train_feature_extractor(clips, 8);
        CHECK(fx3.params.checksum() != fx.params.checksum());
    }

    SUBCASE("fewer than 100 clips is rejected") {
        const std::vector<const GestureClip*> few(clips.begin(), clips.begin() + 99);
        CHECK_THROWS((void)train_feature_extractor(few, 7));
    }

    SUBCASE("feature map is deterministic with the documented width") {
        const Tensor f1 = extract_features(fx, ds.val[0].clip);
        const Tensor f2 = extract_features(fx, ds.val[0].clip);
        REQUIRE(f1.size() == fx.d_f);
        CHECK(max_abs_diff(f1, f2) == 0.0);
        for (std::size_t i = 0; i < f1.size(); ++i) CHECK(std::isfinite(f1[i]));
    }

    SUBCASE("held-out reconstruction stays within 2x of train reconstruction") {
        const double tr = mean_recon(fx, ds.train);
        const double va = mean_recon(fx, ds.val);
        CHECK(tr > 0.0);
        CHECK(va < 2.0 * tr);
    }

    SUBCASE("latent covariance is nondegenerate") {
        std::vector<Tensor> feats;
        for (const ClipExample& ex : ds.train) feats.push_back(extract_features(fx, ex.clip));
        Tensor mu, cov;
        feature_moments(feats, mu, cov);
        const std::vector<double> ev = sym_eigenvalues(cov);
        CHECK(ev.front() > 1e-7);  // shrinkage floor holds, no collapsed directions
    }

    SUBCASE("split-half FGD on real data is small; noise clips sit far away") {
        std::vector<Tensor> half_a, half_b, noise;
        Rng rng(55);
        // Styles round-robin through the split, so pair up indices (i % 4)
        // to keep both halves style-balanced.
        for (std::size_t i = 0; i < ds.train.size(); ++i) {
            const Tensor f = extract_features(fx, ds.train[i].clip);
            (i % 4 < 2 ? half_a : half_b).push_back(f);
        }
        for (std::size_t i = 0; i < 50; ++i) {
            GestureClip junk = ds.train[i].clip;
            for (std::size_t k = 0; k < junk.positions.size(); ++k) {
                junk.positions[k] = 3.0 * rng.normal();
            }
            noise.push_back(extract_features(fx, junk));
        }
        const double near = frechet_distance(half_a, half_b);
        const double far = frechet_distance(half_a, noise);
        CHECK(near >= 0.0);
        CHECK(near < 2.0);       // same-distribution halves
        CHECK(far > 10.0 * near);  // noise is unambiguously distinguishable
    }

    SUBCASE("save/load round-trips bitwise and rejects corrupt input") {
        const std::string path =
            (std::filesystem::temp_directory_path() / "gestgan_fx_test.txt").string();
        save_extractor(path, fx);
        const FeatureExtractor back = load_extractor(path);
        CHECK(back.params.checksum() == fx.params.checksum());
        CHECK(back.input_dim == fx.input_dim);
        CHECK(back.d_f == fx.d_f);
        const Tensor f1 = extract_features(fx, ds.test[0].clip);
        const Tensor f2 = extract_features(back, ds.test[0].clip);
        CHECK(max_abs_diff(f1, f2) == 0.0);
        std::filesystem::remove(path);
        CHECK_THROWS_AS((void)load_extractor(path), IoError);
        write_text_file(path, "garbage\n");
        CHECK_THROWS_AS((void)load_extractor(path), IoError);
        std::filesystem::remove(path);
    }
}

TEST_CASE("evaluate: assembled report on an untrained generator") {
    const SynthConfig dc = tiny_data();
    const Dataset ds = make_dataset(170, 0.6, 0.2, dc, 32);
    std::vector<const GestureClip*> clips;
    for (const ClipExample& ex : ds.train) clips.push_back(&ex.clip);
    const FeatureExtractor fx = train_feature_extractor(clips, 9);

    const Generator g = make_generator(tiny_arch(), 200);
    const NoiseSchedule sched = make_schedule(4, ScheduleKind::geometric_alpha);
    const SamplerSpec spec{.kind = SamplerKind::gan_fewstep, .steps = 0, .eta = 0.0, .seed = 6};
    EvalOptions opt;
    opt.div_tracks = 2;
    opt.div_k = 2;
    opt.bench_tracks = 1;
    opt.bench_reps = 1;

    const MetricsReport rep = evaluate(g, spec, sched, ds.test, fx, dc, opt);
    CHECK(std::isfinite(rep.fgd));
    CHECK(rep.fgd > 0.0);  // untrained output is nowhere near the real manifold
    CHECK(rep.ba >= 0.0);
    CHECK(rep.ba <= 1.0);
    CHECK(rep.div > 0.0);
    CHECK(rep.ms_per_frame > 0.0);
    CHECK(rep.config_fingerprint != 0);

    // The statistical fields are deterministic; only the timing varies.
    const MetricsReport rep2 = evaluate(g, spec, sched, ds.test, fx, dc, opt);
    CHECK(rep2.fgd == rep.fgd);
    CHECK(rep2.ba == rep.ba);
    CHECK(rep2.div == rep.div);
    CHECK(rep2.config_fingerprint == rep.config_fingerprint);

    // Too few test tracks for a d_f-dim Gaussian fit.
    const std::vector<ClipExample> few(ds.test.begin(), ds.test.begin() + 10);
    CHECK_THROWS((void)evaluate(g, spec, sched, few, fx, dc, opt));
}
