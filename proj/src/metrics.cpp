#include "gestgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "gestgan/autodiff.hpp"
#include "gestgan/common.hpp"
#include "gestgan/io.hpp"
#include "gestgan/optim.hpp"
#include "gestgan/rng.hpp"

namespace gestgan {

namespace {

constexpr double kShrinkage = 1e-6;

// Cyclic Jacobi eigendecomposition for a (symmetrized) dense matrix. Returns
// eigenvalues unsorted; if evecs is non-null it receives the column
// eigenvectors. Adequate for the d <= 32 matrices used here.
std::vector<double> jacobi_eigen(Tensor a, Tensor* evecs) {
    require(a.rank() == 2 && a.rows() == a.cols(), "jacobi_eigen: need a square matrix");
    const std::size_t n = a.rows();
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            const double m = 0.5 * (a.at(p, q) + a.at(q, p));
            a.at(p, q) = a.at(q, p) = m;
        }
    }
    Tensor v({n, n});
    for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    double scale = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) scale = std::max(scale, std::abs(a[i]));
    const double tol = std::max(scale, 1.0) * 1e-15;

    for (std::size_t sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(a.at(p, q)));
        }
        if (off <= tol) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::abs(apq) <= tol * 1e-2) continue;
                const double theta = 0.5 * (a.at(q, q) - a.at(p, p)) / apq;
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<double> evals(n);
    for (std::size_t i = 0; i < n; ++i) evals[i] = a.at(i, i);
    if (evecs) *evecs = std::move(v);
    return evals;
}

// V diag(sqrt(clamp(lambda))) V^T for a PSD-up-to-roundoff matrix.
Tensor sqrt_psd(const Tensor& m) {
    Tensor v;
    std::vector<double> evals = jacobi_eigen(m, &v);
    const std::size_t n = m.rows();
    Tensor out({n, n});
    for (std::size_t e = 0; e < n; ++e) {
        require(evals[e] > -1e-8, "sqrt_psd: matrix has a significantly negative eigenvalue");
        const double r = std::sqrt(std::max(evals[e], 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) out.at(i, j) += r * v.at(i, e) * v.at(j, e);
        }
    }
    return out;
}

double trace(const Tensor& m) {
    double tr = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) tr += m.at(i, i);
    return tr;
}

// Linear-interpolation percentile of an unsorted sample, p in [0, 100].
double percentile(std::vector<double> xs, double p) {
    require(!xs.empty(), "percentile: empty sample");
    std::sort(xs.begin(), xs.end());
    const double pos = p / 100.0 * static_cast<double>(xs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= xs.size()) return xs.back();
    const double frac = pos - static_cast<double>(lo);
    return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

std::vector<double> sym_eigenvalues(const Tensor& m) {
    std::vector<double> evals = jacobi_eigen(m, nullptr);
    std::sort(evals.begin(), evals.end());
    return evals;
}

void feature_moments(const std::vector<Tensor>& feats, Tensor& mu, Tensor& cov) {
    require(feats.size() >= 2, "feature_moments: need at least two vectors");
    const std::size_t d = feats.front().size();
    for (const Tensor& f : feats) require(f.size() == d, "feature_moments: ragged features");
    const double n = static_cast<double>(feats.size());

    mu = Tensor({d});
    for (const Tensor& f : feats) {
        for (std::size_t i = 0; i < d; ++i) mu[i] += f[i];
    }
    for (std::size_t i = 0; i < d; ++i) mu[i] /= n;

    cov = Tensor({d, d});
    for (const Tensor& f : feats) {
        for (std::size_t i = 0; i < d; ++i) {
            const double di = f[i] - mu[i];
            for (std::size_t j = 0; j < d; ++j) cov.at(i, j) += di * (f[j] - mu[j]);
        }
    }
    for (std::size_t i = 0; i < d * d; ++i) cov[i] /= (n - 1.0);
    for (std::size_t i = 0; i < d; ++i) cov.at(i, i) += kShrinkage;
}

double frechet_from_moments(const Tensor& mu_a, const Tensor& cov_a, const Tensor& mu_b,
                            const Tensor& cov_b) {
    const std::size_t d = mu_a.size();
    require(mu_b.size() == d, "frechet: mean dimension mismatch");
    require(cov_a.rank() == 2 && cov_a.rows() == d && cov_a.cols() == d &&
                cov_b.rank() == 2 && cov_b.rows() == d && cov_b.cols() == d,
            "frechet: covariance shape mismatch");

    double mean_term = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = mu_a[i] - mu_b[i];
        mean_term += diff * diff;
    }

    // tr((Sa Sb)^{1/2}) via the symmetrized product sqrt(Sa) Sb sqrt(Sa).
    const Tensor ra = sqrt_psd(cov_a);
    const Tensor m = matmul(matmul(ra, cov_b), ra);
    const std::vector<double> evals = jacobi_eigen(m, nullptr);
    double tr_sqrt = 0.0;
    for (double e : evals) {
        require(e > -1e-8, "frechet: cross-covariance eigenvalue below -1e-8");
        tr_sqrt += std::sqrt(std::max(e, 0.0));
    }

    const double fgd = mean_term + trace(cov_a) + trace(cov_b) - 2.0 * tr_sqrt;
    require(fgd > -1e-6, "frechet: negative distance beyond the roundoff budget");
    return std::max(fgd, 0.0);
}

double frechet_distance(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    require(!a.empty() && !b.empty(), "frechet_distance: empty feature set");
    const std::size_t d = a.front().size();
    require(a.size() >= d + 1 && b.size() >= d + 1,
            "frechet_distance: each set needs at least dim + 1 vectors");
    Tensor mu_a, cov_a, mu_b, cov_b;
    feature_moments(a, mu_a, cov_a);
    feature_moments(b, mu_b, cov_b);
    return frechet_from_moments(mu_a, cov_a, mu_b, cov_b);
}

// ---- feature extractor -----------------------------------------------------

namespace {

Tensor init_matrix(Rng& rng, std::size_t r, std::size_t c, double std_dev) {
    Tensor t({r, c});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = std_dev * rng.normal();
    return t;
}

Tensor flatten_clip(const GestureClip& clip, std::size_t input_dim) {
    require(clip.positions.size() == input_dim, "extractor: clip size mismatch");
    return clip.positions.reshaped({1, input_dim});
}

// Plain (tape-free) affine layer.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor out = matmul(x, w);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < out.cols(); ++j) out.at(i, j) += b[j];
    }
    return out;
}

}  // namespace

FeatureExtractor train_feature_extractor(const std::vector<const GestureClip*>& clips,
                                         std::uint64_t seed, std::size_t epochs, std::size_t batch,
                                         double lr) {
    require(clips.size() >= 100, "train_feature_extractor: need at least 100 clips");
    require(batch >= 1 && epochs >= 1, "train_feature_extractor: bad schedule");
    FeatureExtractor fx;
    fx.input_dim = clips.front()->positions.size();
    for (const GestureClip* c : clips) {
        require(c->positions.size() == fx.input_dim, "train_feature_extractor: ragged clips");
    }

    Rng init_rng(derive_seed(seed, 41, 0));
    auto lin_std = [](std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); };
    fx.params.add("enc0.w", init_matrix(init_rng, fx.input_dim, fx.d_hidden, lin_std(fx.input_dim)));
    fx.params.add("enc0.b", Tensor({fx.d_hidden}));
    fx.params.add("enc1.w", init_matrix(init_rng, fx.d_hidden, fx.d_f, lin_std(fx.d_hidden)));
    fx.params.add("enc1.b", Tensor({fx.d_f}));
    fx.params.add("dec0.w", init_matrix(init_rng, fx.d_f, fx.d_hidden, lin_std(fx.d_f)));
    fx.params.add("dec0.b", Tensor({fx.d_hidden}));
    fx.params.add("dec1.w", init_matrix(init_rng, fx.d_hidden, fx.input_dim, lin_std(fx.d_hidden)));
    fx.params.add("dec1.b", Tensor({fx.input_dim}));

    AdamWState opt = make_adamw(lr);
    Rng order_rng(derive_seed(seed, 42, 0));
    const std::size_t n = clips.size();
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j =
                static_cast<std::size_t>(order_rng.uniform_int(0, static_cast<std::int64_t>(i)));
            std::swap(order[i], order[j]);
        }
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t rows = std::min(batch, n - start);
            Tensor x({rows, fx.input_dim});
            for (std::size_t r = 0; r < rows; ++r) {
                const Tensor& pos = clips[order[start + r]]->positions;
                for (std::size_t c = 0; c < fx.input_dim; ++c) x.at(r, c) = pos[c];
            }
            Tape tape;
            const std::vector<Var> p = lift_params(tape, fx.params, true);
            const Var xin = tape.constant(x);
            const Var h1 = tape.selu(tape.add_rowvec(tape.matmul(xin, p[0]), p[1]));
            const Var lat = tape.add_rowvec(tape.matmul(h1, p[2]), p[3]);
            const Var h2 = tape.selu(tape.add_rowvec(tape.matmul(lat, p[4]), p[5]));
            const Var rec = tape.add_rowvec(tape.matmul(h2, p[6]), p[7]);
            const Var diff = tape.sub(rec, xin);
            const Var loss = tape.mean(tape.mul(diff, diff));
            tape.backward(loss);
            std::vector<const Tensor*> grads;
            grads.reserve(p.size());
            for (const Var v : p) grads.push_back(&tape.grad(v));
            adamw_step(opt, fx.params.pointers(), grads);
        }
    }
    return fx;
}

Tensor extract_features(const FeatureExtractor& fx, const GestureClip& clip) {
    const Tensor x = flatten_clip(clip, fx.input_dim);
    const Tensor h1 = selu(affine(x, fx.params["enc0.w"], fx.params["enc0.b"]));
    const Tensor lat = affine(h1, fx.params["enc1.w"], fx.params["enc1.b"]);
    return lat.reshaped({fx.d_f});
}

double reconstruction_error(const FeatureExtractor& fx, const GestureClip& clip) {
    const Tensor x = flatten_clip(clip, fx.input_dim);
    const Tensor h1 = selu(affine(x, fx.params["enc0.w"], fx.params["enc0.b"]));
    const Tensor lat = affine(h1, fx.params["enc1.w"], fx.params["enc1.b"]);
    const Tensor h2 = selu(affine(lat, fx.params["dec0.w"], fx.params["dec0.b"]));
    const Tensor rec = affine(h2, fx.params["dec1.w"], fx.params["dec1.b"]);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = rec[i] - x[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

void save_extractor(const std::string& path, const FeatureExtractor& fx) {
    std::ofstream os(path);
    if (!os) throw IoError("save_extractor: cannot open " + path);
    os << "gestgan_extractor 1\n";
    os << "input_dim=" << fx.input_dim << "\n";
    os << "d_f=" << fx.d_f << "\n";
    os << "d_hidden=" << fx.d_hidden << "\n";
    save_tensors(os, fx.params);
    if (!os) throw IoError("save_extractor: stream write failed");
}

FeatureExtractor load_extractor(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("load_extractor: cannot open " + path);
    std::string magic;
    std::getline(is, magic);
    if (magic != "gestgan_extractor 1") throw IoError("load_extractor: bad magic in " + path);
    FeatureExtractor fx;
    auto read_kv = [&](const std::string& key) {
        std::string line;
        if (!std::getline(is, line) || line.rfind(key + "=", 0) != 0) {
            throw IoError("load_extractor: expected " + key);
        }
        return std::stoull(line.substr(key.size() + 1));
    };
    fx.input_dim = read_kv("input_dim");
    fx.d_f = read_kv("d_f");
    fx.d_hidden = read_kv("d_hidden");
    fx.params = load_tensors(is);
    return fx;
}

// ---- kinematic metrics -------------------------------------------------------

std::vector<std::size_t> gesture_beats(const GestureClip& clip) {
    require(clip.frames >= 5, "gesture_beats: clip too short");
    const Tensor& pos = clip.positions;
    require(pos.rank() == 2 && pos.rows() == clip.frames && pos.cols() >= 2,
            "gesture_beats: bad position array");
    const std::size_t xc = pos.cols() - 2;  // end-effector columns (x, y)
    const std::size_t n = clip.frames;

    // Central-difference end-effector speed; speeds[i] belongs to frame i + 1.
    std::vector<double> speeds;
    speeds.reserve(n - 2);
    for (std::size_t f = 1; f + 1 < n; ++f) {
        const double dx = pos.at(f + 1, xc) - pos.at(f - 1, xc);
        const double dy = pos.at(f + 1, xc + 1) - pos.at(f - 1, xc + 1);
        speeds.push_back(0.5 * std::hypot(dx, dy));
    }
    const double cutoff = percentile(speeds, 30.0);

    std::vector<std::size_t> beats;
    for (std::size_t i = 1; i + 1 < speeds.size(); ++i) {
        if (speeds[i] < speeds[i - 1] && speeds[i] < speeds[i + 1] && speeds[i] < cutoff) {
            beats.push_back(i + 1);
        }
    }
    return beats;
}

double beat_align(const std::vector<std::size_t>& control_beats, const GestureClip& clip,
                  double sigma_seconds) {
    require(!control_beats.empty(), "beat_align: need at least one control beat");
    require(clip.fps > 0.0, "beat_align: fps must be positive");
    require(sigma_seconds > 0.0, "beat_align: sigma must be positive");
    const std::vector<std::size_t> gb = gesture_beats(clip);
    if (gb.empty()) return 0.0;

    double acc = 0.0;
    for (std::size_t b : control_beats) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t g : gb) {
            const double dt = (static_cast<double>(b) - static_cast<double>(g)) / clip.fps;
            best = std::min(best, dt * dt);
        }
        acc += std::exp(-best / (2.0 * sigma_seconds * sigma_seconds));
    }
    return acc / static_cast<double>(control_beats.size());
}

double diversity(const std::vector<GestureClip>& clips) {
    require(clips.size() >= 2, "diversity: need at least two clips");
    const std::size_t m = clips.front().positions.size();
    for (const GestureClip& c : clips) {
        require(c.positions.size() == m, "diversity: clips must share a shape");
    }
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < clips.size(); ++i) {
        for (std::size_t j = i + 1; j < clips.size(); ++j) {
            double l1 = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                l1 += std::abs(clips[i].positions[k] - clips[j].positions[k]);
            }
            acc += l1 / static_cast<double>(m);
            ++pairs;
        }
    }
    return acc / static_cast<double>(pairs);
}

// ---- assembled report ----------------------------------------------------------

MetricsReport evaluate(const Generator& g, const SamplerSpec& spec, const NoiseSchedule& sched,
                       const std::vector<ClipExample>& test, const FeatureExtractor& fx,
                       const SynthConfig& data_cfg, const EvalOptions& opt) {
    require(!test.empty(), "evaluate: empty test set");
    require(test.size() >= fx.d_f + 1,
            "evaluate: test set smaller than d_f + 1 (degenerate FGD covariance)");

    std::vector<ControlTrack> tracks;
    tracks.reserve(test.size());
    for (const ClipExample& ex : test) tracks.push_back(ex.track);

    // One generated clip per test track (sample j = 0 of each track).
    const std::vector<std::vector<GestureClip>> singles =
        batch_generate(spec, g, sched, tracks, 1, data_cfg);

    std::vector<Tensor> real_feats, gen_feats;
    real_feats.reserve(test.size());
    gen_feats.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        real_feats.push_back(extract_features(fx, test[i].clip));
        gen_feats.push_back(extract_features(fx, singles[i][0]));
    }

    MetricsReport rep;
    rep.fgd = frechet_distance(real_feats, gen_feats);

    double ba_acc = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        ba_acc += beat_align(test[i].track.beat_frames, singles[i][0]);
    }
    rep.ba = ba_acc / static_cast<double>(test.size());

    const std::size_t div_tracks = std::min(opt.div_tracks, tracks.size());
    require(div_tracks >= 1 && opt.div_k >= 2, "evaluate: diversity probe needs >= 1 track, k >= 2");
    const std::vector<ControlTrack> div_subset(tracks.begin(), tracks.begin() + div_tracks);
    const std::vector<std::vector<GestureClip>> div_sets =
        batch_generate(spec, g, sched, div_subset, opt.div_k, data_cfg);
    double div_acc = 0.0;
    for (const std::vector<GestureClip>& set : div_sets) div_acc += diversity(set);
    rep.div = div_acc / static_cast<double>(div_sets.size());

    const std::size_t bench_tracks = std::min(opt.bench_tracks, tracks.size());
    const std::vector<ControlTrack> bench_subset(tracks.begin(), tracks.begin() + bench_tracks);
    rep.ms_per_frame =
        benchmark(spec, g, sched, bench_subset, data_cfg, opt.bench_reps).ms_per_frame;

    std::ostringstream fp;
    fp << to_string(spec.kind) << "|" << spec.effective_steps(sched.T) << "|" << spec.eta << "|"
       << spec.seed << "|T=" << sched.T << "|" << to_string(sched.kind) << "|arch=" << g.cfg.frames
       << "," << g.cfg.joints << "," << g.cfg.styles << "," << g.cfg.seed_frames << ","
       << g.cfg.d_model << "," << g.cfg.layers << "," << g.cfg.heads << "," << g.cfg.d_ff << ","
       << g.cfg.d_z << "," << g.cfg.d_hidden << "," << g.cfg.d_cond << "," << g.cfg.gn_groups
       << "|fps=" << data_cfg.fps;
    rep.config_fingerprint = fnv1a64(fp.str());
    return rep;
}

}  // namespace gestgan
