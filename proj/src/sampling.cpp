#include "gestgan/sampling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "gestgan/common.hpp"
#include "gestgan/rng.hpp"

namespace gestgan {

std::string to_string(SamplerKind k) {
    switch (k) {
        case SamplerKind::gan_fewstep: return "gan_fewstep";
        case SamplerKind::ancestral: return "ancestral";
        case SamplerKind::ddim: return "ddim";
    }
    throw std::invalid_argument("to_string: bad SamplerKind");
}

SamplerKind sampler_kind_from_string(const std::string& s) {
    if (s == "gan_fewstep") return SamplerKind::gan_fewstep;
    if (s == "ancestral") return SamplerKind::ancestral;
    if (s == "ddim") return SamplerKind::ddim;
    throw std::invalid_argument("unknown sampler kind: " + s);
}

std::size_t SamplerSpec::effective_steps(std::size_t schedule_T) const {
    return steps == 0 ? schedule_T : steps;
}

void SamplerSpec::validate(std::size_t schedule_T) const {
    require(schedule_T >= 1, "SamplerSpec: schedule has no steps");
    const std::size_t s = effective_steps(schedule_T);
    if (kind == SamplerKind::ddim) {
        require(s >= 1 && s <= schedule_T, "SamplerSpec: ddim steps must be in [1, T]");
        require(eta >= 0.0, "SamplerSpec: eta must be >= 0");
    } else {
        // The posterior update is defined per adjacent step only.
        require(s == schedule_T, "SamplerSpec: this sampler walks every schedule step (steps == T)");
        require(eta == 0.0, "SamplerSpec: eta applies to ddim only");
    }
}

std::vector<std::size_t> ddim_timesteps(std::size_t schedule_T, std::size_t steps) {
    require(steps >= 1 && steps <= schedule_T, "ddim_timesteps: steps must be in [1, T]");
    std::vector<std::size_t> tau(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
        tau[i] = static_cast<std::size_t>(std::llround(
            static_cast<double>(schedule_T) * static_cast<double>(i) / static_cast<double>(steps)));
    }
    tau.front() = 0;
    tau.back() = schedule_T;
    for (std::size_t i = 1; i <= steps; ++i) {
        require(tau[i] > tau[i - 1], "ddim_timesteps: sub-sequence not strictly increasing");
    }
    return tau;
}

namespace {

Tensor draw_normal(Rng& rng, std::size_t r, std::size_t c) {
    Tensor out({r, c});
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.normal();
    return out;
}

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

GestureClip sample_impl(const SamplerSpec& spec, std::uint64_t seed, const Generator& g,
                        const NoiseSchedule& sched, const ControlTrack& track,
                        const SynthConfig& data_cfg, std::vector<double>* step_ms) {
    spec.validate(sched.T);
    data_cfg.validate();
    require(g.cfg.frames == data_cfg.frames, "sample: generator/data frame count mismatch");
    require(g.cfg.joints == data_cfg.skeleton.joint_count, "sample: generator/data joint mismatch");
    for (const Tensor& p : g.params.values) {
        if (!p.finite()) throw NumericError("sample: generator parameters are not finite");
    }

    const std::size_t n = g.cfg.frames;
    const std::size_t fd = g.cfg.frame_dim();
    Rng rng(seed);
    const CondFeatures cond = make_cond_features(track, g.cfg);
    Tensor x = draw_normal(rng, n, fd);

    auto run_step = [&](std::size_t t, std::size_t t_next) {
        const double t0 = step_ms ? now_ms() : 0.0;
        const Tensor z = draw_normal(rng, 1, g.cfg.d_z);
        const Tensor x0_hat = generator_infer(g, x, z, cond, t, false);
        const Tensor z_post = draw_normal(rng, n, fd);
        if (spec.kind == SamplerKind::ddim) {
            x = ddim_step(x, x0_hat, t, t_next, sched, spec.eta, z_post);
        } else {
            x = posterior_step(x, x0_hat, t, sched, z_post);
        }
        if (!x.finite()) throw NumericError("sample: non-finite state at step t=" + std::to_string(t));
        if (step_ms) step_ms->push_back(now_ms() - t0);
    };

    if (spec.kind == SamplerKind::ddim) {
        const std::vector<std::size_t> tau = ddim_timesteps(sched.T, spec.effective_steps(sched.T));
        for (std::size_t i = tau.size() - 1; i >= 1; --i) run_step(tau[i], tau[i - 1]);
    } else {
        for (std::size_t t = sched.T; t >= 1; --t) run_step(t, t - 1);
    }

    GestureClip clip;
    clip.frames = n;
    clip.fps = data_cfg.fps;
    clip.positions = x;
    clip.angles = angles_from_positions(x, data_cfg.skeleton);
    return clip;
}

}  // namespace

GestureClip sample(const SamplerSpec& spec, const Generator& g, const NoiseSchedule& sched,
                   const ControlTrack& track, const SynthConfig& data_cfg) {
    return sample_impl(spec, spec.seed, g, sched, track, data_cfg, nullptr);
}

std::vector<std::vector<GestureClip>> batch_generate(const SamplerSpec& spec, const Generator& g,
                                                     const NoiseSchedule& sched,
                                                     const std::vector<ControlTrack>& tracks,
                                                     std::size_t k, const SynthConfig& data_cfg) {
    require(k >= 1, "batch_generate: k must be >= 1");
    require(!tracks.empty(), "batch_generate: no tracks");
    std::vector<std::vector<GestureClip>> out(tracks.size());
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        out[i].reserve(k);
        for (std::size_t j = 0; j < k; ++j) {
            out[i].push_back(
                sample_impl(spec, derive_seed(spec.seed, i, j), g, sched, tracks[i], data_cfg, nullptr));
        }
    }
    return out;
}

LatencyReport benchmark(const SamplerSpec& spec, const Generator& g, const NoiseSchedule& sched,
                        const std::vector<ControlTrack>& tracks, const SynthConfig& data_cfg,
                        std::size_t reps) {
    require(reps >= 1, "benchmark: reps must be >= 1");
    require(!tracks.empty(), "benchmark: no tracks");
    LatencyReport rep;
    rep.repetitions = reps;
    rep.frames = tracks.size() * data_cfg.frames;
    for (std::size_t r = 0; r < reps; ++r) {
        std::vector<double> steps_this_rep;
        const double t0 = now_ms();
        for (std::size_t i = 0; i < tracks.size(); ++i) {
            (void)sample_impl(spec, derive_seed(spec.seed, r, i), g, sched, tracks[i], data_cfg,
                              r == 0 ? &steps_this_rep : nullptr);
        }
        rep.rep_ms.push_back(now_ms() - t0);
        if (r == 0) {
            // Fold the per-track step timings into one mean per reverse step.
            const std::size_t s = spec.effective_steps(sched.T);
            rep.per_step_ms.assign(s, 0.0);
            for (std::size_t i = 0; i < steps_this_rep.size(); ++i) {
                rep.per_step_ms[i % s] += steps_this_rep[i] / static_cast<double>(tracks.size());
            }
        }
    }
    std::vector<double> sorted = rep.rep_ms;
    std::sort(sorted.begin(), sorted.end());
    rep.total_ms = sorted[sorted.size() / 2];
    if (sorted.size() % 2 == 0) {
        rep.total_ms = 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
    }
    rep.ms_per_frame = rep.total_ms / static_cast<double>(rep.frames);
    return rep;
}

}  // namespace gestgan
