#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gestgan/models.hpp"
#include "gestgan/schedule.hpp"
#include "gestgan/synthdata.hpp"

namespace gestgan {

// gan_fewstep — the trained few-step sampler: the x0_hat prediction is routed
//               through the stochastic posterior at every step (steps == T).
// ancestral   — same update rule, named separately so run manifests record the
//               intent when the generator was trained without the adversary.
// ddim        — deterministic/eta sub-sequence sampler over `steps` strides.
enum class SamplerKind { gan_fewstep, ancestral, ddim };

std::string to_string(SamplerKind k);
SamplerKind sampler_kind_from_string(const std::string& s);

struct SamplerSpec {
    SamplerKind kind = SamplerKind::gan_fewstep;
    std::size_t steps = 0;  // 0 means "use the schedule's T"
    double eta = 0.0;       // ddim only
    std::uint64_t seed = 0;

    void validate(std::size_t schedule_T) const;
    std::size_t effective_steps(std::size_t schedule_T) const;
};

// Evenly spaced decreasing timestep sub-sequence for DDIM:
// tau[i] = round(T * i / steps), i = 0..steps (tau[0] == 0, tau[steps] == T).
std::vector<std::size_t> ddim_timesteps(std::size_t schedule_T, std::size_t steps);

// Runs the reverse process from x_T ~ N(0, I) under the given control track.
// The returned clip stores the raw generated positions; angles are the
// best-fit chain angles (generated frames need not satisfy the bone-length
// invariant, see README). Throws NumericError if the generator parameters or
// any produced frame are non-finite.
GestureClip sample(const SamplerSpec& spec, const Generator& g, const NoiseSchedule& sched,
                   const ControlTrack& track, const SynthConfig& data_cfg);

// k clips per track; clip (i, j) uses seed derive_seed(spec.seed, i, j), so
// any subset of tracks reproduces the same clips.
std::vector<std::vector<GestureClip>> batch_generate(const SamplerSpec& spec, const Generator& g,
                                                     const NoiseSchedule& sched,
                                                     const std::vector<ControlTrack>& tracks,
                                                     std::size_t k, const SynthConfig& data_cfg);

struct LatencyReport {
    double total_ms = 0.0;        // wall time of the median repetition
    std::size_t frames = 0;       // frames generated per repetition
    std::size_t repetitions = 0;
    double ms_per_frame = 0.0;    // total_ms / frames, exactly
    std::vector<double> rep_ms;       // per-repetition wall time
    std::vector<double> per_step_ms;  // per reverse step, first repetition
};

// Times `reps` full repetitions over all tracks and reports the median
// repetition (median-of-means over frames). reps must be >= 1.
LatencyReport benchmark(const SamplerSpec& spec, const Generator& g, const NoiseSchedule& sched,
                        const std::vector<ControlTrack>& tracks, const SynthConfig& data_cfg,
                        std::size_t reps = 5);

}  // namespace gestgan
