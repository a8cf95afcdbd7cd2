#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gestgan/tensor.hpp"

namespace gestgan {

// Planar articulated chain: joint 0 is the root pinned at the origin, joint j
// hangs off joint j-1 by bone_lengths[j-1]. Angles are relative (each joint
// rotates in its parent's frame), so fixed bone lengths are guaranteed by
// construction.
struct SkeletonSpec {
    std::size_t joint_count = 5;
    std::vector<double> bone_lengths = {1.0, 0.8, 0.6, 0.4};

    void validate() const;
    std::size_t frame_dim() const { return joint_count * 2; }  // (x, y) per joint
};

// One motion clip. positions is {N, J*2} row-major (x0,y0,x1,y1,... per
// frame), i.e. an N x J x 2 array flattened per frame — the representation
// the models consume. For clips produced by synthdata, positions are exactly
// the forward kinematics of angles (bone-length error < 1e-9); clips decoded
// from a generator carry best-fit angles instead (see sampling).
struct GestureClip {
    std::size_t frames = 0;
    double fps = 20.0;
    Tensor angles;     // {N, J-1}, radians
    Tensor positions;  // {N, J*2}
};

// The condition c: a beat-structured envelope standing in for audio, a
// discrete style label, and the first F frames of the paired clip as the
// seed gesture.
struct ControlTrack {
    std::vector<double> beat_envelope;     // N values in [0, 1]
    std::vector<std::size_t> beat_frames;  // strict local maxima of the envelope
    std::size_t style_id = 0;
    Tensor seed_frames;  // {F, J*2}
};

struct SynthConfig {
    SkeletonSpec skeleton;
    std::size_t frames = 80;      // N
    double fps = 20.0;
    std::size_t styles = 4;       // S
    std::size_t seed_frames = 8;  // F

    void validate() const;
};

struct ClipExample {
    std::uint64_t clip_id = 0;
    GestureClip clip;
    ControlTrack track;
};

// positions <- chain FK: joint 0 at origin, heading accumulates joint angles.
// All angles zero lays the chain along +x.
Tensor forward_kinematics(const Tensor& angles, const SkeletonSpec& spec);

// Inverse of forward_kinematics for position sequences whose consecutive
// joints are distinct points; joint angles are wrapped to (-pi, pi].
Tensor angles_from_positions(const Tensor& positions, const SkeletonSpec& spec);

// Deterministic clip synthesis: style-dependent base oscillations plus
// beat-locked pulses (joint angular speed peaks within +-2 frames of every
// beat) plus small smooth noise. Throws std::invalid_argument for a style
// outside [0, S).
ClipExample generate_clip(std::uint64_t rng_seed, std::size_t style_id, const SynthConfig& cfg);

// Checks the kinematic invariant, the beat-visibility invariant, and the
// envelope local-maximum invariant; throws std::invalid_argument on failure.
void validate_example(const ClipExample& ex, const SynthConfig& cfg);

struct Dataset {
    SynthConfig config;
    std::uint64_t seed = 0;
    std::vector<ClipExample> train, val, test;
};

// Deterministic, style-balanced (round-robin) splits. count must be >= 10 and
// the ratios must leave every split non-empty.
Dataset make_dataset(std::size_t count, double train_ratio, double val_ratio,
                     const SynthConfig& cfg, std::uint64_t seed);

// CSV schema (one row per frame, header included):
//   clip_id,frame,j0_x,j0_y,...,j{J-1}_x,j{J-1}_y,envelope,style,is_beat
// plus a key=value manifest carrying the SynthConfig. Doubles are printed
// with 17 significant digits, so values round-trip exactly.
void export_dataset(const Dataset& ds, const std::string& dir);
Dataset import_dataset(const std::string& dir);

}  // namespace gestgan
