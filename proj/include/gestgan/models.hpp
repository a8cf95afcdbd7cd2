#pragma once

#include <cstdint>
#include <vector>

#include "gestgan/autodiff.hpp"
#include "gestgan/params.hpp"
#include "gestgan/synthdata.hpp"
#include "gestgan/tensor.hpp"

namespace gestgan {

// Architecture hyperparameters shared by the generator and discriminator.
// Defaults are the desk-scale configuration; a larger 12-layer/8-head
// encoder is constructible by overriding layers/heads/d_model.
struct ModelConfig {
    std::size_t frames = 80;      // N, must be divisible by the D pooling window
    std::size_t joints = 5;       // J
    std::size_t styles = 4;       // S
    std::size_t seed_frames = 8;  // F

    // generator (transformer encoder)
    std::size_t d_model = 128;
    std::size_t layers = 4;
    std::size_t heads = 4;
    std::size_t d_ff = 256;
    std::size_t d_z = 32;

    // discriminator (7-layer MLP)
    std::size_t d_hidden = 128;
    std::size_t d_cond = 32;    // width of each condition feature block
    std::size_t gn_groups = 8;  // group count for the MLP's group norm

    std::size_t frame_dim() const { return joints * 2; }
    void validate() const;
};

// Envelope conditioning is a per-frame window of this many samples (+-2).
constexpr std::size_t kEnvWindow = 5;
// Prefix tokens prepended to the frame tokens: style, seed, time(+z).
constexpr std::size_t kPrefixTokens = 3;
// Discriminator frame pooling window (mean over 4-frame blocks).
constexpr std::size_t kPoolWindow = 4;

// Parameter-independent numeric view of a ControlTrack, in the layout the
// model graphs consume.
struct CondFeatures {
    Tensor env_windows;   // {N, kEnvWindow}, edge-clamped
    Tensor style_onehot;  // {1, S}
    Tensor seed_flat;     // {1, F * frame_dim}
    Tensor env_row;       // {1, N}
};
CondFeatures make_cond_features(const ControlTrack& track, const ModelConfig& cfg);

// Classic sin/cos positional code for a (possibly large) scalar index.
// dim must be even.
Tensor sinusoidal_embedding(double t, std::size_t dim);

struct Generator {
    ModelConfig cfg;
    TensorDict params;
};
struct Discriminator {
    ModelConfig cfg;
    TensorDict params;
};

Generator make_generator(const ModelConfig& cfg, std::uint64_t seed);
Discriminator make_discriminator(const ModelConfig& cfg, std::uint64_t seed);

// Leaf every tensor of `dict` onto the tape, preserving order.
std::vector<Var> lift_params(Tape& tape, const TensorDict& dict, bool requires_grad);

// x0_hat = G(x_t, z, c, t). x_t is {N, frame_dim}, z is {1, d_z}. null_mask
// replaces envelope/style/seed content with the learned null token (the
// unconditional path); the time token and z stay live.
Var generator_forward(Tape& tape, const std::vector<Var>& p, const Generator& g, Var x_t, Var z,
                      const CondFeatures& cond, std::size_t t, bool null_mask);

// Raw discriminator score before the logistic squash; shape {1, 1}. Losses
// use the logit with softplus for numerical stability.
Var discriminator_logit(Tape& tape, const std::vector<Var>& p, const Discriminator& d, Var x_prev,
                        Var x_t, const CondFeatures& cond, std::size_t t, bool null_mask);

// Tape-free convenience wrappers (fresh local tape, no gradients).
Tensor generator_infer(const Generator& g, const Tensor& x_t, const Tensor& z,
                       const CondFeatures& cond, std::size_t t, bool null_mask);
// Probability in (0, 1), clamped to [1e-12, 1 - 1e-12].
double discriminator_prob(const Discriminator& d, const Tensor& x_prev, const Tensor& x_t,
                          const CondFeatures& cond, std::size_t t, bool null_mask);

// The assembled condition embedding (the generator's view of c and t), as
// plain tensors. z is not part of the condition; generator_forward adds its
// projection to the time token.
struct ConditionEmbedding {
    Tensor style_token;  // {1, d_model}
    Tensor seed_token;   // {1, d_model}
    Tensor time_token;   // {1, d_model}
    Tensor frame_cond;   // {N, d_model}
};
ConditionEmbedding encode_condition(const Generator& g, const ControlTrack& track, std::size_t t,
                                    bool null_mask);

}  // namespace gestgan
